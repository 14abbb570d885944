#include "trishbb/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace trishbb::opt {

void TripletConfig::validate() const {
  auto bad = [](const std::string& msg) {
    throw std::invalid_argument("TripletConfig: " + msg);
  };
  if (!(alpha > 0.0) || !std::isfinite(alpha)) bad("alpha must be positive and finite");
  if (!(gamma2 > 0.0) || !(gamma2 <= gamma1)) bad("need 0 < gamma2 <= gamma1");
  if (!std::isfinite(gamma1)) bad("gamma1 must be finite");
  if (!(mu_min > 0.0) || !(mu_min < mu_max)) bad("need 0 < mu_min < mu_max");
  if (!std::isfinite(mu_max)) bad("mu_max must be finite");
  if (!(mu0 >= mu_min) || !(mu0 <= mu_max)) bad("mu0 must lie in [mu_min, mu_max]");
  if (m < 1) bad("m must be >= 1");
  if (!(eta >= 0.0) || !(eta < 1.0)) bad("eta must lie in [0, 1)");
  if (m_F < 1) bad("m_F must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::trish: return "trish";
    case Variant::v1: return "v1";
    case Variant::v2: return "v2";
    case Variant::v3: return "v3";
    case Variant::sgdbb: return "sgdbb";
  }
  return "?";
}

std::optional<Variant> variant_from_string(const std::string& s) {
  if (s == "trish") return Variant::trish;
  if (s == "v1") return Variant::v1;
  if (s == "v2") return Variant::v2;
  if (s == "v3") return Variant::v3;
  if (s == "sgdbb") return Variant::sgdbb;
  return std::nullopt;
}

std::pair<double, int> tr_radius(double g_norm, const TripletConfig& cfg) {
  if (!(g_norm >= 0.0) || !std::isfinite(g_norm))
    throw std::invalid_argument("tr_radius: gradient norm must be finite and >= 0");
  if (g_norm < 1.0 / cfg.gamma1) return {cfg.alpha * cfg.gamma1 * g_norm, 1};
  if (g_norm <= 1.0 / cfg.gamma2) return {cfg.alpha, 2};
  return {cfg.alpha * cfg.gamma2 * g_norm, 3};
}

StepOutcome tr_step(const VectorXd& g, double mu, const TripletConfig& cfg) {
  if (!g.allFinite()) throw std::invalid_argument("tr_step: non-finite gradient");
  if (!(mu > 0.0) || !std::isfinite(mu))
    throw std::invalid_argument("tr_step: mu must be positive and finite");
  const double g_norm = g.norm();
  StepOutcome out;
  std::tie(out.delta, out.radius_case) = tr_radius(g_norm, cfg);
  if (g_norm == 0.0) {
    out.p = VectorXd::Zero(g.size());
    out.kind = StepKind::constrained;
    return out;
  }
  if (mu * g_norm < out.delta) {
    out.p = -mu * g;
    out.kind = StepKind::unconstrained_bb;
  } else {
    out.p = -(out.delta / g_norm) * g;
    out.kind = StepKind::constrained;
  }
  return out;
}

StepOutcome trish_step(const VectorXd& g, const TripletConfig& cfg) {
  if (!g.allFinite()) throw std::invalid_argument("trish_step: non-finite gradient");
  const double g_norm = g.norm();
  StepOutcome out;
  std::tie(out.delta, out.radius_case) = tr_radius(g_norm, cfg);
  out.kind = StepKind::constrained;
  if (g_norm == 0.0) {
    out.p = VectorXd::Zero(g.size());
  } else {
    out.p = -(out.delta / g_norm) * g;
  }
  return out;
}

std::optional<double> bb_raw(const VectorXd& s, const VectorXd& y) {
  if (s.size() != y.size())
    throw std::invalid_argument("bb_raw: size mismatch");
  const double ss = s.squaredNorm();
  if (ss == 0.0) return std::nullopt;
  const double sy = s.dot(y);
  if (sy == 0.0) return std::nullopt;
  return ss / sy;
}

double clamp_mu(std::optional<double> raw, const TripletConfig& cfg) {
  if (!raw.has_value()) return cfg.mu_max;
  return std::max(cfg.mu_min, std::min(std::abs(*raw), cfg.mu_max));
}

double v1_update(long k, double mu, const VectorXd& p_k, const VectorXd& g_k,
                 const VectorXd& x_next, problem::GradOracle& oracle,
                 const TripletConfig& cfg, long& eval_cost) {
  if (k % cfg.m != 0) return mu;  // refresh cycle starts at k = 0
  VectorXd g_next(g_k.size());
  eval_cost += oracle.eval_same_sample(x_next, k, g_next);
  return clamp_mu(bb_raw(p_k, g_next - g_k), cfg);
}

void V2State::init(const VectorXd& x0, const TripletConfig& cfg) {
  gbar = VectorXd::Zero(x0.size());
  gbar_old = VectorXd::Zero(x0.size());
  xbar_old = x0;
  mubar = cfg.mu0;
}

double v2_update(V2State& st, long k, double mu, const VectorXd& x_next,
                 const VectorXd& g_k, const TripletConfig& cfg) {
  const double beta = (cfg.m - 1.0) / cfg.m;
  st.gbar = beta * st.gbar + (1.0 - beta) * g_k;  // accumulate before the cycle check
  if (k == 0 || k % cfg.m != 0) return mu;
  const VectorXd s = x_next - st.xbar_old;
  const VectorXd y = st.gbar - st.gbar_old;
  const auto raw = bb_raw(s, y);
  const double mu_hat = raw ? std::abs(*raw) / cfg.m : cfg.mu_max;
  st.mubar = cfg.eta * st.mubar + (1.0 - cfg.eta) * mu_hat;  // smoothed, unclamped
  st.xbar_old = x_next;
  st.gbar_old = st.gbar;
  st.gbar.setZero();
  return std::max(cfg.mu_min, std::min(st.mubar, cfg.mu_max));
}

void V3State::init(int n, const TripletConfig& cfg) {
  F.clear();
  x_avg = VectorXd::Zero(n);
  xbar_old = VectorXd::Zero(n);
  mubar = cfg.mu0;
}

double v3_update(V3State& st, long k, double mu, const VectorXd& x_k,
                 const VectorXd& g_k, const TripletConfig& cfg) {
  st.x_avg += x_k;
  st.F.push_back(g_k);
  if ((int)st.F.size() > cfg.m_F) st.F.pop_front();
  if (k % cfg.m != 0) return mu;
  const VectorXd xbar = st.x_avg / cfg.m;
  st.x_avg.setZero();
  double mu_next = mu;
  if (k > 0) {
    const VectorXd s = xbar - st.xbar_old;
    // y = (1/|F|) F F^T s realised column by column; F never materialises.
    VectorXd y = VectorXd::Zero(x_k.size());
    for (const VectorXd& f : st.F) y += f.dot(s) * f;
    y /= (double)st.F.size();
    const auto raw = bb_raw(s, y);
    const double mu_hat = raw ? std::abs(*raw) / cfg.m : cfg.mu_max;
    st.mubar = cfg.eta * st.mubar + (1.0 - cfg.eta) * mu_hat;
    mu_next = std::max(cfg.mu_min, std::min(st.mubar, cfg.mu_max));
  }
  st.xbar_old = xbar;  // reset at every cycle boundary, including k = 0
  return mu_next;
}

std::pair<VectorXd, double> sgdbb_step_and_update(V2State& st, long k,
                                                  double mu,
                                                  const VectorXd& x_k,
                                                  const VectorXd& g_k,
                                                  const TripletConfig& cfg) {
  VectorXd x_next = x_k - mu * g_k;
  const double mu_next = v2_update(st, k, mu, x_next, g_k, cfg);
  return {std::move(x_next), mu_next};
}

RunResult run(problem::GradOracle& oracle, Variant variant,
              const TripletConfig& cfg, const RunOptions& opt,
              const SnapshotFn& snapshot, const IterObserver& observer) {
  cfg.validate();
  const int n = oracle.dim();
  RunResult res;
  res.assumption4 = cfg.mu_min <= cfg.gamma2 * cfg.alpha;
  res.x = opt.x0.size() > 0 ? opt.x0 : VectorXd::Zero(n);
  if (res.x.size() != n)
    throw std::invalid_argument("run: x0 dimension does not match the oracle");

  double mu = cfg.mu0;
  V2State v2s;
  V3State v3s;
  if (variant == Variant::v2 || variant == Variant::sgdbb) v2s.init(res.x, cfg);
  if (variant == Variant::v3) v3s.init(n, cfg);

  VectorXd g(n);
  long k = 0;
  long evals = 0;
  long bb_steps = 0;
  int next_epoch = 1;

  auto fail = [&](const std::string& what) {
    res.failed = true;
    res.failure = what + " at iteration " + std::to_string(k);
  };

  while (true) {
    if (opt.max_iterations >= 0 && k >= opt.max_iterations) break;
    if (opt.budget_evals > 0 && evals >= opt.budget_evals) break;

    evals += oracle.eval(res.x, k, g);
    // The norm can overflow to inf even when every component is finite, so
    // guard it directly; downstream step rules reject non-finite norms.
    const double g_norm = g.norm();
    if (!g.allFinite() || !std::isfinite(g_norm)) {
      fail("non-finite gradient");
      break;
    }

    VectorXd x_next;
    double mu_next = mu;
    IterationLog entry{k, g_norm, mu, 0.0, 0, StepKind::unconstrained_bb};

    if (variant == Variant::sgdbb) {
      std::tie(x_next, mu_next) = sgdbb_step_and_update(v2s, k, mu, res.x, g, cfg);
      entry.delta = mu * entry.g_norm;  // the step is -mu g; no radius applies
    } else {
      StepOutcome so = variant == Variant::trish ? trish_step(g, cfg)
                                                 : tr_step(g, mu, cfg);
      x_next = res.x + so.p;
      entry.delta = so.delta;
      entry.radius_case = so.radius_case;
      entry.kind = so.kind;
      switch (variant) {
        case Variant::trish:
          break;  // fixed zero-curvature model; mu is never consulted
        case Variant::v1:
          mu_next = v1_update(k, mu, so.p, g, x_next, oracle, cfg, evals);
          break;
        case Variant::v2:
          mu_next = v2_update(v2s, k, mu, x_next, g, cfg);
          break;
        case Variant::v3:
          mu_next = v3_update(v3s, k, mu, res.x, g, cfg);
          break;
        default:
          break;
      }
    }

    if (!x_next.allFinite()) {
      fail("non-finite iterate");
      break;
    }

    if (entry.kind == StepKind::unconstrained_bb) ++bb_steps;
    res.log.push_back(entry);
    res.x = std::move(x_next);
    mu = mu_next;
    ++k;
    if (observer) observer(k - 1, res.x);

    while (opt.evals_per_epoch > 0 && next_epoch <= opt.max_epochs &&
           evals >= (long)next_epoch * opt.evals_per_epoch) {
      EpochSnapshot snap{next_epoch, k, evals,
                         k > 0 ? (double)bb_steps / (double)k : 0.0};
      if (snapshot) snapshot(snap, res.x);
      ++next_epoch;
    }
  }

  res.iterations = k;
  res.grad_evals = evals;
  res.unconstrained_steps = bb_steps;
  return res;
}

}  // namespace trishbb::opt
