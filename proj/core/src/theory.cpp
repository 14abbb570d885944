#include "trishbb/theory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "trishbb/rng.hpp"

namespace trishbb::theory {

AssumptionConstants AssumptionConstants::unbiased_quadratic(
    const problem::QuadraticProblem& q, double Mg) {
  AssumptionConstants A;
  A.L = q.L();
  A.c = q.c();
  A.f_star = q.f_star();
  A.omega = 1.0;
  A.M1 = Mg;
  A.M2 = 1.0;
  A.Mg = Mg;
  return A;
}

BoundReport constants(const opt::TripletConfig& cfg,
                      const AssumptionConstants& A) {
  cfg.validate();
  if (!(cfg.mu_min <= cfg.gamma2 * cfg.alpha)) {
    std::ostringstream os;
    os << "constants: mu_min <= gamma2 * alpha violated (" << cfg.mu_min
       << " > " << cfg.gamma2 * cfg.alpha << ")";
    throw std::invalid_argument(os.str());
  }
  BoundReport r;
  r.h1 = 0.5 * std::sqrt(A.M1);
  r.h2 = r.h1 + std::sqrt(A.M2);
  r.rho = cfg.mu_min / (cfg.alpha * cfg.gamma2);
  r.theta1 = 0.5 * A.omega * cfg.gamma1 -
             r.h2 * (cfg.gamma1 - r.rho * cfg.gamma2);
  r.theta2 = r.h1 * (cfg.gamma1 * cfg.alpha - cfg.mu_min) +
             0.5 * cfg.gamma1 * cfg.gamma1 * A.L * A.M1 * cfg.alpha * cfg.alpha;
  r.theta3 = cfg.gamma1 * cfg.gamma1 / cfg.gamma2 - cfg.gamma2 / 16.0;
  r.theta1_positive = r.theta1 > 0.0;
  const double slack = r.h2 - 0.5 * A.omega;
  r.gamma_ratio_ok =
      slack <= 0.0 || cfg.gamma1 / cfg.gamma2 < r.rho * r.h2 / slack;
  return r;
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::biased_pl: return "biased-pl";
    case Regime::biased_nonconvex: return "biased-nonconvex";
    case Regime::unbiased_pl: return "unbiased-pl";
    case Regime::unbiased_nonconvex: return "unbiased-nonconvex";
  }
  return "?";
}

std::optional<Regime> regime_from_string(const std::string& s) {
  if (s == "biased-pl") return Regime::biased_pl;
  if (s == "biased-nonconvex") return Regime::biased_nonconvex;
  if (s == "unbiased-pl") return Regime::unbiased_pl;
  if (s == "unbiased-nonconvex") return Regime::unbiased_nonconvex;
  return std::nullopt;
}

AlphaAdmissibility admissible_alpha(Regime regime,
                                    const opt::TripletConfig& cfg,
                                    const AssumptionConstants& A) {
  AlphaAdmissibility out;
  const double g1 = cfg.gamma1, g2 = cfg.gamma2;
  switch (regime) {
    case Regime::biased_pl: {
      const BoundReport r = constants(cfg, A);
      out.alpha_bound = A.omega / (g1 * A.L * A.M2);
      if (r.theta1 > 0.0)
        out.alpha_bound =
            std::min(out.alpha_bound, 1.0 / (2.0 * A.c * r.theta1));
      break;
    }
    case Regime::biased_nonconvex:
      out.alpha_bound = A.omega / (g1 * A.L * A.M2);
      break;
    case Regime::unbiased_pl:
      out.alpha_bound =
          std::min(g2 / (8.0 * g1 * g1 * A.L), 8.0 / (g2 * A.c));
      out.alpha_strict = true;
      out.mu_min_lower = 4.0 * g1 * cfg.alpha / 5.0;
      break;
    case Regime::unbiased_nonconvex:
      out.alpha_bound = g2 / (8.0 * g1 * g1 * A.L);
      out.mu_min_lower = 4.0 * g1 * cfg.alpha / 5.0;
      break;
  }
  const bool alpha_ok =
      cfg.alpha > 0.0 && (out.alpha_strict ? cfg.alpha < out.alpha_bound
                                           : cfg.alpha <= out.alpha_bound);
  const bool mu_ok = cfg.mu_min >= out.mu_min_lower;
  out.pass = alpha_ok && mu_ok;
  return out;
}

double limit(Regime regime, const opt::TripletConfig& cfg,
             const AssumptionConstants& A, const BoundReport& report) {
  switch (regime) {
    case Regime::biased_pl:
      if (report.theta1 <= 0.0)
        throw std::domain_error("limit: theta1 <= 0, gap limit undefined");
      return report.theta2 / (2.0 * A.c * cfg.alpha * report.theta1);
    case Regime::biased_nonconvex:
      if (report.theta1 <= 0.0)
        throw std::domain_error("limit: theta1 <= 0, gradient limit undefined");
      return report.theta2 / (cfg.alpha * report.theta1);
    case Regime::unbiased_pl:
      return 8.0 * report.theta3 * A.Mg / (cfg.gamma2 * A.c);
    case Regime::unbiased_nonconvex:
      return (16.0 * cfg.gamma1 * cfg.gamma1 / (cfg.gamma2 * cfg.gamma2) -
              1.0) *
             A.Mg;
  }
  throw std::logic_error("limit: unknown regime");
}

McCheck monte_carlo_check(Regime regime, const problem::QuadraticProblem& q,
                          double sigma, const opt::TripletConfig& cfg,
                          const McOptions& options) {
  if (options.runs < 1 || options.iterations < 1)
    throw std::invalid_argument("monte_carlo_check: need runs, iterations >= 1");
  const double Mg = sigma * sigma * q.n();
  const AssumptionConstants A = AssumptionConstants::unbiased_quadratic(q, Mg);
  const AlphaAdmissibility adm = admissible_alpha(regime, cfg, A);
  if (!adm.pass)
    throw std::invalid_argument(
        "monte_carlo_check: config is not admissible for this guarantee");
  const BoundReport report = constants(cfg, A);

  const bool pl =
      regime == Regime::biased_pl || regime == Regime::unbiased_pl;

  McCheck check;
  check.bound = limit(regime, cfg, A, report);
  check.tolerance = options.tolerance;
  check.runs = options.runs;
  check.iterations = options.iterations;

  double sum = 0.0, sum_sq = 0.0;
  Eigen::VectorXd grad(q.n());
  for (int r = 0; r < options.runs; ++r) {
    problem::NoisyGradientOracle oracle(
        q, sigma, rng::derive_seed(options.master_seed, r));
    opt::RunOptions ro;
    ro.x0 = options.x0;
    ro.max_iterations = options.iterations;

    double grad_sq_sum = 0.0;
    opt::IterObserver observer;
    if (!pl) {
      observer = [&](long, const Eigen::VectorXd& x_next) {
        q.grad(x_next, grad);
        grad_sq_sum += grad.squaredNorm();
      };
    }
    const opt::RunResult res =
        opt::run(oracle, options.variant, cfg, ro, {}, observer);
    if (res.failed || !std::isfinite(q.f(res.x))) {
      ++check.failed_runs;
      continue;
    }
    const double stat = pl ? q.f(res.x) - q.f_star()
                           : grad_sq_sum / (double)res.iterations;
    sum += stat;
    sum_sq += stat * stat;
  }

  const int ok = options.runs - check.failed_runs;
  if (ok > 0) {
    check.empirical = sum / ok;
    if (ok > 1) {
      const double var =
          std::max(0.0, (sum_sq - sum * sum / ok) / (ok - 1.0));
      check.std_error = std::sqrt(var / ok);
    }
  }
  check.pass = check.failed_runs == 0 &&
               check.empirical <= check.bound * (1.0 + check.tolerance);
  return check;
}

}  // namespace trishbb::theory
