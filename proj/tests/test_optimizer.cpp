#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "trishbb/optimizer.hpp"
#include "trishbb/problem.hpp"

using namespace trishbb;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

opt::TripletConfig base_cfg() {
  opt::TripletConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma1 = 2.0;
  cfg.gamma2 = 0.5;
  cfg.mu_min = 1e-5;
  cfg.mu_max = 1e5;
  cfg.mu0 = 1.0;
  return cfg;
}

data::SparseExample ex(int label, std::vector<std::pair<int, double>> fs) {
  data::SparseExample e;
  e.label = label;
  e.features = std::move(fs);
  return e;
}

std::vector<data::SparseExample> toy_split(int n) {
  std::vector<data::SparseExample> split;
  for (int i = 0; i < n; ++i)
    split.push_back(ex(i % 2 == 0 ? 1 : -1,
                       {{i % 2, 0.5 + 0.1 * (i % 7)}}));
  return split;
}

}  // namespace

TEST_CASE("config validation rejects each broken field") {
  CHECK_NOTHROW(base_cfg().validate());
  auto bad = base_cfg();
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = base_cfg();
  bad.gamma2 = 3.0;  // gamma2 > gamma1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = base_cfg();
  bad.mu_min = bad.mu_max;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = base_cfg();
  bad.mu0 = 1e6;  // outside [mu_min, mu_max]
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = base_cfg();
  bad.eta = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("radius rule: piecewise in the gradient norm with exact boundaries") {
  const auto cfg = base_cfg();  // 1/gamma1 = 0.5, 1/gamma2 = 2
  CHECK(opt::tr_radius(0.25, cfg) == std::pair<double, int>{0.5, 1});
  CHECK(opt::tr_radius(1.0, cfg) == std::pair<double, int>{1.0, 2});
  CHECK(opt::tr_radius(0.0, cfg) == std::pair<double, int>{0.0, 1});
  // both interval edges belong to case 2
  CHECK(opt::tr_radius(0.5, cfg).second == 2);
  CHECK(opt::tr_radius(2.0, cfg).second == 2);
  CHECK(opt::tr_radius(std::nextafter(2.0, 3.0), cfg).second == 3);
  CHECK(opt::tr_radius(4.0, cfg) == std::pair<double, int>{2.0, 3});
}

TEST_CASE("tr_step takes -mu g inside the radius, the boundary step outside") {
  const auto cfg = base_cfg();
  const VectorXd g = vec2(3.0, 4.0);  // norm 5 -> case 3, delta = 2.5

  auto inside = opt::tr_step(g, 0.01, cfg);
  CHECK(inside.radius_case == 3);
  CHECK(inside.delta == doctest::Approx(2.5));
  CHECK(inside.kind == opt::StepKind::unconstrained_bb);
  CHECK(inside.p(0) == doctest::Approx(-0.03));
  CHECK(inside.p(1) == doctest::Approx(-0.04));

  auto outside = opt::tr_step(g, 1.0, cfg);
  CHECK(outside.kind == opt::StepKind::constrained);
  CHECK(outside.p(0) == doctest::Approx(-1.5));
  CHECK(outside.p(1) == doctest::Approx(-2.0));
  CHECK(outside.p.norm() == doctest::Approx(outside.delta));

  // the tie ||mu g|| = delta is constrained; both formulas coincide there
  auto tie = opt::tr_step(g, 0.5, cfg);
  CHECK(tie.kind == opt::StepKind::constrained);
  CHECK((tie.p - (-0.5 * g)).norm() == doctest::Approx(0.0));

  auto zero = opt::tr_step(VectorXd::Zero(2), 1.0, cfg);
  CHECK(zero.p.norm() == 0.0);
  CHECK(zero.kind == opt::StepKind::constrained);
  CHECK(zero.delta == 0.0);

  VectorXd nan_g = vec2(std::nan(""), 0.0);
  CHECK_THROWS_AS(opt::tr_step(nan_g, 1.0, cfg), std::invalid_argument);
}

TEST_CASE("raw BB value and its degenerate signals") {
  CHECK(*opt::bb_raw(vec2(1.0, 0.0), vec2(2.0, 0.0)) == doctest::Approx(0.5));
  CHECK(*opt::bb_raw(vec2(3.0, -1.0), vec2(3.0, -1.0)) == doctest::Approx(1.0));
  // s=(1,1), y = diag(1,10) s: Rayleigh reciprocal inside [1/10, 1]
  const double r = *opt::bb_raw(vec2(1.0, 1.0), vec2(1.0, 10.0));
  CHECK(r == doctest::Approx(2.0 / 11.0));
  CHECK(r >= 0.1);
  CHECK(r <= 1.0);
  CHECK(!opt::bb_raw(VectorXd::Zero(2), vec2(1.0, 1.0)).has_value());
  CHECK(!opt::bb_raw(vec2(1.0, 0.0), vec2(0.0, 5.0)).has_value());
}

TEST_CASE("clamp_mu folds the absolute value into [mu_min, mu_max]") {
  const auto cfg = base_cfg();
  CHECK(opt::clamp_mu(1e7, cfg) == 1e5);
  CHECK(opt::clamp_mu(-0.3, cfg) == doctest::Approx(0.3));
  CHECK(opt::clamp_mu(1e-9, cfg) == 1e-5);
  CHECK(opt::clamp_mu(std::nullopt, cfg) == 1e5);
}

TEST_CASE("v1 refreshes on cycle starts, including the very first iteration") {
  problem::QuadraticProblem q(vec2(2.0, 2.0));  // A = 2I
  problem::NoisyGradientOracle oracle(q, 0.0, 1);
  auto cfg = base_cfg();
  cfg.m = 20;

  const VectorXd x0 = vec2(1.0, -1.0);
  VectorXd g(2);
  oracle.eval(x0, 0, g);
  const auto step = opt::tr_step(g, cfg.mu0, cfg);
  const VectorXd x1 = x0 + step.p;

  long cost = 0;
  // k=0 fires (0 mod m = 0): y = A p exactly, so mu = 1/2
  const double mu1 =
      opt::v1_update(0, cfg.mu0, step.p, g, x1, oracle, cfg, cost);
  CHECK(mu1 == doctest::Approx(0.5));
  CHECK(cost == 1);  // the second evaluation is billed

  // off-cycle iterations carry mu
  cost = 0;
  const double mu2 = opt::v1_update(1, mu1, step.p, g, x1, oracle, cfg, cost);
  CHECK(mu2 == mu1);
  CHECK(cost == 0);
}

TEST_CASE("v2 accumulates the moving average and fires only at k>0 cycles") {
  auto cfg = base_cfg();
  cfg.m = 4;  // beta = 0.75

  opt::V2State st;
  st.init(VectorXd::Zero(2), cfg);
  // one averaging step from zero: gbar = (1 - beta) g
  const double mu_after =
      opt::v2_update(st, 0, cfg.mu0, vec2(0.1, 0.1), vec2(4.0, 0.0), cfg);
  CHECK(st.gbar(0) == doctest::Approx(1.0));
  CHECK(st.gbar(1) == doctest::Approx(0.0));
  // k=0 never updates mu even though 0 mod m = 0
  CHECK(mu_after == cfg.mu0);
}

TEST_CASE("v2 cycle: exponential average of the scaled BB value") {
  auto cfg = base_cfg();
  cfg.m = 1;  // beta = 0: gbar tracks g_k exactly
  cfg.eta = 0.9;
  cfg.mu0 = 1.0;

  opt::V2State st;
  st.init(VectorXd::Zero(2), cfg);
  // k=0: accumulate only
  opt::v2_update(st, 0, cfg.mu0, vec2(0.5, 0.0), vec2(1.0, 0.0), cfg);
  // k=1 fires: s = x_2 - xbar_old = (1,0), y = gbar - gbar_old = (2,0)
  // mu_hat = |s's / s'y| / m = 0.5; mubar = 0.9*1 + 0.1*0.5 = 0.95
  const double mu = opt::v2_update(st, 1, cfg.mu0, vec2(1.0, 0.0),
                                   vec2(2.0, 0.0), cfg);
  CHECK(mu == doctest::Approx(0.95));
  CHECK(st.mubar == doctest::Approx(0.95));
  CHECK(st.xbar_old(0) == doctest::Approx(1.0));  // anchors move after firing
  CHECK(st.gbar.norm() == 0.0);                   // and the average resets
  CHECK(st.gbar_old(0) == doctest::Approx(2.0));
}

TEST_CASE("v2 moving average over a full cycle reaches (1 - beta^m) g") {
  auto cfg = base_cfg();
  cfg.m = 4;
  const VectorXd g = vec2(2.0, -6.0);
  opt::V2State st;
  st.init(VectorXd::Zero(2), cfg);
  double mu = cfg.mu0;
  for (long k = 5; k <= 8; ++k)  // four averaging steps; k=8 fires
    mu = opt::v2_update(st, k, mu, vec2(1.0, 1.0), g, cfg);
  const double scale = 1.0 - std::pow(0.75, 4);
  CHECK(st.gbar_old(0) == doctest::Approx(scale * g(0)));
  CHECK(st.gbar_old(1) == doctest::Approx(scale * g(1)));
  CHECK(st.gbar.norm() == 0.0);
}

TEST_CASE("v2 degenerate pair feeds mu_max into the exponential average") {
  auto cfg = base_cfg();
  cfg.m = 1;
  cfg.eta = 0.5;
  cfg.mu0 = 1.0;
  opt::V2State st;
  st.init(VectorXd::Zero(2), cfg);
  opt::v2_update(st, 0, cfg.mu0, vec2(1.0, 0.0), vec2(0.0, 0.0), cfg);
  // s = (1,0) but y stays 0 -> undefined BB -> mu_hat = mu_max
  const double mu = opt::v2_update(st, 1, cfg.mu0, vec2(1.0, 0.0),
                                   vec2(0.0, 0.0), cfg);
  CHECK(st.mubar == doctest::Approx(0.5 * 1.0 + 0.5 * cfg.mu_max));
  // The average sits inside [mu_min, mu_max], so clamping returns it as-is.
  CHECK(mu == doctest::Approx(st.mubar));
}

TEST_CASE("v3 rank-one curvature reproduces the hand algebra") {
  auto cfg = base_cfg();
  cfg.m = 1;
  cfg.m_F = 1;
  cfg.eta = 0.0;  // mubar = mu_hat directly
  cfg.mu0 = 1.0;

  opt::V3State st;
  st.init(2, cfg);
  // k=0: accumulate x_avg and F, set xbar_old = x_0, no mu change
  const double mu0 = opt::v3_update(st, 0, cfg.mu0, VectorXd::Zero(2),
                                    vec2(5.0, 5.0), cfg);
  CHECK(mu0 == cfg.mu0);
  CHECK(st.xbar_old.norm() == 0.0);
  // k=1: F = [(1,0)] after eviction; xbar = x_1 = (2,0); s = (2,0)
  // y = f (f's)/1 = (2,0); mu_hat = |4/4| / m = 1
  const double mu1 =
      opt::v3_update(st, 1, cfg.mu0, vec2(2.0, 0.0), vec2(1.0, 0.0), cfg);
  CHECK(mu1 == doctest::Approx(1.0));
  CHECK(st.F.size() == 1);
}

TEST_CASE("v3 FIFO keeps the most recent m_F gradients") {
  auto cfg = base_cfg();
  cfg.m = 1000;  // never fires in this test
  cfg.m_F = 3;
  opt::V3State st;
  st.init(2, cfg);
  for (long k = 1; k <= 4; ++k)
    opt::v3_update(st, k, cfg.mu0, VectorXd::Zero(2), vec2((double)k, 0.0),
                   cfg);
  REQUIRE(st.F.size() == 3);
  CHECK(st.F.front()(0) == doctest::Approx(2.0));  // oldest (k=1) evicted
  CHECK(st.F.back()(0) == doctest::Approx(4.0));
}

TEST_CASE("v3 with s orthogonal to every stored gradient takes the mu_max path") {
  auto cfg = base_cfg();
  cfg.m = 1;
  cfg.m_F = 1;
  cfg.eta = 0.0;
  cfg.mu0 = 1.0;
  opt::V3State st;
  st.init(2, cfg);
  opt::v3_update(st, 0, cfg.mu0, VectorXd::Zero(2), vec2(1.0, 0.0), cfg);
  // xbar = x_1 = (2,0) so s = (2,0); stored gradient (0,3) is orthogonal
  const double mu =
      opt::v3_update(st, 1, cfg.mu0, vec2(2.0, 0.0), vec2(0.0, 3.0), cfg);
  CHECK(mu == cfg.mu_max);
}

TEST_CASE("trish step is always the constrained form") {
  auto cfg = base_cfg();
  // case 2: norm exactly alpha
  const auto mid = opt::trish_step(vec2(0.6, 0.8), cfg);  // norm 1 in [0.5, 2]
  CHECK(mid.radius_case == 2);
  CHECK(mid.p.norm() == doctest::Approx(cfg.alpha));
  CHECK(mid.kind == opt::StepKind::constrained);
  // case 1: p = -alpha gamma1 g, so its norm equals the radius alpha gamma1 |g|
  const auto low = opt::trish_step(vec2(0.15, 0.2), cfg);  // norm 0.25
  CHECK(low.radius_case == 1);
  CHECK((low.p - (-2.0 * vec2(0.15, 0.2))).norm() == doctest::Approx(0.0));
  CHECK(low.p.norm() == doctest::Approx(0.5));
  // matches tr_step whenever the latter is constrained
  const VectorXd g = vec2(3.0, 4.0);
  const auto constrained = opt::tr_step(g, 1.0, cfg);
  const auto baseline = opt::trish_step(g, cfg);
  REQUIRE(constrained.kind == opt::StepKind::constrained);
  CHECK((constrained.p - baseline.p).norm() == doctest::Approx(0.0));
  CHECK(opt::trish_step(VectorXd::Zero(2), cfg).p.norm() == 0.0);
}

TEST_CASE("sgdbb steps along -mu g and clamps the update to its box") {
  opt::TripletConfig cfg;
  cfg.alpha = cfg.gamma1 = cfg.gamma2 = 1.0;  // unused placeholders
  cfg.mu0 = 1e-2;
  cfg.mu_min = 1e-5;
  cfg.mu_max = 1e-1;
  cfg.m = 1;
  cfg.eta = 0.0;

  opt::V2State st;
  st.init(VectorXd::Zero(2), cfg);
  const VectorXd g0 = vec2(1.0, -2.0);
  auto [x1, mu1] = opt::sgdbb_step_and_update(st, 0, cfg.mu0, VectorXd::Zero(2), g0, cfg);
  CHECK((x1 - (-cfg.mu0 * g0)).norm() == doctest::Approx(0.0));
  CHECK(mu1 == cfg.mu0);  // k=0 never updates

  // a nearly-flat pair (tiny s'y) sends the raw BB value sky-high; the
  // steplength must come back clamped to mu_max = 1e-1
  const VectorXd g1 = vec2(1e-9, 0.0);
  auto [x2, mu2] = opt::sgdbb_step_and_update(st, 1, mu1, x1, g1, cfg);
  CHECK((x2 - (x1 - mu1 * g1)).norm() == doctest::Approx(0.0));
  CHECK(mu2 == doctest::Approx(1e-1));
}

TEST_CASE("sgdbb reuses the v2 machinery bit for bit") {
  opt::TripletConfig cfg;
  cfg.alpha = cfg.gamma1 = cfg.gamma2 = 1.0;
  cfg.mu0 = 1e-2;
  cfg.mu_min = 1e-5;
  cfg.mu_max = 1e-1;
  cfg.m = 3;

  opt::V2State a, b;
  a.init(VectorXd::Zero(2), cfg);
  b.init(VectorXd::Zero(2), cfg);
  VectorXd xa = VectorXd::Zero(2);
  double mu_a = cfg.mu0, mu_b = cfg.mu0;
  for (long k = 0; k < 10; ++k) {
    const VectorXd g = vec2(std::sin(1.0 + (double)k), std::cos(0.5 * k));
    auto [x_next, mu_next] = opt::sgdbb_step_and_update(a, k, mu_a, xa, g, cfg);
    mu_b = opt::v2_update(b, k, mu_b, x_next, g, cfg);
    CHECK(mu_next == mu_b);
    xa = x_next;
    mu_a = mu_next;
  }
  CHECK((a.gbar - b.gbar).norm() == 0.0);
  CHECK(a.mubar == b.mubar);
}

TEST_CASE("run is deterministic given the seed") {
  problem::QuadraticProblem q(vec2(1.0, 3.0));
  auto cfg = base_cfg();
  cfg.m = 5;
  opt::RunOptions ro;
  ro.x0 = vec2(2.0, -1.0);
  ro.max_iterations = 50;

  auto once = [&] {
    problem::NoisyGradientOracle oracle(q, 0.2, 31);
    return opt::run(oracle, opt::Variant::v1, cfg, ro);
  };
  const auto r1 = once(), r2 = once();
  CHECK(!r1.failed);
  REQUIRE(r1.log.size() == 50);
  REQUIRE(r2.log.size() == 50);
  CHECK((r1.x - r2.x).norm() == 0.0);
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].g_norm == r2.log[i].g_norm);
    CHECK(r1.log[i].mu == r2.log[i].mu);
    CHECK(r1.log[i].delta == r2.log[i].delta);
    CHECK(r1.log[i].radius_case == r2.log[i].radius_case);
    CHECK(r1.log[i].kind == r2.log[i].kind);
  }
}

TEST_CASE("trish runs log constrained steps only and never touch mu") {
  problem::QuadraticProblem q(vec2(1.0, 3.0));
  problem::NoisyGradientOracle oracle(q, 0.1, 7);
  auto cfg = base_cfg();
  opt::RunOptions ro;
  ro.x0 = vec2(1.0, 1.0);
  ro.max_iterations = 40;
  const auto res = opt::run(oracle, opt::Variant::trish, cfg, ro);
  CHECK(!res.failed);
  CHECK(res.unconstrained_steps == 0);
  for (const auto& entry : res.log) {
    CHECK(entry.kind == opt::StepKind::constrained);
    CHECK(entry.mu == cfg.mu0);
  }
}

TEST_CASE("noise-free quadratic with mu_max <= 1/L descends strictly") {
  problem::QuadraticProblem q(vec2(1.0, 2.0));  // L = 2
  problem::NoisyGradientOracle oracle(q, 0.0, 5);
  opt::TripletConfig cfg;
  cfg.alpha = 10.0;
  cfg.gamma1 = cfg.gamma2 = 1e4;  // radius so large every step fits inside
  cfg.mu_min = 1e-3;
  cfg.mu_max = 0.5;  // = 1/L
  cfg.mu0 = 0.5;
  cfg.m = 5;

  opt::RunOptions ro;
  ro.x0 = vec2(3.0, -2.0);
  ro.max_iterations = 200;
  double prev_f = q.f(ro.x0);
  bool monotone = true;
  const auto res = opt::run(oracle, opt::Variant::v1, cfg, ro, {},
                            [&](long, const VectorXd& x) {
                              const double f = q.f(x);
                              monotone = monotone && f < prev_f;
                              prev_f = f;
                            });
  CHECK(!res.failed);
  CHECK(monotone);
  CHECK(res.unconstrained_steps == res.iterations);
  CHECK(q.f(res.x) <= 1e-10);
}

TEST_CASE("epoch budget counts v1's second evaluation") {
  const auto split = toy_split(12);
  auto cfg = base_cfg();
  cfg.batch_size = 4;
  cfg.m = 2;
  opt::RunOptions ro;
  ro.budget_evals = 24;  // two epochs of N = 12
  ro.evals_per_epoch = 12;
  ro.max_epochs = 2;

  std::vector<long> snap_iters;
  auto snapshot = [&](const opt::EpochSnapshot& s, const VectorXd&) {
    snap_iters.push_back(s.iterations);
  };

  problem::LogisticOracle o1(split, 2, problem::BatchStrategy::independent, 4,
                             17);
  const auto r1 = opt::run(o1, opt::Variant::v1, cfg, ro, snapshot);
  CHECK(r1.iterations == 4);  // 8 + 4 + 8 + 4 evaluations = 24
  CHECK(r1.grad_evals == 24);
  REQUIRE(snap_iters.size() == 2);
  CHECK(snap_iters[0] == 2);
  CHECK(snap_iters[1] == 4);

  snap_iters.clear();
  problem::LogisticOracle o2(split, 2, problem::BatchStrategy::shuffled_epoch,
                             4, 17);
  const auto r2 = opt::run(o2, opt::Variant::v2, cfg, ro, snapshot);
  CHECK(r2.iterations == 6);  // no extra evaluations
  CHECK(r2.grad_evals == 24);
  REQUIRE(snap_iters.size() == 2);
  CHECK(snap_iters[1] == 6);
  CHECK(r1.log.size() == (size_t)r1.iterations);
}

TEST_CASE("divergence is recorded, not thrown") {
  problem::QuadraticProblem q(vec2(4.0, 4.0));
  problem::NoisyGradientOracle oracle(q, 0.0, 3);
  opt::TripletConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma1 = cfg.gamma2 = 1.0;  // trish case 3 steps by -g: x doubles+
  cfg.mu_min = 1e-5;
  cfg.mu_max = 1e5;
  cfg.mu0 = 1.0;
  opt::RunOptions ro;
  ro.x0 = vec2(10.0, 10.0);
  ro.max_iterations = 10000;
  const auto res = opt::run(oracle, opt::Variant::trish, cfg, ro);
  CHECK(res.failed);
  CHECK(!res.failure.empty());
  CHECK(res.iterations < 10000);
}

TEST_CASE("the Assumption-4 flag mirrors mu_min <= gamma2 alpha") {
  problem::QuadraticProblem q(vec2(1.0, 2.0));
  opt::RunOptions ro;
  ro.max_iterations = 1;

  auto cfg = base_cfg();  // mu_min = 1e-5 <= gamma2 alpha = 0.5
  problem::NoisyGradientOracle o1(q, 0.0, 1);
  CHECK(opt::run(o1, opt::Variant::v2, cfg, ro).assumption4);

  cfg.mu_min = 0.6;
  cfg.mu0 = 1.0;
  problem::NoisyGradientOracle o2(q, 0.0, 1);
  CHECK(!opt::run(o2, opt::Variant::v2, cfg, ro).assumption4);
}

TEST_CASE("run rejects an x0 of the wrong dimension") {
  problem::QuadraticProblem q(vec2(1.0, 2.0));
  problem::NoisyGradientOracle oracle(q, 0.0, 1);
  opt::RunOptions ro;
  ro.x0 = VectorXd::Zero(3);
  ro.max_iterations = 1;
  CHECK_THROWS_AS(opt::run(oracle, opt::Variant::v1, base_cfg(), ro),
                  std::invalid_argument);
}

TEST_CASE("variant names round-trip") {
  for (const auto v : {opt::Variant::trish, opt::Variant::v1, opt::Variant::v2,
                       opt::Variant::v3, opt::Variant::sgdbb}) {
    const auto parsed = opt::variant_from_string(opt::to_string(v));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == v);
  }
  CHECK(!opt::variant_from_string("v4").has_value());
}
