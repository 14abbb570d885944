#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "trishbb/optimizer.hpp"
#include "trishbb/problem.hpp"

namespace trishbb::theory {

// Constants of the smoothness / gradient-quality assumptions under which the
// convergence guarantees are stated. For QuadraticProblem they are exact
// (L = lambda_max, c = lambda_min, f_star known); they are never estimated
// for real datasets.
struct AssumptionConstants {
  double L = 0.0;       // f(x) <= f(y) + grad f(y)^T (x-y) + (L/2) ||x-y||^2
  double c = 0.0;       // PL constant: 2c (f(x) - f_star) <= ||grad f(x)||^2
  double f_star = 0.0;  // lower bound of f
  double omega = 1.0;   // grad f^T E[g] >= omega ||grad f||^2
  double M1 = 0.0;      // E||g||^2 <= M1 + M2 ||grad f||^2
  double M2 = 1.0;
  double Mg = 0.0;      // unbiased variance bound (omega=1, M1=Mg, M2=1)

  static AssumptionConstants unbiased_quadratic(
      const problem::QuadraticProblem& q, double Mg);
};

struct BoundReport {
  double h1 = 0.0;      // (1/2) sqrt(M1)
  double h2 = 0.0;      // h1 + sqrt(M2)
  double rho = 0.0;     // mu_min / (alpha gamma2), in (0, 1]
  double theta1 = 0.0;  // (omega gamma1)/2 - h2 (gamma1 - rho gamma2)
  double theta2 = 0.0;  // h1 (gamma1 alpha - mu_min) + (1/2) gamma1^2 L M1 alpha^2
  double theta3 = 0.0;  // gamma1^2/gamma2 - gamma2/16
  bool theta1_positive = false;
  bool gamma_ratio_ok = false;  // gamma1/gamma2 < rho h2/(h2 - omega/2);
                                // vacuously true when h2 <= omega/2
};

// Throws std::invalid_argument naming the violated inequality when
// mu_min <= gamma2 * alpha fails (rho would leave (0, 1]).
BoundReport constants(const opt::TripletConfig& cfg,
                      const AssumptionConstants& A);

enum class Regime { biased_pl, biased_nonconvex, unbiased_pl, unbiased_nonconvex };

const char* to_string(Regime r);
std::optional<Regime> regime_from_string(const std::string& s);

struct AlphaAdmissibility {
  double alpha_bound = 0.0;    // upper bound on alpha
  bool alpha_strict = false;   // bound is strict (alpha < bound) vs alpha <= bound
  double mu_min_lower = 0.0;   // required lower bound on mu_min (0 when none)
  bool pass = false;           // cfg satisfies every condition of the regime
};

// Stepsize conditions per guarantee:
//   biased_pl          alpha <= min{omega/(gamma1 L M2), 1/(2 c theta1)}
//   biased_nonconvex   alpha <= omega/(gamma1 L M2)
//   unbiased_pl        alpha <  min{gamma2/(8 gamma1^2 L), 8/(gamma2 c)},
//                      mu_min >= 4 gamma1 alpha / 5
//   unbiased_nonconvex alpha <= gamma2/(8 gamma1^2 L),
//                      mu_min >= 4 gamma1 alpha / 5
// alpha must be strictly positive in every regime.
AlphaAdmissibility admissible_alpha(Regime regime,
                                    const opt::TripletConfig& cfg,
                                    const AssumptionConstants& A);

// Asymptotic constant of the corresponding guarantee:
//   biased_pl          theta2 / (2 c alpha theta1)   on E[f(x_K) - f_star]
//   biased_nonconvex   theta2 / (alpha theta1)       on mean squared gradient
//   unbiased_pl        8 theta3 Mg / (gamma2 c)
//   unbiased_nonconvex (16 gamma1^2/gamma2^2 - 1) Mg
// Throws std::domain_error when theta1 <= 0 in a biased regime.
double limit(Regime regime, const opt::TripletConfig& cfg,
             const AssumptionConstants& A, const BoundReport& report);

struct McCheck {
  double empirical = 0.0;   // mean statistic over runs
  double bound = 0.0;       // theoretical limit
  double std_error = 0.0;   // standard error of the mean (informational)
  double tolerance = 0.1;   // pass requires empirical <= bound * (1 + tolerance)
  int runs = 0;
  long iterations = 0;
  int failed_runs = 0;      // divergent runs; any failure fails the check
  bool pass = false;
};

struct McOptions {
  int runs = 200;
  long iterations = 2000;
  double tolerance = 0.1;
  std::uint64_t master_seed = 0;
  Eigen::VectorXd x0;  // empty = zero
  opt::Variant variant = opt::Variant::v1;
};

// Empirically validates a guarantee on a noisy quadratic: each seeded run
// executes `iterations` steps; PL regimes average the final optimality gap
// f(x_K) - f_star, nonconvex regimes average (1/K) sum_k ||grad f(x_k)||^2
// over the post-step iterates x_1..x_K (true gradients, not samples).
// Throws std::invalid_argument when admissible_alpha rejects the config.
McCheck monte_carlo_check(Regime regime, const problem::QuadraticProblem& q,
                          double sigma, const opt::TripletConfig& cfg,
                          const McOptions& options);

}  // namespace trishbb::theory
