#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trishbb/problem.hpp"

namespace trishbb::opt {

using Eigen::VectorXd;

// Hyperparameters shared by all variants.
struct TripletConfig {
  double alpha = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;  // 0 < gamma2 <= gamma1
  double mu_min = 1e-5;
  double mu_max = 1e5;  // 0 < mu_min < mu_max
  double mu0 = 1.0;
  int m = 20;        // cyclic steplength-update period
  double eta = 0.9;  // exponential smoothing of the v2/v3 steplength
  int m_F = 100;     // capacity of the v3 gradient FIFO
  int batch_size = 64;

  void validate() const;  // throws std::invalid_argument
};

enum class Variant { trish, v1, v2, v3, sgdbb };

const char* to_string(Variant v);
std::optional<Variant> variant_from_string(const std::string& s);

enum class StepKind { unconstrained_bb, constrained };

struct StepOutcome {
  VectorXd p;
  int radius_case = 1;  // which ||g|| interval set the radius (1, 2, or 3)
  StepKind kind = StepKind::constrained;
  double delta = 0.0;
};

// Radius as a piecewise function of ||g||: alpha*gamma1*||g|| on [0, 1/gamma1),
// alpha on [1/gamma1, 1/gamma2], alpha*gamma2*||g|| on (1/gamma2, inf).
// Interval boundaries follow that bracket pattern exactly; ||g|| = 0 is case 1.
std::pair<double, int> tr_radius(double g_norm, const TripletConfig& cfg);

// Closed-form solution of  min g^T p + ||p||^2 / (2 mu)  s.t. ||p|| <= Delta:
// p = -mu g when ||mu g|| < Delta (unconstrained), else -(Delta/||g||) g on
// the boundary. The tie ||mu g|| = Delta is classified constrained (both
// formulas coincide there). g = 0 returns p = 0, constrained, Delta = 0.
StepOutcome tr_step(const VectorXd& g, double mu, const TripletConfig& cfg);

// First-order baseline: the zero-curvature model always yields the
// constrained form -alpha*gamma1*g / -alpha*g/||g|| / -alpha*gamma2*g.
StepOutcome trish_step(const VectorXd& g, const TripletConfig& cfg);

// Raw steplength s^T s / s^T y; empty when s = 0 or s^T y = 0 (the value
// diverges in that limit -- an in-band signal, not an error).
std::optional<double> bb_raw(const VectorXd& s, const VectorXd& y);

// max{mu_min, min{|raw|, mu_max}}; an undefined raw clamps to mu_max,
// the limit of |s^T s / s^T y| as s^T y -> 0.
double clamp_mu(std::optional<double> raw, const TripletConfig& cfg);

// --- steplength state machines -------------------------------------------
//
// Each update consumes iteration k's quantities after the step was taken and
// returns mu_{k+1}. Off-cycle iterations carry mu unchanged.

// v1: single-iteration correction pair on the *same* batch, refreshed every
// m iterations starting at k = 0. The extra gradient evaluation is billed to
// eval_cost.
double v1_update(long k, double mu, const VectorXd& p_k, const VectorXd& g_k,
                 const VectorXd& x_next, problem::GradOracle& oracle,
                 const TripletConfig& cfg, long& eval_cost);

// v2: correction pair accumulated over an m-iteration cycle; beta = (m-1)/m
// is derived from m, never configured.
struct V2State {
  VectorXd gbar, gbar_old, xbar_old;
  double mubar = 0.0;

  void init(const VectorXd& x0, const TripletConfig& cfg);
};

double v2_update(V2State& st, long k, double mu, const VectorXd& x_next,
                 const VectorXd& g_k, const TripletConfig& cfg);

// v3: curvature through the accumulated gradient outer products (FIFO of the
// last m_F stochastic gradients) against averaged-iterate differences.
struct V3State {
  std::deque<VectorXd> F;  // most recent min(k+1, m_F) gradients, oldest first
  VectorXd x_avg, xbar_old;
  double mubar = 0.0;

  void init(int n, const TripletConfig& cfg);
};

double v3_update(V3State& st, long k, double mu, const VectorXd& x_k,
                 const VectorXd& g_k, const TripletConfig& cfg);

// Plain BB-steplength descent x_{k+1} = x_k - mu_k g_k with the v2 steplength
// machinery (its own state and thresholds; no trust region).
std::pair<VectorXd, double> sgdbb_step_and_update(V2State& st, long k,
                                                  double mu,
                                                  const VectorXd& x_k,
                                                  const VectorXd& g_k,
                                                  const TripletConfig& cfg);

// --- run loop --------------------------------------------------------------

// Scalars only; one entry per iteration. radius_case 0 marks steps outside
// the trust-region taxonomy (sgdbb).
struct IterationLog {
  long k;
  double g_norm;
  double mu;
  double delta;
  int radius_case;
  StepKind kind;
};

struct RunOptions {
  VectorXd x0;              // empty = zero vector
  long budget_evals = 0;    // stop once single-gradient evals reach this (<=0: off)
  long evals_per_epoch = 0; // snapshot cadence in evals (<=0: no snapshots)
  int max_epochs = 0;       // cap on snapshots taken
  long max_iterations = -1; // hard iteration cap (<0: off)
};

struct EpochSnapshot {
  int epoch;        // 1-based
  long iterations;  // completed so far
  long grad_evals;  // cumulative single-gradient evaluations
  double frac_bb;   // cumulative fraction of unconstrained-BB steps
};

using SnapshotFn = std::function<void(const EpochSnapshot&, const VectorXd&)>;
using IterObserver = std::function<void(long k, const VectorXd& x_next)>;

struct RunResult {
  VectorXd x;
  std::vector<IterationLog> log;
  long iterations = 0;
  long grad_evals = 0;
  long unconstrained_steps = 0;
  bool failed = false;      // non-finite gradient or iterate
  std::string failure;      // diagnostic when failed
  bool assumption4 = false; // mu_min <= gamma2 * alpha held for this config
};

// Executes sample -> g_k -> step -> x_{k+1} -> steplength update until the
// evaluation budget or iteration cap is hit. An epoch is a budget of
// evals_per_epoch single-gradient evaluations; the snapshot fires at the
// first iteration whose cumulative count crosses the boundary. v1's second
// gradient evaluation counts toward the budget, so it performs fewer
// iterations per epoch than the other variants.
RunResult run(problem::GradOracle& oracle, Variant variant,
              const TripletConfig& cfg, const RunOptions& opt,
              const SnapshotFn& snapshot = {},
              const IterObserver& observer = {});

}  // namespace trishbb::opt
