#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "trishbb/data.hpp"
#include "trishbb/rng.hpp"

namespace trishbb::problem {

using Eigen::VectorXd;
using Batch = std::vector<int>;  // distinct indices into a split, nonempty

// log(1 + e^z) without overflow. Beyond |z| = 35 the neglected term is below
// double precision, so each branch is exact to machine accuracy and the
// function stays monotone across the seams.
inline double stable_log1pexp(double z) {
  if (z > 35.0) return z + std::exp(-z);
  if (z < -35.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

// Logistic sigmoid evaluated overflow-free on either sign.
inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Mean over the batch of log(1 + exp(-b_i x^T a_i)). Throws on empty batch.
double logistic_loss(const VectorXd& x, const Batch& batch,
                     const std::vector<data::SparseExample>& split);

// Mean over the batch of -b_i sigma(-b_i x^T a_i) a_i, accumulated sparsely.
void logistic_grad(const VectorXd& x, const Batch& batch,
                   const std::vector<data::SparseExample>& split,
                   VectorXd& out);

// Fraction of the split with sign(x^T a_i) == b_i; a zero score predicts +1
// so runs started from x = 0 are scored deterministically.
double accuracy(const VectorXd& x, const std::vector<data::SparseExample>& split);

// Whole-split loss via an index-free pass (equals logistic_loss over the full
// index set).
double logistic_loss_full(const VectorXd& x,
                          const std::vector<data::SparseExample>& split);

// f(x) = 1/2 x^T A x - b^T x with A = diag(d) positive definite. Strongly
// convex, hence PL with c = min eigenvalue; L = max eigenvalue.
struct QuadraticProblem {
  VectorXd diag;
  VectorXd b;  // empty means 0

  explicit QuadraticProblem(VectorXd d_, VectorXd b_ = VectorXd());

  int n() const { return static_cast<int>(diag.size()); }
  double f(const VectorXd& x) const;
  void grad(const VectorXd& x, VectorXd& out) const;  // A x - b, exact
  double f_star() const;                              // min over x
  double L() const { return diag.maxCoeff(); }
  double c() const { return diag.minCoeff(); }
};

inline void quadratic_grad(const VectorXd& x, const QuadraticProblem& q,
                           VectorXd& out) {
  q.grad(x, out);
}

enum class BatchStrategy {
  independent,    // uniform without replacement, fresh each iteration
  shuffled_epoch  // disjoint blocks of a per-epoch permutation
};

// Deterministic batch source: the k-th batch is a pure function of
// (seed, strategy, k), so concurrent runs never need coordination.
class BatchSampler {
 public:
  BatchSampler(BatchStrategy strategy, int N, int batch_size,
               std::uint64_t seed);

  const Batch& batch_for(long k);
  int blocks_per_epoch() const { return blocks_per_epoch_; }

 private:
  BatchStrategy strategy_;
  int N_;
  int batch_size_;
  int blocks_per_epoch_;
  rng::Stream pick_;     // "batch" draws (independent mode)
  rng::Stream shuffle_;  // "shuffle" draws (per-epoch permutation)
  std::vector<int> pool_;
  std::vector<int> perm_;
  long cached_epoch_ = -1;
  Batch batch_;
};

// One-shot form of the sampler for property tests and small callers.
Batch sample_batch(BatchStrategy strategy, long k, int N, int batch_size,
                   std::uint64_t seed);

// Per-iteration stochastic gradient source consumed by the optimizer loop.
// eval() samples the k-th batch/noise; eval_same_sample() re-evaluates the
// *same* k-th sample at a new point (the correction-pair partner). Both
// return the cost in single-gradient evaluations.
class GradOracle {
 public:
  virtual ~GradOracle() = default;
  virtual int dim() const = 0;
  virtual long eval(const VectorXd& x, long k, VectorXd& g) = 0;
  virtual long eval_same_sample(const VectorXd& x, long k, VectorXd& g) = 0;
};

// Finite-sum logistic gradients over a dataset split.
class LogisticOracle final : public GradOracle {
 public:
  LogisticOracle(const std::vector<data::SparseExample>& split, int d,
                 BatchStrategy strategy, int batch_size, std::uint64_t seed);

  int dim() const override { return d_; }
  long eval(const VectorXd& x, long k, VectorXd& g) override;
  long eval_same_sample(const VectorXd& x, long k, VectorXd& g) override;

 private:
  const std::vector<data::SparseExample>& split_;
  int d_;
  BatchSampler sampler_;
  Batch current_;  // batch of the most recent eval(); reused, not resampled
  long current_k_ = -1;
};

// Exact gradient of a deterministic base problem plus i.i.d. N(0, sigma^2)
// noise per coordinate: unbiased with E||g - grad f||^2 = n sigma^2 = M_g.
class NoisyGradientOracle final : public GradOracle {
 public:
  NoisyGradientOracle(const QuadraticProblem& base, double sigma,
                      std::uint64_t seed);

  int dim() const override { return base_.n(); }
  long eval(const VectorXd& x, long k, VectorXd& g) override;
  // Re-evaluates iteration k's sample at a new point with the *same* noise
  // realization, mirroring a finite sum re-evaluated on one batch: gradient
  // differences of the same sample see only the curvature.
  long eval_same_sample(const VectorXd& x, long k, VectorXd& g) override;

  double Mg() const { return sigma_ * sigma_ * base_.n(); }
  const QuadraticProblem& base() const { return base_; }

 private:
  void add_noise(long k, std::uint64_t index_base, VectorXd& g) const;

  QuadraticProblem base_;
  double sigma_;
  rng::Stream noise_;
};

}  // namespace trishbb::problem
