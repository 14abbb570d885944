#include "trishbb/problem.hpp"

#include <numeric>
#include <stdexcept>

namespace trishbb::problem {

namespace {

double sparse_dot(const VectorXd& x, const data::SparseExample& ex) {
  double s = 0.0;
  for (const auto& [j, v] : ex.features) s += x[j] * v;
  return s;
}

}  // namespace

double logistic_loss(const VectorXd& x, const Batch& batch,
                     const std::vector<data::SparseExample>& split) {
  if (batch.empty()) throw std::invalid_argument("logistic_loss: empty batch");
  double sum = 0.0;
  for (int i : batch) {
    const auto& ex = split[static_cast<size_t>(i)];
    sum += stable_log1pexp(-ex.label * sparse_dot(x, ex));
  }
  return sum / static_cast<double>(batch.size());
}

void logistic_grad(const VectorXd& x, const Batch& batch,
                   const std::vector<data::SparseExample>& split,
                   VectorXd& out) {
  if (batch.empty()) throw std::invalid_argument("logistic_grad: empty batch");
  out.setZero(x.size());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (int i : batch) {
    const auto& ex = split[static_cast<size_t>(i)];
    const double z = -ex.label * sparse_dot(x, ex);
    const double w = -ex.label * stable_sigmoid(z) * inv;
    for (const auto& [j, v] : ex.features) out[j] += w * v;
  }
}

double accuracy(const VectorXd& x,
                const std::vector<data::SparseExample>& split) {
  if (split.empty()) throw std::invalid_argument("accuracy: empty split");
  long correct = 0;
  for (const auto& ex : split) {
    const int pred = sparse_dot(x, ex) >= 0.0 ? +1 : -1;
    if (pred == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

double logistic_loss_full(const VectorXd& x,
                          const std::vector<data::SparseExample>& split) {
  if (split.empty()) throw std::invalid_argument("loss: empty split");
  double sum = 0.0;
  for (const auto& ex : split)
    sum += stable_log1pexp(-ex.label * sparse_dot(x, ex));
  return sum / static_cast<double>(split.size());
}

QuadraticProblem::QuadraticProblem(VectorXd d_, VectorXd b_)
    : diag(std::move(d_)), b(std::move(b_)) {
  if (diag.size() == 0 || diag.minCoeff() <= 0.0)
    throw std::invalid_argument("QuadraticProblem: diagonal must be positive");
  if (b.size() == 0) b = VectorXd::Zero(diag.size());
  if (b.size() != diag.size())
    throw std::invalid_argument("QuadraticProblem: dimension mismatch");
}

double QuadraticProblem::f(const VectorXd& x) const {
  return 0.5 * x.dot(diag.cwiseProduct(x)) - b.dot(x);
}

void QuadraticProblem::grad(const VectorXd& x, VectorXd& out) const {
  out = diag.cwiseProduct(x) - b;
}

double QuadraticProblem::f_star() const {
  // minimizer x* = A^{-1} b, value -1/2 b^T A^{-1} b
  return -0.5 * b.dot(b.cwiseQuotient(diag));
}

BatchSampler::BatchSampler(BatchStrategy strategy, int N, int batch_size,
                           std::uint64_t seed)
    : strategy_(strategy),
      N_(N),
      batch_size_(batch_size),
      pick_(seed, "batch"),
      shuffle_(seed, "shuffle") {
  if (batch_size < 1 || batch_size > N)
    throw std::invalid_argument("BatchSampler: need 1 <= batch_size <= N");
  blocks_per_epoch_ = (N + batch_size - 1) / batch_size;
  pool_.resize(static_cast<size_t>(N));
  if (strategy_ == BatchStrategy::shuffled_epoch)
    perm_.resize(static_cast<size_t>(N));
}

const Batch& BatchSampler::batch_for(long k) {
  if (strategy_ == BatchStrategy::independent) {
    // partial Fisher-Yates keyed by k: uniform without replacement
    std::iota(pool_.begin(), pool_.end(), 0);
    batch_.resize(static_cast<size_t>(batch_size_));
    for (int i = 0; i < batch_size_; ++i) {
      const auto j =
          i + static_cast<int>(pick_.below(static_cast<std::uint64_t>(k),
                                           static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(N_ - i)));
      std::swap(pool_[static_cast<size_t>(i)], pool_[static_cast<size_t>(j)]);
      batch_[static_cast<size_t>(i)] = pool_[static_cast<size_t>(i)];
    }
    return batch_;
  }
  // shuffled-epoch: consecutive disjoint blocks of a per-epoch permutation;
  // the final short block of an epoch is used as-is.
  const long epoch = k / blocks_per_epoch_;
  const int block = static_cast<int>(k % blocks_per_epoch_);
  if (epoch != cached_epoch_) {
    std::iota(perm_.begin(), perm_.end(), 0);
    for (int i = N_ - 1; i > 0; --i) {
      const auto j = shuffle_.below(static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(i + 1));
      std::swap(perm_[static_cast<size_t>(i)], perm_[static_cast<size_t>(j)]);
    }
    cached_epoch_ = epoch;
  }
  const int lo = block * batch_size_;
  const int hi = std::min(N_, lo + batch_size_);
  batch_.assign(perm_.begin() + lo, perm_.begin() + hi);
  return batch_;
}

Batch sample_batch(BatchStrategy strategy, long k, int N, int batch_size,
                   std::uint64_t seed) {
  BatchSampler s(strategy, N, batch_size, seed);
  return s.batch_for(k);
}

LogisticOracle::LogisticOracle(const std::vector<data::SparseExample>& split,
                               int d, BatchStrategy strategy, int batch_size,
                               std::uint64_t seed)
    : split_(split),
      d_(d),
      sampler_(strategy, static_cast<int>(split.size()), batch_size, seed) {}

long LogisticOracle::eval(const VectorXd& x, long k, VectorXd& g) {
  current_ = sampler_.batch_for(k);
  current_k_ = k;
  logistic_grad(x, current_, split_, g);
  return static_cast<long>(current_.size());
}

long LogisticOracle::eval_same_sample(const VectorXd& x, long k, VectorXd& g) {
  if (k != current_k_)
    throw std::logic_error("eval_same_sample: no batch sampled for this k");
  logistic_grad(x, current_, split_, g);
  return static_cast<long>(current_.size());
}

NoisyGradientOracle::NoisyGradientOracle(const QuadraticProblem& base,
                                         double sigma, std::uint64_t seed)
    : base_(base), sigma_(sigma), noise_(seed, "noise") {
  if (sigma < 0.0)
    throw std::invalid_argument("NoisyGradientOracle: sigma must be >= 0");
}

void NoisyGradientOracle::add_noise(long k, std::uint64_t index_base,
                                    VectorXd& g) const {
  if (sigma_ == 0.0) return;
  for (int i = 0; i < base_.n(); ++i)
    g[i] += sigma_ * noise_.normal(static_cast<std::uint64_t>(k),
                                   index_base + static_cast<std::uint64_t>(i));
}

long NoisyGradientOracle::eval(const VectorXd& x, long k, VectorXd& g) {
  base_.grad(x, g);
  add_noise(k, 0, g);
  return 1;
}

long NoisyGradientOracle::eval_same_sample(const VectorXd& x, long k,
                                           VectorXd& g) {
  // The k-th sample is the base gradient plus a fixed perturbation, so a
  // second look at the same sample carries the same noise. The correction
  // pair's difference is then exactly the curvature term, as it is for a
  // finite sum re-evaluated on one batch.
  base_.grad(x, g);
  add_noise(k, 0, g);
  return 1;
}

}  // namespace trishbb::problem
