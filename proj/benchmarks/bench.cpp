// Microbenchmarks for the inner-loop hot spots: the batched logistic
// gradient, the step rule, a full steplength cycle, and LIBSVM parsing.
#include <benchmark/benchmark.h>

#include <sstream>

#include "trishbb/data.hpp"
#include "trishbb/optimizer.hpp"
#include "trishbb/problem.hpp"
#include "trishbb/rng.hpp"

using namespace trishbb;
using Eigen::VectorXd;

namespace {

// Synthetic split shaped like a1a: ~14 binary features per example.
std::vector<data::SparseExample> synthetic_split(int n, int d, int nnz,
                                                 std::uint64_t seed) {
  rng::Stream s(seed, "bench-data");
  std::vector<data::SparseExample> split(n);
  for (int i = 0; i < n; ++i) {
    split[i].label = s.u01(i, 0) < 0.5 ? 1 : -1;
    int idx = (int)s.below(i, 1, 3);
    for (int f = 0; f < nnz && idx < d; ++f) {
      split[i].features.emplace_back(idx, 1.0);
      idx += 1 + (int)s.below(i, 2 + f, (std::uint64_t)(d / nnz));
    }
  }
  return split;
}

void bm_logistic_grad(benchmark::State& state) {
  const int d = 123, batch = (int)state.range(0);
  const auto split = synthetic_split(1605, d, 14, 1);
  rng::Stream s(2, "bench-x");
  VectorXd x(d), g(d);
  for (int i = 0; i < d; ++i) x(i) = s.normal(0, i);
  problem::Batch idx;
  for (int b = 0; b < batch; ++b)
    idx.push_back((int)s.below(1, b, split.size()));
  for (auto _ : state) {
    problem::logistic_grad(x, idx, split, g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void bm_tr_step(benchmark::State& state) {
  opt::TripletConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma1 = 11.5;
  cfg.gamma2 = 2.9;
  const int d = (int)state.range(0);
  rng::Stream s(3, "bench-g");
  VectorXd g(d);
  for (int i = 0; i < d; ++i) g(i) = s.normal(0, i);
  for (auto _ : state) {
    auto out = opt::tr_step(g, 0.37, cfg);
    benchmark::DoNotOptimize(out.p.data());
  }
}

void bm_v2_cycle(benchmark::State& state) {
  const int d = (int)state.range(0);
  opt::TripletConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma1 = 11.5;
  cfg.gamma2 = 2.9;
  cfg.m = 25;
  rng::Stream s(4, "bench-v2");
  std::vector<VectorXd> gs(cfg.m), xs(cfg.m);
  for (int k = 0; k < cfg.m; ++k) {
    gs[k] = VectorXd(d);
    xs[k] = VectorXd(d);
    for (int i = 0; i < d; ++i) {
      gs[k](i) = s.normal(k, i);
      xs[k](i) = s.normal(1000 + k, i);
    }
  }
  for (auto _ : state) {
    opt::V2State st;
    st.init(VectorXd::Zero(d), cfg);
    double mu = cfg.mu0;
    for (long k = 1; k <= cfg.m; ++k)
      mu = opt::v2_update(st, k, mu, xs[k - 1], gs[k - 1], cfg);
    benchmark::DoNotOptimize(mu);
  }
  state.SetItemsProcessed(state.iterations() * cfg.m);
}

void bm_parse_libsvm(benchmark::State& state) {
  const auto split = synthetic_split(1000, 123, 14, 5);
  std::ostringstream text;
  for (const auto& e : split) text << data::to_libsvm_line(e) << '\n';
  const std::string blob = text.str();
  for (auto _ : state) {
    std::istringstream in(blob);
    auto parsed = data::parse_libsvm(in, 123, {});
    benchmark::DoNotOptimize(parsed.examples.data());
  }
  state.SetBytesProcessed(state.iterations() * (long)blob.size());
}

}  // namespace

BENCHMARK(bm_logistic_grad)->Arg(64)->Arg(256);
BENCHMARK(bm_tr_step)->Arg(123)->Arg(4096);
BENCHMARK(bm_v2_cycle)->Arg(123)->Arg(4096);
BENCHMARK(bm_parse_libsvm);

BENCHMARK_MAIN();
