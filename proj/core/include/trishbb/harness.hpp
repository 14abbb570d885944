#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trishbb/data.hpp"
#include "trishbb/optimizer.hpp"
#include "trishbb/problem.hpp"

namespace trishbb::harness {

// One dataset row of data/manifest.json.
struct DatasetEntry {
  std::string name;
  std::string train_path;  // relative to the manifest's directory
  std::string test_path;
  long n_train = 0;  // expected counts for validation
  long n_test = 0;
  int d = 0;
  bool normalize_zero_one = false;
  bool zero_label_is_negative = false;
};

struct Manifest {
  std::string root;  // directory containing the manifest
  std::map<std::string, DatasetEntry> datasets;

  static Manifest load(const std::string& path);
  const DatasetEntry& at(const std::string& name) const;  // throws if unknown
};

// Loads train/test splits, applies the entry's normalization, and returns
// the ready-to-train dataset. Throws on I/O or parse failure.
data::Dataset load_entry(const Manifest& mf, const DatasetEntry& entry);

// Sweep definition. gamma lists are multiples of 1/G, matching the protocol
// of expressing radii relative to the typical gradient norm.
struct ExperimentSpec {
  std::string dataset;
  std::vector<opt::Variant> variants{opt::Variant::trish, opt::Variant::v1,
                                     opt::Variant::v2, opt::Variant::v3};
  std::vector<double> alphas{0.1, std::pow(10.0, -0.5), 1.0,
                             std::pow(10.0, 0.5), 10.0};
  std::vector<double> gamma1_multiples{4.0, 8.0, 16.0, 32.0};
  std::vector<double> gamma2_multiples{0.5, 1.0, 2.0};
  int seeds = 10;
  std::uint64_t master_seed = 606544341;
  int epochs = 5;
  int batch_size = 64;
  double mu0 = 1.0;
  double mu_min = 1e-5;
  double mu_max = 1e5;
  int m_v1 = 20;          // v1 refreshes its pair every m_v1 iterations
  bool m_is_blocks = true;  // v2/v3/sgdbb cycle = floor(N / batch_size)
  int m_fixed = 25;         // used when m_is_blocks is false
  double eta = 0.9;
  int m_F = 100;
  double g_lr = 0.1;  // plain-SG learning rate for estimate_G
  // sgdbb runs outside the (alpha, gamma) grid with its own steplength box.
  double sgdbb_mu0 = 1e-2;
  double sgdbb_mu_min = 1e-5;
  double sgdbb_mu_max = 1e-1;
  int threads = 0;  // 0 = hardware concurrency
};

// Mean of ||g_k|| over one plain-SG epoch (x <- x - lr g, x0 = 0) with the
// dataset's batch size and disjoint shuffled blocks. Throws on divergence.
double estimate_G(const std::vector<data::SparseExample>& train, int d,
                  int batch_size, double lr, std::uint64_t seed);

// Reserved seed for G estimation so the sweep's per-run seeds never collide
// with it and G is fixed per (master seed, dataset).
std::uint64_t g_seed(std::uint64_t master_seed);

struct GridPoint {
  std::string id;  // "ExIJK": 1-based indices into the alpha/gamma lists
  int i = 0, j = 0, k = 0;
  double alpha = 0.0, gamma1 = 0.0, gamma2 = 0.0;
};

// Cartesian product of the ExperimentSpec lists with gamma = multiple / G.
// Points with gamma2 > gamma1 are dropped with a warning on stderr (cannot
// happen with the default lists).
std::vector<GridPoint> expand_grid(const ExperimentSpec& spec, double G);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;  // in [0, 1]
  double frac_bb = 0.0;        // cumulative unconstrained-BB fraction, [0, 1]
};

struct RunRecord {
  std::string run_id;  // grid id, or "Ex000" for off-grid sgdbb
  std::string dataset;
  opt::Variant variant = opt::Variant::trish;
  double alpha = 0.0, gamma1 = 0.0, gamma2 = 0.0;
  int seed_index = 0;  // i of the predetermined seed sequence
  std::vector<EpochMetrics> epochs;
  bool failed = false;
  std::string failure;
  double wall_time_s = 0.0;
};

// One record per (variant, grid point, seed): 5 epochs of logistic regression
// from x0 = 0 under a budget of epochs * N single-gradient evaluations.
// Batches: v2/sgdbb consume disjoint shuffled blocks, the rest sample
// independently. sgdbb ignores the grid and contributes one record per seed.
// Failures become failed records; the sweep continues.
std::vector<RunRecord> run_sweep(const data::Dataset& ds,
                                 const ExperimentSpec& spec, double G);

struct AggregateRecord {
  std::string run_id;
  std::string dataset;
  opt::Variant variant = opt::Variant::trish;
  double alpha = 0.0, gamma1 = 0.0, gamma2 = 0.0;
  int seeds = 0;  // contributing (non-failed) runs
  std::vector<EpochMetrics> mean;  // seed-mean per epoch
  std::vector<EpochMetrics> stdev; // seed standard deviation per epoch
  double max_mean_accuracy = 0.0;  // max over epochs of mean accuracy
};

// Seed-mean and standard deviation per (config, epoch); groups whose runs all
// failed are skipped with a warning on stderr.
std::vector<AggregateRecord> aggregate(const std::vector<RunRecord>& records);

struct AlphaBest {
  opt::Variant variant;
  double alpha = 0.0;
  std::string run_id;              // arg max grid point
  double best_accuracy = 0.0;      // best over (gamma1, gamma2)
  double mean_pct_bb = 0.0;        // mean final BB percentage over that
                                   // alpha's runs (all gammas, all seeds)
};

// Per (variant, alpha): best over (gamma1, gamma2) of the per-epoch max
// seed-mean accuracy, plus the BB-step percentage averaged over every run
// performed at that alpha.
std::vector<AlphaBest> best_by_alpha(const std::vector<RunRecord>& records,
                                     const std::vector<AggregateRecord>& aggs);

// min/max over alpha of the best accuracies; 0 when no alpha succeeded.
double accuracy_ratio(const std::vector<AlphaBest>& bests, opt::Variant v);

enum class EmitFormat { csv, json };

// Writes runs.csv (one row per record x epoch; columns run_id, dataset,
// variant, alpha, gamma1, gamma2, seed, epoch, train_loss, test_loss,
// test_accuracy, pct_bb_steps, wall_time_s), aggregates.csv, and meta.json
// (G, spec echo, per-alpha bests, accuracy ratios). Floats carry 6
// significant digits; reruns with the same seed are byte-identical except
// the wall_time_s column. Throws on I/O failure, naming the path.
void emit(const std::vector<RunRecord>& records,
          const std::vector<AggregateRecord>& aggregates,
          const std::vector<AlphaBest>& bests, const ExperimentSpec& spec,
          double G, EmitFormat format, const std::string& out_dir);

// "quad:diag=1,2[;b=0.5,-1][;sigma=0.1]" -> synthetic problem description.
struct SyntheticSpec {
  problem::QuadraticProblem problem;
  double sigma = 0.0;
};

std::optional<SyntheticSpec> parse_synthetic(const std::string& spec);

}  // namespace trishbb::harness
