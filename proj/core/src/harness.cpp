#include "trishbb/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "trishbb/rng.hpp"

namespace trishbb::harness {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest " + path + ": " + e.what());
  }
  Manifest mf;
  mf.root = fs::path(path).parent_path().string();
  if (mf.root.empty()) mf.root = ".";
  for (const auto& [name, node] : doc.at("datasets").items()) {
    DatasetEntry e;
    e.name = name;
    e.train_path = node.at("train").get<std::string>();
    e.test_path = node.at("test").get<std::string>();
    const auto& exp = node.at("expected");
    e.n_train = exp.at("n_train").get<long>();
    e.n_test = exp.at("n_test").get<long>();
    e.d = exp.at("d").get<int>();
    e.normalize_zero_one = node.value("normalize_zero_one", false);
    e.zero_label_is_negative = node.value("zero_label_is_negative", false);
    mf.datasets.emplace(name, std::move(e));
  }
  return mf;
}

const DatasetEntry& Manifest::at(const std::string& name) const {
  auto it = datasets.find(name);
  if (it == datasets.end())
    throw std::runtime_error("unknown dataset: " + name);
  return it->second;
}

data::Dataset load_entry(const Manifest& mf, const DatasetEntry& entry) {
  data::ParseOptions opts;
  opts.zero_label_is_negative = entry.zero_label_is_negative;
  const auto train = (fs::path(mf.root) / entry.train_path).string();
  const auto test = (fs::path(mf.root) / entry.test_path).string();
  data::Dataset ds = data::load_dataset(entry.name, train, test, entry.d, opts);
  if (entry.normalize_zero_one) {
    const data::NormStats stats = data::fit_zero_one(ds.train, ds.d);
    ds.train = data::normalize_zero_one(ds.train, stats, ds.d);
    ds.test = data::normalize_zero_one(ds.test, stats, ds.d);
  }
  return ds;
}

std::uint64_t g_seed(std::uint64_t master_seed) {
  return rng::mix(master_seed ^ rng::hash_tag("estimate-G"));
}

double estimate_G(const std::vector<data::SparseExample>& train, int d,
                  int batch_size, double lr, std::uint64_t seed) {
  if (!(lr > 0.0)) throw std::invalid_argument("estimate_G: lr must be > 0");
  const int N = (int)train.size();
  const int blocks = (N + batch_size - 1) / batch_size;
  problem::LogisticOracle oracle(train, d, problem::BatchStrategy::shuffled_epoch,
                                 batch_size, seed);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d), g(d);
  double sum = 0.0;
  for (int k = 0; k < blocks; ++k) {
    oracle.eval(x, k, g);
    sum += g.norm();
    x -= lr * g;
    if (!x.allFinite())
      throw std::runtime_error("estimate_G: plain SG diverged at iteration " +
                               std::to_string(k));
  }
  return sum / blocks;
}

std::vector<GridPoint> expand_grid(const ExperimentSpec& spec, double G) {
  if (!(G > 0.0)) throw std::invalid_argument("expand_grid: G must be > 0");
  std::vector<GridPoint> grid;
  for (size_t i = 0; i < spec.alphas.size(); ++i)
    for (size_t j = 0; j < spec.gamma1_multiples.size(); ++j)
      for (size_t k = 0; k < spec.gamma2_multiples.size(); ++k) {
        GridPoint p;
        p.i = (int)i + 1;
        p.j = (int)j + 1;
        p.k = (int)k + 1;
        p.id = "Ex" + std::to_string(p.i) + std::to_string(p.j) +
               std::to_string(p.k);
        p.alpha = spec.alphas[i];
        p.gamma1 = spec.gamma1_multiples[j] / G;
        p.gamma2 = spec.gamma2_multiples[k] / G;
        if (p.gamma2 > p.gamma1) {
          std::cerr << "warning: dropping " << p.id
                    << " (gamma2 > gamma1)\n";
          continue;
        }
        grid.push_back(std::move(p));
      }
  return grid;
}

namespace {

struct Job {
  opt::Variant variant;
  GridPoint point;  // Ex000 with zeroed entries for off-grid sgdbb
  int seed_index;
};

RunRecord run_one(const data::Dataset& ds, const ExperimentSpec& spec,
                  const Job& job) {
  const long N = (long)ds.train.size();
  const int blocks = std::max(1, (int)(N / spec.batch_size));  // floor

  RunRecord rec;
  rec.run_id = job.point.id;
  rec.dataset = ds.name;
  rec.variant = job.variant;
  rec.alpha = job.point.alpha;
  rec.gamma1 = job.point.gamma1;
  rec.gamma2 = job.point.gamma2;
  rec.seed_index = job.seed_index;

  const bool sgdbb = job.variant == opt::Variant::sgdbb;
  opt::TripletConfig cfg;
  if (sgdbb) {
    // The radius parameters are never consulted; placeholders keep the
    // config valid while the record carries 0-sentinels.
    cfg.alpha = cfg.gamma1 = cfg.gamma2 = 1.0;
    cfg.mu0 = spec.sgdbb_mu0;
    cfg.mu_min = spec.sgdbb_mu_min;
    cfg.mu_max = spec.sgdbb_mu_max;
  } else {
    cfg.alpha = job.point.alpha;
    cfg.gamma1 = job.point.gamma1;
    cfg.gamma2 = job.point.gamma2;
    cfg.mu0 = spec.mu0;
    cfg.mu_min = spec.mu_min;
    cfg.mu_max = spec.mu_max;
  }
  cfg.eta = spec.eta;
  cfg.m_F = spec.m_F;
  cfg.batch_size = spec.batch_size;
  const bool cyclic = job.variant == opt::Variant::v2 ||
                      job.variant == opt::Variant::v3 || sgdbb;
  cfg.m = cyclic ? (spec.m_is_blocks ? blocks : spec.m_fixed) : spec.m_v1;

  // Disjoint shuffled blocks for the epoch-averaging variants; fresh uniform
  // batches for the rest.
  const auto strategy = (job.variant == opt::Variant::v2 || sgdbb)
                            ? problem::BatchStrategy::shuffled_epoch
                            : problem::BatchStrategy::independent;
  problem::LogisticOracle oracle(
      ds.train, ds.d, strategy, spec.batch_size,
      rng::derive_seed(spec.master_seed, (std::uint64_t)job.seed_index));

  opt::RunOptions ro;
  ro.budget_evals = (long)spec.epochs * N;
  ro.evals_per_epoch = N;
  ro.max_epochs = spec.epochs;

  const auto t0 = std::chrono::steady_clock::now();
  const opt::RunResult res = opt::run(
      oracle, job.variant, cfg, ro,
      [&](const opt::EpochSnapshot& snap, const Eigen::VectorXd& x) {
        EpochMetrics m;
        m.epoch = snap.epoch;
        m.train_loss = problem::logistic_loss_full(x, ds.train);
        m.test_loss = problem::logistic_loss_full(x, ds.test);
        m.test_accuracy = problem::accuracy(x, ds.test);
        m.frac_bb = snap.frac_bb;
        rec.epochs.push_back(m);
      });
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  rec.failed = res.failed;
  rec.failure = res.failure;
  return rec;
}

}  // namespace

std::vector<RunRecord> run_sweep(const data::Dataset& ds,
                                 const ExperimentSpec& spec, double G) {
  std::vector<Job> jobs;
  const std::vector<GridPoint> grid = expand_grid(spec, G);
  for (const auto v : spec.variants) {
    if (v == opt::Variant::sgdbb) {
      GridPoint off;  // single off-grid config; steplength box does the work
      off.id = "Ex000";
      for (int s = 0; s < spec.seeds; ++s) jobs.push_back({v, off, s});
      continue;
    }
    for (const auto& gp : grid)
      for (int s = 0; s < spec.seeds; ++s) jobs.push_back({v, gp, s});
  }

  std::vector<RunRecord> records(jobs.size());
  std::atomic<size_t> next{0};
  const unsigned hw = std::thread::hardware_concurrency();
  const unsigned workers = std::min<size_t>(
      jobs.size(),
      spec.threads > 0 ? (unsigned)spec.threads : std::max(1u, hw));
  auto drain = [&] {
    for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
      records[i] = run_one(ds, spec, jobs[i]);
  };
  if (workers <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
  }
  return records;
}

std::vector<AggregateRecord> aggregate(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  std::vector<std::string> order;  // first-seen group order, deterministic
  for (const auto& r : records) {
    const std::string key =
        r.dataset + "/" + opt::to_string(r.variant) + "/" + r.run_id;
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  std::vector<AggregateRecord> out;
  for (const auto& key : order) {
    const auto& members = groups[key];
    std::vector<const RunRecord*> ok;
    for (const auto* r : members)
      if (!r->failed) ok.push_back(r);
    if (ok.empty()) {
      std::cerr << "warning: every run failed for " << key << "; skipped\n";
      continue;
    }
    const size_t epochs = ok.front()->epochs.size();
    AggregateRecord agg;
    agg.run_id = ok.front()->run_id;
    agg.dataset = ok.front()->dataset;
    agg.variant = ok.front()->variant;
    agg.alpha = ok.front()->alpha;
    agg.gamma1 = ok.front()->gamma1;
    agg.gamma2 = ok.front()->gamma2;
    agg.seeds = (int)ok.size();
    agg.mean.resize(epochs);
    agg.stdev.resize(epochs);
    for (size_t e = 0; e < epochs; ++e) {
      auto moments = [&](auto pick) {
        double s = 0.0, s2 = 0.0;
        for (const auto* r : ok) {
          const double v = pick(r->epochs[e]);
          s += v;
          s2 += v * v;
        }
        const double n = (double)ok.size();
        const double mean = s / n;
        const double var =
            n > 1 ? std::max(0.0, (s2 - s * s / n) / (n - 1.0)) : 0.0;
        return std::pair<double, double>{mean, std::sqrt(var)};
      };
      agg.mean[e].epoch = agg.stdev[e].epoch = ok.front()->epochs[e].epoch;
      std::tie(agg.mean[e].train_loss, agg.stdev[e].train_loss) =
          moments([](const EpochMetrics& m) { return m.train_loss; });
      std::tie(agg.mean[e].test_loss, agg.stdev[e].test_loss) =
          moments([](const EpochMetrics& m) { return m.test_loss; });
      std::tie(agg.mean[e].test_accuracy, agg.stdev[e].test_accuracy) =
          moments([](const EpochMetrics& m) { return m.test_accuracy; });
      std::tie(agg.mean[e].frac_bb, agg.stdev[e].frac_bb) =
          moments([](const EpochMetrics& m) { return m.frac_bb; });
      agg.max_mean_accuracy =
          std::max(agg.max_mean_accuracy, agg.mean[e].test_accuracy);
    }
    out.push_back(std::move(agg));
  }
  return out;
}

std::vector<AlphaBest> best_by_alpha(const std::vector<RunRecord>& records,
                                     const std::vector<AggregateRecord>& aggs) {
  // Group key (variant, alpha); alpha values come from a short fixed list so
  // exact comparison is safe.
  std::vector<AlphaBest> out;
  auto slot = [&](opt::Variant v, double alpha) -> AlphaBest& {
    for (auto& b : out)
      if (b.variant == v && b.alpha == alpha) return b;
    out.push_back({v, alpha, "", 0.0, 0.0});
    return out.back();
  };
  for (const auto& a : aggs) {
    AlphaBest& b = slot(a.variant, a.alpha);
    if (a.max_mean_accuracy > b.best_accuracy) {
      b.best_accuracy = a.max_mean_accuracy;
      b.run_id = a.run_id;
    }
  }
  // BB percentage: mean over every completed run at that alpha of the
  // whole-run unconstrained fraction (the final epoch's cumulative value).
  std::map<std::pair<int, double>, std::pair<double, long>> pct;
  for (const auto& r : records) {
    if (r.failed || r.epochs.empty()) continue;
    auto& acc = pct[{(int)r.variant, r.alpha}];
    acc.first += r.epochs.back().frac_bb;
    acc.second += 1;
  }
  for (auto& b : out) {
    const auto it = pct.find({(int)b.variant, b.alpha});
    if (it != pct.end() && it->second.second > 0)
      b.mean_pct_bb = 100.0 * it->second.first / (double)it->second.second;
  }
  return out;
}

double accuracy_ratio(const std::vector<AlphaBest>& bests, opt::Variant v) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& b : bests) {
    if (b.variant != v) continue;
    if (!any) {
      lo = hi = b.best_accuracy;
      any = true;
    } else {
      lo = std::min(lo, b.best_accuracy);
      hi = std::max(hi, b.best_accuracy);
    }
  }
  return any && hi > 0.0 ? lo / hi : 0.0;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void must_open(std::ofstream& out, const std::string& path) {
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace

void emit(const std::vector<RunRecord>& records,
          const std::vector<AggregateRecord>& aggregates,
          const std::vector<AlphaBest>& bests, const ExperimentSpec& spec,
          double G, EmitFormat format, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (fs::path(out_dir) / name).string();
  };

  if (format == EmitFormat::csv) {
    const std::string runs_path = path("runs.csv");
    std::ofstream out(runs_path);
    must_open(out, runs_path);
    out << "run_id,dataset,variant,alpha,gamma1,gamma2,seed,epoch,"
           "train_loss,test_loss,test_accuracy,pct_bb_steps,wall_time_s\n";
    for (const auto& r : records)
      for (const auto& e : r.epochs)
        out << r.run_id << ',' << r.dataset << ',' << opt::to_string(r.variant)
            << ',' << fmt6(r.alpha) << ',' << fmt6(r.gamma1) << ','
            << fmt6(r.gamma2) << ',' << r.seed_index << ',' << e.epoch << ','
            << fmt6(e.train_loss) << ',' << fmt6(e.test_loss) << ','
            << fmt6(e.test_accuracy) << ',' << fmt6(100.0 * e.frac_bb) << ','
            << fmt6(r.wall_time_s) << '\n';

    const std::string agg_path = path("aggregates.csv");
    std::ofstream agg(agg_path);
    must_open(agg, agg_path);
    agg << "run_id,dataset,variant,alpha,gamma1,gamma2,seeds,epoch,"
           "mean_train_loss,std_train_loss,mean_test_loss,std_test_loss,"
           "mean_test_accuracy,std_test_accuracy,mean_pct_bb,"
           "max_mean_accuracy\n";
    for (const auto& a : aggregates)
      for (size_t e = 0; e < a.mean.size(); ++e)
        agg << a.run_id << ',' << a.dataset << ',' << opt::to_string(a.variant)
            << ',' << fmt6(a.alpha) << ',' << fmt6(a.gamma1) << ','
            << fmt6(a.gamma2) << ',' << a.seeds << ',' << a.mean[e].epoch
            << ',' << fmt6(a.mean[e].train_loss) << ','
            << fmt6(a.stdev[e].train_loss) << ',' << fmt6(a.mean[e].test_loss)
            << ',' << fmt6(a.stdev[e].test_loss) << ','
            << fmt6(a.mean[e].test_accuracy) << ','
            << fmt6(a.stdev[e].test_accuracy) << ','
            << fmt6(100.0 * a.mean[e].frac_bb) << ','
            << fmt6(a.max_mean_accuracy) << '\n';
  } else {
    auto row_array = [&] {
      json rows = json::array();
      for (const auto& r : records)
        for (const auto& e : r.epochs)
          rows.push_back({{"run_id", r.run_id},
                          {"dataset", r.dataset},
                          {"variant", opt::to_string(r.variant)},
                          {"alpha", r.alpha},
                          {"gamma1", r.gamma1},
                          {"gamma2", r.gamma2},
                          {"seed", r.seed_index},
                          {"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"test_loss", e.test_loss},
                          {"test_accuracy", e.test_accuracy},
                          {"pct_bb_steps", 100.0 * e.frac_bb},
                          {"wall_time_s", r.wall_time_s}});
      return rows;
    };
    const std::string runs_path = path("runs.json");
    std::ofstream out(runs_path);
    must_open(out, runs_path);
    out << row_array().dump(2) << '\n';
  }

  json meta;
  meta["dataset"] = spec.dataset;
  meta["G"] = G;
  meta["g_lr"] = spec.g_lr;
  meta["seeds"] = spec.seeds;
  meta["master_seed"] = spec.master_seed;
  meta["epochs"] = spec.epochs;
  meta["batch_size"] = spec.batch_size;
  meta["alphas"] = spec.alphas;
  meta["gamma1_multiples"] = spec.gamma1_multiples;
  meta["gamma2_multiples"] = spec.gamma2_multiples;
  meta["mu0"] = spec.mu0;
  meta["mu_min"] = spec.mu_min;
  meta["mu_max"] = spec.mu_max;
  {
    json vs = json::array();
    for (const auto v : spec.variants) vs.push_back(opt::to_string(v));
    meta["variants"] = vs;
  }
  json jb = json::array();
  for (const auto& b : bests)
    jb.push_back({{"variant", opt::to_string(b.variant)},
                  {"alpha", b.alpha},
                  {"run_id", b.run_id},
                  {"best_accuracy", b.best_accuracy},
                  {"mean_pct_bb", b.mean_pct_bb}});
  meta["best_by_alpha"] = jb;
  json ratios = json::object();
  for (const auto v : spec.variants)
    ratios[opt::to_string(v)] = accuracy_ratio(bests, v);
  meta["accuracy_ratio"] = ratios;
  json failures = json::array();
  for (const auto& r : records)
    if (r.failed)
      failures.push_back({{"run_id", r.run_id},
                          {"variant", opt::to_string(r.variant)},
                          {"seed", r.seed_index},
                          {"error", r.failure}});
  meta["failures"] = failures;
  const std::string meta_path = path("meta.json");
  std::ofstream mout(meta_path);
  must_open(mout, meta_path);
  mout << meta.dump(2) << '\n';
}

std::optional<SyntheticSpec> parse_synthetic(const std::string& spec) {
  constexpr std::string_view prefix = "quad:";
  if (spec.rfind(prefix, 0) != 0) return std::nullopt;
  auto parse_list = [](const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
      vals.push_back(std::stod(item));
    return vals;
  };
  std::vector<double> diag, b;
  double sigma = 0.0;
  std::stringstream ss(spec.substr(prefix.size()));
  std::string part;
  while (std::getline(ss, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("synthetic spec: expected key=value in '" +
                                  part + "'");
    const std::string key = part.substr(0, eq), val = part.substr(eq + 1);
    if (key == "diag")
      diag = parse_list(val);
    else if (key == "b")
      b = parse_list(val);
    else if (key == "sigma")
      sigma = std::stod(val);
    else
      throw std::invalid_argument("synthetic spec: unknown key '" + key + "'");
  }
  if (diag.empty())
    throw std::invalid_argument("synthetic spec: diag=... is required");
  Eigen::VectorXd dv = Eigen::Map<Eigen::VectorXd>(diag.data(), diag.size());
  Eigen::VectorXd bv;
  if (!b.empty()) {
    if (b.size() != diag.size())
      throw std::invalid_argument("synthetic spec: b and diag sizes differ");
    bv = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
  }
  return SyntheticSpec{problem::QuadraticProblem(std::move(dv), std::move(bv)),
                       sigma};
}

}  // namespace trishbb::harness
