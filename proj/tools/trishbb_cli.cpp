// Command-line front end: experiment sweeps, G estimation, dataset
// validation, and Monte-Carlo guarantee checks.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "trishbb/harness.hpp"
#include "trishbb/rng.hpp"
#include "trishbb/theory.hpp"

namespace {

using nlohmann::json;
using namespace trishbb;

struct CliSettings {
  harness::ExperimentSpec spec;
  std::string data_root = "data";
  std::string out_dir = "out";
  std::string grid = "paper";
  std::string profile = "desk";
  std::string format = "csv";
  std::string theory_check;  // empty = sweep mode
  std::string variants_csv = "trish,v1,v2,v3";
  double lr = 0.1;
  // single-config knobs for --theory-check
  double alpha = 0.06, gamma1 = 1.0, gamma2 = 1.0;
  double mu0 = 0.05, mu_min = 0.05, mu_max = 0.06;
  int m = 20;
  int mc_runs = 200;
  long mc_iters = 2000;
  double mc_tol = 0.1;
};

// --config JSON mirrors every flag under the same (snake_case) names; flags
// parsed afterwards override the file.
void apply_config_file(const std::string& path, CliSettings& s) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError("cannot open config: " + path);
  json doc = json::parse(in);
  auto get = [&](const char* key, auto& slot) {
    if (doc.contains(key)) doc.at(key).get_to(slot);
  };
  get("dataset", s.spec.dataset);
  get("variants", s.variants_csv);
  get("grid", s.grid);
  get("profile", s.profile);
  get("format", s.format);
  get("data_root", s.data_root);
  get("out", s.out_dir);
  get("seeds", s.spec.seeds);
  get("master_seed", s.spec.master_seed);
  get("epochs", s.spec.epochs);
  get("batch_size", s.spec.batch_size);
  get("alphas", s.spec.alphas);
  get("gamma1_multiples", s.spec.gamma1_multiples);
  get("gamma2_multiples", s.spec.gamma2_multiples);
  get("mu0", s.spec.mu0);
  get("mu_min", s.spec.mu_min);
  get("mu_max", s.spec.mu_max);
  get("m_v1", s.spec.m_v1);
  get("m_is_blocks", s.spec.m_is_blocks);
  get("m_fixed", s.spec.m_fixed);
  get("eta", s.spec.eta);
  get("m_F", s.spec.m_F);
  get("g_lr", s.spec.g_lr);
  get("sgdbb_mu0", s.spec.sgdbb_mu0);
  get("sgdbb_mu_min", s.spec.sgdbb_mu_min);
  get("sgdbb_mu_max", s.spec.sgdbb_mu_max);
  get("threads", s.spec.threads);
  get("theory_check", s.theory_check);
  get("lr", s.lr);
  get("alpha", s.alpha);
  get("gamma1", s.gamma1);
  get("gamma2", s.gamma2);
  get("theory_mu0", s.mu0);
  get("theory_mu_min", s.mu_min);
  get("theory_mu_max", s.mu_max);
  get("m", s.m);
  get("mc_runs", s.mc_runs);
  get("mc_iters", s.mc_iters);
  get("mc_tol", s.mc_tol);
}

std::vector<opt::Variant> parse_variants(const std::string& csv) {
  std::vector<opt::Variant> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto v = opt::variant_from_string(item);
    if (!v)
      throw CLI::ValidationError("--variants",
                                 "unknown variant '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty())
    throw CLI::ValidationError("--variants", "need at least one variant");
  return out;
}

int do_theory_check(const CliSettings& s) {
  const auto synth = harness::parse_synthetic(s.spec.dataset);
  if (!synth) {
    std::cerr << "--theory-check needs a synthetic problem, e.g. "
                 "--dataset 'quad:diag=1,2;sigma=0.1'\n";
    return 1;
  }
  const auto regime = theory::regime_from_string(s.theory_check);
  if (!regime) {
    std::cerr << "unknown regime '" << s.theory_check
              << "' (biased-pl, biased-nonconvex, unbiased-pl, "
                 "unbiased-nonconvex)\n";
    return 1;
  }
  opt::TripletConfig cfg;
  cfg.alpha = s.alpha;
  cfg.gamma1 = s.gamma1;
  cfg.gamma2 = s.gamma2;
  cfg.mu0 = s.mu0;
  cfg.mu_min = s.mu_min;
  cfg.mu_max = s.mu_max;
  cfg.m = s.m;

  const auto& q = synth->problem;
  const double Mg = synth->sigma * synth->sigma * q.n();
  const auto A = theory::AssumptionConstants::unbiased_quadratic(q, Mg);
  const auto report = theory::constants(cfg, A);
  const auto adm = theory::admissible_alpha(*regime, cfg, A);

  std::cout << "regime            " << theory::to_string(*regime) << '\n'
            << "L, c, f*          " << A.L << ", " << A.c << ", " << A.f_star
            << '\n'
            << "M_g               " << Mg << '\n'
            << "h1, h2, rho       " << report.h1 << ", " << report.h2 << ", "
            << report.rho << '\n'
            << "theta1/2/3        " << report.theta1 << ", " << report.theta2
            << ", " << report.theta3 << '\n'
            << "alpha bound       " << (adm.alpha_strict ? "< " : "<= ")
            << adm.alpha_bound << " (alpha = " << cfg.alpha << ")\n"
            << "mu_min lower      " << adm.mu_min_lower
            << " (mu_min = " << cfg.mu_min << ")\n"
            << "admissible        " << (adm.pass ? "yes" : "no") << '\n';
  if (!adm.pass) return 1;

  theory::McOptions mo;
  mo.runs = s.mc_runs;
  mo.iterations = s.mc_iters;
  mo.tolerance = s.mc_tol;
  mo.master_seed = s.spec.master_seed;
  const auto check =
      theory::monte_carlo_check(*regime, q, synth->sigma, cfg, mo);
  std::cout << "limit             " << check.bound << '\n'
            << "empirical mean    " << check.empirical << " (std error "
            << check.std_error << ", " << check.runs << " runs x "
            << check.iterations << " iters)\n"
            << "failed runs       " << check.failed_runs << '\n'
            << "pass              " << (check.pass ? "yes" : "no") << '\n';

  if (!s.out_dir.empty()) {
    std::filesystem::create_directories(s.out_dir);
    json doc{{"regime", theory::to_string(*regime)},
             {"L", A.L},
             {"c", A.c},
             {"f_star", A.f_star},
             {"Mg", Mg},
             {"h1", report.h1},
             {"h2", report.h2},
             {"rho", report.rho},
             {"theta1", report.theta1},
             {"theta2", report.theta2},
             {"theta3", report.theta3},
             {"alpha_bound", adm.alpha_bound},
             {"alpha_strict", adm.alpha_strict},
             {"mu_min_lower", adm.mu_min_lower},
             {"admissible", adm.pass},
             {"limit", check.bound},
             {"empirical", check.empirical},
             {"std_error", check.std_error},
             {"runs", check.runs},
             {"iterations", check.iterations},
             {"failed_runs", check.failed_runs},
             {"tolerance", check.tolerance},
             {"pass", check.pass}};
    const auto p = std::filesystem::path(s.out_dir) / "theory_report.json";
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << doc.dump(2) << '\n';
  }
  return check.pass ? 0 : 1;
}

int do_run(CliSettings& s, bool seeds_given) {
  if (!s.theory_check.empty()) return do_theory_check(s);
  if (harness::parse_synthetic(s.spec.dataset)) {
    std::cerr << "sweeps need a dataset from the manifest; synthetic "
                 "problems are for --theory-check\n";
    return 1;
  }
  if (s.grid == "paper") {
    const harness::ExperimentSpec defaults;
    s.spec.alphas = defaults.alphas;
    s.spec.gamma1_multiples = defaults.gamma1_multiples;
    s.spec.gamma2_multiples = defaults.gamma2_multiples;
  } else if (s.grid != "custom") {
    std::cerr << "--grid must be 'paper' or 'custom'\n";
    return 1;
  }
  if (!seeds_given) s.spec.seeds = s.profile == "paper" ? 50 : 10;
  s.spec.variants = parse_variants(s.variants_csv);

  const auto mf = harness::Manifest::load(s.data_root + "/manifest.json");
  const auto& entry = mf.at(s.spec.dataset);
  std::cerr << "loading " << entry.name << "...\n";
  const data::Dataset ds = harness::load_entry(mf, entry);
  std::cerr << "  train " << ds.train.size() << ", test " << ds.test.size()
            << ", d " << ds.d << '\n';

  const double G =
      harness::estimate_G(ds.train, ds.d, s.spec.batch_size, s.spec.g_lr,
                          harness::g_seed(s.spec.master_seed));
  std::cerr << "G = " << G << " (plain SG, lr " << s.spec.g_lr << ")\n";

  const auto records = harness::run_sweep(ds, s.spec, G);
  const auto aggs = harness::aggregate(records);
  const auto bests = harness::best_by_alpha(records, aggs);
  harness::emit(records, aggs, bests, s.spec, G,
                s.format == "json" ? harness::EmitFormat::json
                                   : harness::EmitFormat::csv,
                s.out_dir);

  std::cout << "variant   alpha      best_acc  pct_bb\n";
  for (const auto& b : bests) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-9s %-10.4g %-9.4f %-7.2f\n",
                  opt::to_string(b.variant), b.alpha, 100.0 * b.best_accuracy,
                  b.mean_pct_bb);
    std::cout << line;
  }
  for (const auto v : s.spec.variants)
    std::cout << "accuracy ratio " << opt::to_string(v) << " = "
              << harness::accuracy_ratio(bests, v) << '\n';
  long failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  if (failed > 0)
    std::cout << failed << " run(s) failed; see meta.json\n";
  std::cout << "wrote " << s.out_dir << "/\n";
  return 0;
}

int do_estimate_g(const CliSettings& s) {
  const auto mf = harness::Manifest::load(s.data_root + "/manifest.json");
  const auto& entry = mf.at(s.spec.dataset);
  const data::Dataset ds = harness::load_entry(mf, entry);
  const double G =
      harness::estimate_G(ds.train, ds.d, s.spec.batch_size, s.lr,
                          harness::g_seed(s.spec.master_seed));
  std::cout << G << '\n';
  return 0;
}

int do_validate(const CliSettings& s) {
  const auto mf = harness::Manifest::load(s.data_root + "/manifest.json");
  const auto& entry = mf.at(s.spec.dataset);
  const data::Dataset ds = harness::load_entry(mf, entry);
  data::ExpectedMetadata expected{entry.n_train, entry.n_test, entry.d};
  const auto report = data::validate_metadata(ds, expected);
  if (report.pass) {
    std::cout << entry.name << ": metadata ok (train "
              << ds.train.size() << ", test " << ds.test.size() << ", d "
              << ds.d << ")\n";
    return 0;
  }
  std::cout << entry.name << ": metadata mismatch\n";
  for (const auto& m : report.mismatches) std::cout << "  " << m << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TRishBB experiment harness"};
  app.require_subcommand(1);

  CliSettings s;

  // Pre-scan for --config so its values become defaults the flags override.
  try {
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") apply_config_file(argv[i + 1], s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  std::string config_path;  // consumed above; registered so CLI11 accepts it

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config mirroring the flags");
    cmd->add_option("--data-root", s.data_root,
                    "directory containing manifest.json");
    cmd->add_option("--dataset", s.spec.dataset,
                    "dataset name or quad:diag=...;sigma=...");
    cmd->add_option("--batch-size", s.spec.batch_size, "minibatch size");
    cmd->add_option("--master-seed", s.spec.master_seed,
                    "root of the predetermined seed sequence");
  };

  auto* run = app.add_subcommand("run", "run a sweep or a guarantee check");
  add_common(run);
  run->add_option("--variants", s.variants_csv,
                  "comma list: trish,v1,v2,v3,sgdbb");
  run->add_option("--grid", s.grid, "paper | custom");
  auto* seeds_opt = run->add_option("--seeds", s.spec.seeds, "seed count");
  run->add_option("--epochs", s.spec.epochs, "epoch budget");
  run->add_option("--out", s.out_dir, "output directory");
  run->add_option("--profile", s.profile, "desk (10 seeds) | paper (50)");
  run->add_option("--format", s.format, "csv | json");
  run->add_option("--threads", s.spec.threads, "0 = hardware concurrency");
  run->add_option("--theory-check", s.theory_check,
                  "regime: biased-pl | biased-nonconvex | unbiased-pl | "
                  "unbiased-nonconvex");
  run->add_option("--alpha", s.alpha, "theory-check alpha");
  run->add_option("--gamma1", s.gamma1, "theory-check gamma1");
  run->add_option("--gamma2", s.gamma2, "theory-check gamma2");
  run->add_option("--mu0", s.mu0, "theory-check mu0");
  run->add_option("--mu-min", s.mu_min, "theory-check mu_min");
  run->add_option("--mu-max", s.mu_max, "theory-check mu_max");
  run->add_option("--m", s.m, "theory-check cycle length");
  run->add_option("--mc-runs", s.mc_runs, "Monte-Carlo run count");
  run->add_option("--mc-iters", s.mc_iters, "iterations per run");
  run->add_option("--mc-tol", s.mc_tol, "one-sided tolerance");

  auto* estg = app.add_subcommand("estimate-g",
                                  "mean gradient norm over one plain-SG epoch");
  add_common(estg);
  estg->add_option("--lr", s.lr, "plain-SG learning rate");

  auto* val = app.add_subcommand("validate", "check dataset metadata");
  add_common(val);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(s, seeds_opt->count() > 0);
    if (estg->parsed()) return do_estimate_g(s);
    if (val->parsed()) return do_validate(s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
