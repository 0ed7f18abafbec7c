#include "rlvr/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "rlvr/config.hpp"
#include "rlvr/diagnostics.hpp"
#include "rlvr/variance.hpp"
#include "rlvr/verify.hpp"

namespace fs = std::filesystem;

namespace rlvr {
namespace {

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace

std::string fnv1a_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return buf;
}

int cmd_train(const TrainArgs& args, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(args.config_path);
    for (const auto& kv : args.overrides) apply_override(cfg, kv);
    if (args.seeds) cfg.n_seeds = *args.seeds;
    cfg.validate();
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }

  // Output root: --out beats the config value, which beats the environment
  // default root.
  fs::path out_dir;
  if (!args.out_dir.empty()) {
    out_dir = args.out_dir;
  } else if (!cfg.output_dir.empty()) {
    out_dir = cfg.output_dir;
  } else if (const char* root = std::getenv("RLVR_LAB_OUT")) {
    out_dir = fs::path(root) / "run";
  } else {
    out_dir = "rlvr_run";
  }
  fs::create_directories(out_dir);

  std::optional<TrainState> resume_state;
  if (!args.resume_path.empty()) {
    if (cfg.n_seeds != 1) {
      log << "config error: --resume requires a single seed\n";
      return 2;
    }
    std::ifstream in(args.resume_path, std::ios::binary);
    if (!in) {
      log << "config error: cannot open checkpoint " << args.resume_path << '\n';
      return 2;
    }
    resume_state = load_checkpoint(in);
  }

  std::vector<std::string> artifacts;
  {
    const auto tasks = generate_tasks(cfg.env, cfg.n_tasks);
    std::ostringstream ts;
    export_tasks(ts, tasks);
    write_file(out_dir / "tasks.txt", ts.str());
    artifacts.push_back("tasks.txt");
  }

  const auto opts_base = cfg.run_options();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < cfg.n_seeds; ++k) seeds.push_back(cfg.algorithm.seed + k);

  for (std::uint64_t seed : seeds) {
    AlgorithmConfig acfg = cfg.algorithm;
    acfg.seed = seed;
    RunOptions opts = opts_base;

    const std::string ckpt_prefix = "checkpoint_seed" + std::to_string(seed);
    if (cfg.checkpoint_every > 0) {
      opts.on_step = [&](const TrainState& st) {
        if (st.step % cfg.checkpoint_every == 0 && st.step < opts_base.n_steps) {
          const auto name = ckpt_prefix + "_step" + std::to_string(st.step) + ".bin";
          std::ofstream out(out_dir / name, std::ios::binary);
          save_checkpoint(out, st);
          artifacts.push_back(name);
        }
      };
    }

    TrainState state;
    try {
      state = resume_state ? resume_training(*resume_state, acfg, cfg.env, opts)
                           : run_training(acfg, cfg.env, opts);
    } catch (const TrainingAborted& e) {
      const auto dump_name = "abort_seed" + std::to_string(seed) + ".txt";
      write_file(out_dir / dump_name, std::string(e.what()) + "\n" + e.dump());
      log << "training aborted: " << e.what() << " (diagnostics: " << (out_dir / dump_name).string()
          << ")\n";
      return 3;
    }

    const auto csv_name = "metrics_seed" + std::to_string(seed) + ".csv";
    {
      std::ofstream out(out_dir / csv_name, std::ios::binary);
      write_metrics_csv(out, state.metrics);
    }
    artifacts.push_back(csv_name);

    const auto ckpt_name = ckpt_prefix + ".bin";
    {
      std::ofstream out(out_dir / ckpt_name, std::ios::binary);
      save_checkpoint(out, state);
    }
    artifacts.push_back(ckpt_name);
    log << "seed " << seed << ": " << state.step << " steps, final mean_reward_on="
        << (state.metrics.empty() ? 0.0 : state.metrics.back().mean_reward_on) << '\n';
  }

  // Manifest: resolved config, seed list, artifact hashes. Rerunning the
  // [config] block reproduces every artifact byte for byte.
  std::ostringstream man;
  man << "[config]\n";
  for (const auto& [k, v] : resolved_key_values(cfg)) man << k << " = " << v << '\n';
  man << "[overrides]\n";
  for (const auto& kv : args.overrides) man << "set " << kv << '\n';
  man << "[seeds]\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) man << (i ? "," : "") << seeds[i];
  man << "\n[artifacts]\n";
  for (const auto& a : artifacts)
    man << a << " fnv64=" << fnv1a_file_hex((out_dir / a).string()) << '\n';
  write_file(out_dir / "manifest.txt", man.str());
  log << "wrote " << (out_dir / "manifest.txt").string() << '\n';
  return 0;
}

namespace {

std::string manifest_value(const fs::path& manifest, const std::string& key) {
  std::ifstream in(manifest);
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  return "";
}

}  // namespace

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                std::ostream& log) {
  if (run_dirs.size() < 2) {
    log << "compare: need at least 2 run directories\n";
    return 2;
  }
  std::vector<std::pair<std::string, std::vector<MetricsRecord>>> runs;
  for (const auto& dir : run_dirs) {
    const fs::path manifest = fs::path(dir) / "manifest.txt";
    if (!fs::exists(manifest)) {
      log << "compare: missing manifest in " << dir << '\n';
      return 2;
    }
    const std::string label = fs::path(dir).filename().string();
    bool any = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("metrics_seed", 0) == 0 && entry.path().extension() == ".csv") {
        std::ifstream in(entry.path());
        runs.emplace_back(label, read_metrics_csv(in));
        any = true;
      }
    }
    if (!any) {
      log << "compare: no metrics CSVs in " << dir << '\n';
      return 2;
    }
    log << dir << ": algorithm=" << manifest_value(manifest, "algorithm.name") << '\n';
  }
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::ostringstream warnings;
  const auto rows = compare_runs(runs, &warnings);
  if (!warnings.str().empty()) log << warnings.str();

  const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(out);

  std::ostringstream csv;
  csv << "label,n_series,final_window_reward,peak_reward,auc,final_entropy\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.12g,%.12g,%.12g,%.12g\n", r.label.c_str(), r.n_series,
                  r.final_window_reward, r.peak_reward, r.auc, r.final_entropy);
    csv << buf;
  }
  write_file(out / "compare.csv", csv.str());

  std::ostringstream txt;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%-24s series=%d final_window_reward=%.4f peak=%.4f auc=%.4f final_entropy=%.4f\n",
                  r.label.c_str(), r.n_series, r.final_window_reward, r.peak_reward, r.auc,
                  r.final_entropy);
    txt << buf;
  }
  write_file(out / "compare.txt", txt.str());
  log << txt.str();
  log << "wrote " << (out / "compare.csv").string() << '\n';
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& out_dir, std::uint64_t seed,
               std::ostream& log) {
  SuiteReport rep;
  std::vector<VarianceReport> variance_rows;
  if (suite == "Gradients") {
    rep = verify_gradients(seed);
    // The per-logit bound rides with the gradient suite.
    auto bound = verify_gradient_bound(seed);
    for (auto& c : bound.checks) rep.checks.push_back(std::move(c));
  } else if (suite == "Variance") {
    rep = verify_variance(seed, &variance_rows);
  } else if (suite == "Theorem") {
    rep = verify_theorem(seed);
  } else if (suite == "Advantages") {
    rep = verify_advantages(seed);
  } else {
    log << "verify: unknown suite '" << suite
        << "' (expected Gradients|Variance|Theorem|Advantages)\n";
    return 2;
  }

  std::ostringstream failures;
  for (const auto& c : rep.checks) {
    log << (c.passed ? "[PASS] " : "[FAIL] ") << rep.suite << '/' << c.name << "  " << c.detail
        << '\n';
    if (!c.passed) failures << rep.suite << '/' << c.name << '\t' << c.detail << '\n';
  }

  if (!out_dir.empty()) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (!variance_rows.empty()) {
      std::ofstream vcsv(out / "variance.csv", std::ios::binary);
      write_variance_csv(vcsv, variance_rows);
      log << "wrote " << (out / "variance.csv").string() << '\n';
    }
    if (!failures.str().empty()) write_file(out / ("failures_" + rep.suite + ".txt"), failures.str());
  }
  return rep.all_passed() ? 0 : 1;
}

}  // namespace rlvr
