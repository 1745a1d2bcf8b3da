// Command-line entry point: sweep, verify, synth, metrics.
#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "sparsesdf/backtest.hpp"
#include "sparsesdf/config.hpp"
#include "sparsesdf/error.hpp"
#include "sparsesdf/features.hpp"
#include "sparsesdf/verify.hpp"

#ifndef SPARSESDF_VERSION
#define SPARSESDF_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsesdf;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

class Timer {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write " + file.string());
}

RunConfig load(const CommonFlags& f) {
  RunConfig cfg = load_config(f.config);
  if (f.seed) set_seed(cfg, *f.seed);
  if (f.threads) {
    if (*f.threads < 1) throw ValidationError("--threads must be >= 1");
    cfg.threads = *f.threads;
    cfg.sweep.threads = cfg.verify.threads = *f.threads;
  }
  return cfg;
}

// config.json reruns the command as-is; manifest.json records what happened.
void write_run_files(const fs::path& dir, const std::string& command, const RunConfig& cfg, const json& timing,
                     const json& outputs) {
  write_json(dir / "config.json", to_json(cfg));
  write_json(dir / "manifest.json", {{"command", command},
                                     {"code_version", SPARSESDF_VERSION},
                                     {"master_seed", cfg.seed},
                                     {"threads", cfg.sweep.threads},
                                     {"config", to_json(cfg)},
                                     {"timing_seconds", timing},
                                     {"outputs", outputs}});
}

int cmd_sweep(const CommonFlags& f) {
  Timer timer;
  RunConfig cfg = load(f);
  const auto panel = resolve_panel(cfg);
  fill_oos_range(cfg, panel.panel);
  const double t_load = timer.lap();
  const SweepResult res = run_sweep(panel.panel, cfg.sweep);
  const double t_sweep = timer.lap();
  const fs::path dir(f.out);
  write_sweep(res, dir, {{"panel_months", panel.panel.size()}});
  write_curves_csv(res, dir / "curves.csv");
  json outputs{"summary.json", "supports.csv", "meta.json", "curves.csv", "config.json", "manifest.json"};
  for (double c : cfg.sweep.c_grid) {
    for (Method m : cfg.sweep.methods) outputs.push_back("returns_" + format_c(c) + "_" + to_string(m) + ".csv");
  }
  const double t_write = timer.lap();
  write_run_files(dir, "sweep", cfg, {{"load", t_load}, {"sweep", t_sweep}, {"write", t_write}}, outputs);
  for (const MethodSummary& s : res.summary) {
    if (s.degraded) {
      std::cerr << "warning: degraded cell c=" << format_c(s.c) << " method=" << to_string(s.method) << ": "
                << s.failed_windows << " of " << s.total_windows << " windows failed, " << s.draws_used << " draws used\n";
    }
  }
  std::cout << "sweep: " << res.summary.size() << " cells over " << res.oos_months.size() << " months in " << res.seconds
            << " s -> " << (dir / "curves.csv").string() << "\n";
  return kOk;
}

int cmd_verify(const CommonFlags& f, const std::string& fault) {
  Timer timer;
  RunConfig cfg = load(f);
  if (!fault.empty()) cfg.verify.fault = fault;
  cfg.verify.validate();
  const TheoryReport rep = run_theory_suite(cfg.verify);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  write_json(dir / "theory_report.json", to_json(rep));
  write_run_files(dir, "verify", cfg, {{"verify", timer.lap()}}, json{"theory_report.json", "config.json", "manifest.json"});
  for (const PropertyResult& p : rep.properties) {
    std::cout << (p.passed ? "PASS " : "FAIL ") << p.name << " (" << p.instances << " instances, worst " << p.worst
              << ", tol " << p.tolerance << ")";
    if (p.failing_seed) std::cout << " failing seed " << *p.failing_seed << ": " << p.note;
    std::cout << "\n";
  }
  std::cout << "gap table (" << rep.gap_table.mean_oracle << " mean):\n";
  for (const GapLevel& lv : rep.gap_table.levels) {
    std::cout << "  P=" << lv.P << " mu_perp=" << lv.mu_perp_norm << " h=" << lv.h_norm << " cos=" << lv.cos_theta
              << " gap=" << lv.gap << "\n";
  }
  return rep.all_passed ? kOk : kFailed;
}

int cmd_synth(const CommonFlags& f) {
  Timer timer;
  RunConfig cfg = load(f);
  if (cfg.panel.kind != PanelSource::Kind::Synthetic) throw ValidationError("synth needs a synthetic panel config");
  const auto panel = resolve_panel(cfg);
  const SyntheticPanel& synth = *panel.synthetic;
  const fs::path dir(f.out);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "panel.csv", std::ios::binary);
    write_panel_csv(out, synth.panel);
    if (!out) throw Error("cannot write " + (dir / "panel.csv").string());
  }
  json loadings = json::array();
  for (int p : synth.support) loadings.push_back({{"index", p}, {"lambda", synth.true_lambda(p)}});
  write_json(dir / "true_lambda.json", {{"P_max", synth.true_lambda.size()},
                                        {"k_true", synth.support.size()},
                                        {"support", loadings},
                                        {"support_draw", to_json(synth.support_draw)}});
  write_run_files(dir, "synth", cfg, {{"synth", timer.lap()}}, json{"panel.csv", "true_lambda.json", "config.json", "manifest.json"});
  std::cout << "synth: " << synth.panel.size() << " months -> " << (dir / "panel.csv").string() << "\n";
  return kOk;
}

int cmd_metrics(const CommonFlags& f, const std::string& run_dir) {
  Timer timer;
  RunConfig cfg = load(f);
  if (cfg.oos_from_panel) {
    const auto panel = resolve_panel(cfg);
    fill_oos_range(cfg, panel.panel);
  }
  cfg.sweep.validate();
  const auto summary = metrics_from_returns(run_dir, cfg.sweep);
  const fs::path dir(f.out.empty() ? fs::path(run_dir) / "recomputed" : fs::path(f.out));
  fs::create_directories(dir);
  write_curves_csv(summary, cfg.sweep.metrics, dir / "curves.csv");
  write_run_files(dir, "metrics", cfg, {{"metrics", timer.lap()}}, json{"curves.csv", "config.json", "manifest.json"});
  std::cout << "metrics: " << summary.size() << " cells -> " << (dir / "curves.csv").string() << "\n";
  return kOk;
}

int report(const char* type, const std::exception& e, int code) {
  std::cerr << json{{"error", {{"type", type}, {"message", e.what()}}}}.dump() << "\n";
  return code;
}

void add_common(CLI::App* sub, CommonFlags& f, const std::string& default_out) {
  sub->add_option("--config", f.config, "JSON config file")->required()->check(CLI::ExistingFile);
  f.out = default_out;
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  sub->add_option("--seed", f.seed, "master seed, overrides the config and SPARSESDF_SEED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse and dense interpolating SDF estimation"};
  app.set_version_flag("--version", std::string(SPARSESDF_VERSION));
  app.require_subcommand(1);

  CommonFlags sweep_f, verify_f, synth_f, metrics_f;
  std::string fault;
  std::string run_dir;
  auto* sweep = app.add_subcommand("sweep", "rolling out-of-sample sweep over the complexity grid");
  add_common(sweep, sweep_f, "runs/sweep");
  auto* verify = app.add_subcommand("verify", "randomized theory checks; writes theory_report.json");
  add_common(verify, verify_f, "runs/verify");
  verify->add_option("--fault", fault, "inject a fault: zero_kernel_move");
  auto* synth = app.add_subcommand("synth", "write a planted-kernel synthetic panel");
  add_common(synth, synth_f, "runs/synth");
  auto* metrics = app.add_subcommand("metrics", "recompute metrics from a sweep directory's returns files");
  add_common(metrics, metrics_f, "");
  metrics->add_option("--in", run_dir, "sweep output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*sweep) return cmd_sweep(sweep_f);
    if (*verify) return cmd_verify(verify_f, fault);
    if (*synth) return cmd_synth(synth_f);
    if (*metrics) return cmd_metrics(metrics_f, run_dir);
  } catch (const ValidationError& e) {
    return report("ValidationError", e, kBadInput);
  } catch (const ParseError& e) {
    return report("ParseError", e, kBadInput);
  } catch (const SweepError& e) {
    return report("SweepError", e, kFailed);
  } catch (const Error& e) {
    return report("Error", e, kFailed);
  } catch (const std::exception& e) {
    return report("std::exception", e, kFailed);
  }
  return kBadInput;
}
