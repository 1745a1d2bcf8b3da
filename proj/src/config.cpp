#include "sparsesdf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "sparsesdf/error.hpp"
#include "sparsesdf/rng.hpp"

namespace sparsesdf {

namespace {

using nlohmann::json;

// Reads keys from one object and rejects any it did not consume.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(where_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError("unknown key " + where_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_panel(const json& j, const std::filesystem::path& base_dir, PanelSource& p) {
  Reader r(j, "panel");
  std::string source = "synthetic";
  r.get("source", source);
  if (source == "csv") {
    p.kind = PanelSource::Kind::Csv;
    std::string path;
    r.get("path", path);
    if (path.empty()) throw ValidationError("panel.path is required for csv panels");
    p.path = std::filesystem::path(path);
    if (p.path.is_relative() && !base_dir.empty()) p.path = base_dir / p.path;
    r.get("max_missing_fraction", p.load.max_missing_fraction);
    r.get("D", p.load.D);
    r.get("rank_standardize", p.rank_standardize);
  } else if (source == "synthetic") {
    p.kind = PanelSource::Kind::Synthetic;
    r.get("months", p.months);
    r.get("assets", p.assets);
    r.get("characteristics", p.characteristics);
    r.get("k_true", p.planted.k_true);
    r.get("support_P", p.planted.support_space.P);
    r.get("support_bandwidth_grid", p.planted.support_space.bandwidth_grid);
    r.get("signal_scale", p.planted.signal_scale);
    r.get("noise_vol", p.planted.noise_vol);
    r.get("support", p.planted.support);
    r.get("window", p.planted.window);
    if (p.months < 2 || p.assets < 1 || p.characteristics < 1) {
      throw ValidationError("synthetic panel needs months >= 2, assets >= 1, characteristics >= 1");
    }
    p.planted.support_space.D = p.characteristics;
  } else {
    throw ValidationError("panel.source must be 'synthetic' or 'csv', got '" + source + "'");
  }
  r.finish();
}

void read_sweep(const json& j, RunConfig& cfg) {
  Reader r(j, "sweep");
  SweepConfig& s = cfg.sweep;
  r.get("T", s.T);
  r.get("c_grid", s.c_grid);
  r.get("n_draws", s.n_draws);
  if (r.has("methods")) {
    std::vector<std::string> names;
    r.get("methods", names);
    s.methods.clear();
    for (const auto& n : names) s.methods.push_back(method_from_string(n));
  }
  r.get("oos_start", s.oos_start);
  r.get("oos_end", s.oos_end);
  r.get("bandwidth_grid", s.bandwidth_grid);
  r.get("low_c_alpha", s.low_c_alpha);
  if (r.has("solver")) s.solver = solver_options_from_json(r.raw("solver"), s.solver);
  r.finish();
  cfg.oos_from_panel = s.oos_start == 0 && s.oos_end == 0;
  if (!cfg.oos_from_panel && (s.oos_start == 0 || s.oos_end == 0)) {
    throw ValidationError("sweep.oos_start and sweep.oos_end must be given together");
  }
}

void read_verify(const json& j, VerifyConfig& v) {
  Reader r(j, "verify");
  r.get("support_instances", v.support_instances);
  r.get("support_T", v.support_T);
  r.get("max_ratio", v.max_ratio);
  r.get("limit_instances", v.limit_instances);
  r.get("gap_instances", v.gap_instances);
  r.get("monotone_seeds", v.monotone_seeds);
  r.get("scale_instances", v.scale_instances);
  r.get("feasible_instances", v.feasible_instances);
  r.get("feasible_directions", v.feasible_directions);
  r.get("table_T", v.table_T);
  r.get("table_D", v.table_D);
  r.get("fault", v.fault);
  if (r.has("solver")) v.solver = solver_options_from_json(r.raw("solver"), v.solver);
  r.finish();
}

int default_threads() { return static_cast<int>(std::max(1U, std::thread::hardware_concurrency())); }

}  // namespace

void set_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.panel.planted.seed = derive_seed(seed, 1);
  cfg.panel.planted.support_space.seed = derive_seed(seed, 2);
  cfg.sweep.seed = derive_seed(seed, 3);
  cfg.verify.seed = derive_seed(seed, 4);
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.source = j;
  Reader r(j, "config");
  std::uint64_t seed = 0;
  r.get("seed", seed);
  if (r.has("threads")) {
    int t = 0;
    r.get("threads", t);
    cfg.threads = t;
  }
  if (r.has("panel")) read_panel(r.raw("panel"), base_dir, cfg.panel);
  if (r.has("sweep")) {
    read_sweep(r.raw("sweep"), cfg);
  } else {
    cfg.oos_from_panel = true;
  }
  if (r.has("metrics")) {
    Reader m(r.raw("metrics"), "metrics");
    m.get("q_grid", cfg.sweep.metrics.q_grid);
    m.get("gammas", cfg.sweep.metrics.gammas);
    m.finish();
    cfg.sweep.metrics.validate();
  }
  if (r.has("verify")) read_verify(r.raw("verify"), cfg.verify);
  r.finish();

  if (cfg.panel.kind == PanelSource::Kind::Synthetic && cfg.panel.planted.window == 0) {
    cfg.panel.planted.window = cfg.sweep.T;
  }
  set_seed(cfg, seed);
  const int threads = cfg.threads.value_or(default_threads());
  if (threads < 1) throw ValidationError("threads must be >= 1");
  cfg.sweep.threads = threads;
  cfg.verify.threads = threads;
  cfg.verify.validate();
  return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* s = std::getenv("SPARSESDF_SEED"); s && *s) {
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (*end != '\0') throw ValidationError(std::string("SPARSESDF_SEED is not an unsigned integer: ") + s);
    set_seed(cfg, v);
  }
  if (const char* s = std::getenv("SPARSESDF_THREADS"); s && *s) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (*end != '\0' || v < 1) throw ValidationError(std::string("SPARSESDF_THREADS must be a positive integer: ") + s);
    cfg.threads = static_cast<int>(v);
    cfg.sweep.threads = cfg.verify.threads = static_cast<int>(v);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg = parse_config(j, path.parent_path());
  apply_env_overrides(cfg);
  return cfg;
}

ResolvedPanel resolve_panel(const RunConfig& cfg) {
  ResolvedPanel out;
  const PanelSource& p = cfg.panel;
  if (p.kind == PanelSource::Kind::Csv) {
    out.panel = load_panel(p.path, p.load);
    if (p.rank_standardize) out.panel = rank_standardize(out.panel);
  } else {
    out.synthetic = synth_panel(p.planted, p.months, p.assets, p.characteristics);
    out.panel = out.synthetic->panel;
  }
  return out;
}

void fill_oos_range(RunConfig& cfg, const CharacteristicPanel& panel) {
  if (!cfg.oos_from_panel) return;
  const auto T = static_cast<std::size_t>(cfg.sweep.T);
  if (panel.size() < T + 1) {
    throw ValidationError("panel has " + std::to_string(panel.size()) + " months; T=" + std::to_string(T) +
                          " needs at least " + std::to_string(T + 1));
  }
  cfg.sweep.oos_start = next_month(panel[T].month_id);
  cfg.sweep.oos_end = next_month(panel[panel.size() - 1].month_id);
}

json to_json(const RunConfig& cfg) {
  json panel;
  const PanelSource& p = cfg.panel;
  if (p.kind == PanelSource::Kind::Csv) {
    panel = {{"source", "csv"},
             {"path", std::filesystem::absolute(p.path).string()},
             {"max_missing_fraction", p.load.max_missing_fraction},
             {"D", p.load.D},
             {"rank_standardize", p.rank_standardize}};
  } else {
    panel = {{"source", "synthetic"},
             {"months", p.months},
             {"assets", p.assets},
             {"characteristics", p.characteristics},
             {"k_true", p.planted.k_true},
             {"support_P", p.planted.support_space.P},
             {"support_bandwidth_grid", p.planted.support_space.bandwidth_grid},
             {"signal_scale", p.planted.signal_scale},
             {"noise_vol", p.planted.noise_vol},
             {"support", p.planted.support},
             {"window", p.planted.window}};
  }
  const SweepConfig& s = cfg.sweep;
  std::vector<std::string> methods;
  for (Method m : s.methods) methods.push_back(to_string(m));
  json sweep{{"T", s.T},
             {"c_grid", s.c_grid},
             {"n_draws", s.n_draws},
             {"methods", methods},
             {"bandwidth_grid", s.bandwidth_grid},
             {"low_c_alpha", s.low_c_alpha},
             {"solver", to_json(s.solver)}};
  if (s.oos_start != 0) {
    sweep["oos_start"] = s.oos_start;
    sweep["oos_end"] = s.oos_end;
  }
  json verify = to_json(cfg.verify);
  verify.erase("seed");
  return {{"seed", cfg.seed},
          {"panel", panel},
          {"sweep", sweep},
          {"metrics", {{"q_grid", s.metrics.q_grid}, {"gammas", s.metrics.gammas}}},
          {"verify", verify}};
}

}  // namespace sparsesdf
