#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sparsesdf/backtest.hpp"
#include "sparsesdf/panel.hpp"
#include "sparsesdf/verify.hpp"

namespace sparsesdf {

/// Where the sweep panel comes from.
struct PanelSource {
  enum class Kind { Synthetic, Csv };
  Kind kind = Kind::Synthetic;

  // csv
  std::filesystem::path path;  // relative paths resolve against the config file
  LoadOptions load;
  bool rank_standardize = true;

  // synthetic
  PlantedKernelSpec planted;
  int months = 0;
  int assets = 0;
  int characteristics = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;  // master seed; every stream below derives from it
  std::optional<int> threads;
  PanelSource panel;
  SweepConfig sweep;
  bool oos_from_panel = false;  // oos range left out of the file: use every month the panel allows
  VerifyConfig verify;
  nlohmann::json source;  // the file as read, before overrides
};

/// Parses a config object. Unknown keys are a ValidationError. Seeds are
/// derived from `seed`, so changing it reseeds panel, features and theory instances.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads a JSON file and applies SPARSESDF_SEED / SPARSESDF_THREADS.
RunConfig load_config(const std::filesystem::path& path);

/// Replaces the master seed and re-derives the child seeds.
void set_seed(RunConfig& config, std::uint64_t seed);

/// Reads SPARSESDF_SEED and SPARSESDF_THREADS if set.
void apply_env_overrides(RunConfig& config);

/// Builds (or loads) the panel. For synthetic sources also returns the planted truth.
struct ResolvedPanel {
  CharacteristicPanel panel;
  std::optional<SyntheticPanel> synthetic;
};
ResolvedPanel resolve_panel(const RunConfig& config);

/// Sets the oos range to every month the panel can evaluate when the config left it out.
void fill_oos_range(RunConfig& config, const CharacteristicPanel& panel);

/// Effective configuration after seeds and overrides, sufficient to rerun.
nlohmann::json to_json(const RunConfig& config);

}  // namespace sparsesdf
