#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparsesdf/features.hpp"
#include "sparsesdf/types.hpp"

namespace sparsesdf {

/// One cross-section: characteristics observed at `month_id` and the excess
/// returns realized over the following month.
struct MonthSlice {
  int month_id = 0;  // yyyymm
  std::vector<std::string> asset_ids;
  Matrix Z;       // N_t x D
  Vector R_next;  // N_t

  Index N() const { return Z.rows(); }
};

/// Ordered sequence of month slices sharing the characteristic count D.
/// Immutable once constructed.
class CharacteristicPanel {
 public:
  CharacteristicPanel() = default;
  /// Validates shapes, finiteness and strictly increasing month ids.
  CharacteristicPanel(std::vector<MonthSlice> months, int D);

  int D() const { return D_; }
  std::size_t size() const { return months_.size(); }
  bool empty() const { return months_.empty(); }
  const MonthSlice& operator[](std::size_t k) const { return months_[k]; }
  const std::vector<MonthSlice>& months() const { return months_; }

  /// Position of the slice with this month id, if present.
  std::optional<std::size_t> find(int month_id) const;

  bool operator==(const CharacteristicPanel& other) const;

 private:
  std::vector<MonthSlice> months_;
  int D_ = 0;
};

/// Month following a yyyymm id.
int next_month(int yyyymm);
/// Month preceding a yyyymm id.
int prev_month(int yyyymm);
bool is_valid_month(int yyyymm);

struct LoadOptions {
  double max_missing_fraction = 0.30;
  int D = 0;  // 0: infer from the header
};

/// Reads the `month,asset_id,ret_next,c1,...,cD` CSV. Asset-months with more
/// than `max_missing_fraction` missing characteristics are dropped; remaining
/// gaps are filled with the month's cross-sectional median. No standardization.
CharacteristicPanel load_panel(const std::filesystem::path& path, const LoadOptions& options = {});
CharacteristicPanel load_panel(std::istream& in, const LoadOptions& options = {});

void write_panel_csv(std::ostream& out, const CharacteristicPanel& panel);

/// Replaces each value by (rank - 1) / (N - 1) - 0.5 using average ranks; N = 1 maps to 0.
Vector rank_standardize_column(const Vector& column);
CharacteristicPanel rank_standardize(const CharacteristicPanel& panel);

/// Planted sparse pricing kernel for synthetic experiments.
struct PlantedKernelSpec {
  int k_true = 5;
  FeatureSpec support_space;  // the P_max-feature expansion holding the true loadings
  double signal_scale = 1.0;  // mean |lambda_true| over the support
  double noise_vol = 0.1;
  std::uint64_t seed = 0;
  std::vector<int> support;  // explicit support indices; empty draws k_true at random
  int window = 0;            // training window the panel is meant for; 0 means T_total

  void validate(int T_total) const;
};

struct SyntheticPanel {
  CharacteristicPanel panel;
  Vector true_lambda;  // length P_max
  std::vector<int> support;
  FeatureDraw support_draw;
};

/// Draws i.i.d. uniform characteristics, rank-standardizes them and sets
/// R_next = S_max(Z) lambda_true + noise. Pure function of its arguments.
SyntheticPanel synth_panel(const PlantedKernelSpec& spec, int T_total, int N, int D);

/// Conditional mean of next-month returns implied by the planted kernel.
Vector planted_expected_returns(const SyntheticPanel& synth, const MonthSlice& slice);

}  // namespace sparsesdf
