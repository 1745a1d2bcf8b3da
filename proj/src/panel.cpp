#include "sparsesdf/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sparsesdf/error.hpp"
#include "sparsesdf/rng.hpp"

namespace sparsesdf {

CharacteristicPanel::CharacteristicPanel(std::vector<MonthSlice> months, int D)
    : months_(std::move(months)), D_(D) {
  if (D_ < 1) throw ValidationError("panel needs D >= 1");
  for (std::size_t k = 0; k < months_.size(); ++k) {
    const MonthSlice& m = months_[k];
    const std::string where = "month " + std::to_string(m.month_id);
    if (k > 0 && m.month_id <= months_[k - 1].month_id) {
      throw ValidationError("months must be strictly increasing (" + where + " after " +
                            std::to_string(months_[k - 1].month_id) + ")");
    }
    if (m.Z.rows() < 1) throw ValidationError(where + " has no assets");
    if (m.Z.cols() != D_) throw ValidationError(where + ": Z has " + std::to_string(m.Z.cols()) + " columns, expected " + std::to_string(D_));
    if (m.R_next.size() != m.Z.rows()) throw ValidationError(where + ": Z and R_next row counts differ");
    if (!m.asset_ids.empty() && static_cast<Index>(m.asset_ids.size()) != m.Z.rows()) {
      throw ValidationError(where + ": asset id count differs from Z rows");
    }
    if (!m.Z.allFinite() || !m.R_next.allFinite()) throw ValidationError(where + " contains non-finite values");
  }
}

std::optional<std::size_t> CharacteristicPanel::find(int month_id) const {
  auto it = std::lower_bound(months_.begin(), months_.end(), month_id,
                             [](const MonthSlice& m, int id) { return m.month_id < id; });
  if (it == months_.end() || it->month_id != month_id) return std::nullopt;
  return static_cast<std::size_t>(it - months_.begin());
}

bool CharacteristicPanel::operator==(const CharacteristicPanel& other) const {
  if (D_ != other.D_ || months_.size() != other.months_.size()) return false;
  for (std::size_t k = 0; k < months_.size(); ++k) {
    const MonthSlice& a = months_[k];
    const MonthSlice& b = other.months_[k];
    if (a.month_id != b.month_id || a.asset_ids != b.asset_ids) return false;
    if (a.Z.rows() != b.Z.rows() || a.Z != b.Z || a.R_next != b.R_next) return false;
  }
  return true;
}

bool is_valid_month(int yyyymm) {
  const int mm = yyyymm % 100;
  return yyyymm > 0 && mm >= 1 && mm <= 12;
}

int next_month(int yyyymm) {
  const int yyyy = yyyymm / 100;
  const int mm = yyyymm % 100;
  return mm == 12 ? (yyyy + 1) * 100 + 1 : yyyymm + 1;
}

int prev_month(int yyyymm) {
  const int yyyy = yyyymm / 100;
  const int mm = yyyymm % 100;
  return mm == 1 ? (yyyy - 1) * 100 + 12 : yyyymm - 1;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view cell, std::size_t line, const char* field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw ParseError(line, std::string("bad ") + field + " value '" + std::string(cell) + "'");
  }
  return value;
}

int parse_month(std::string_view cell, std::size_t line) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !is_valid_month(value)) {
    throw ParseError(line, "bad month '" + std::string(cell) + "' (expected yyyymm)");
  }
  return value;
}

double median(std::vector<double> values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

struct RawRow {
  std::string asset_id;
  double ret_next;
  std::vector<std::optional<double>> chars;
};

}  // namespace

CharacteristicPanel load_panel(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file " + path.string());
  return load_panel(in, options);
}

CharacteristicPanel load_panel(std::istream& in, const LoadOptions& options) {
  if (!(options.max_missing_fraction >= 0.0 && options.max_missing_fraction <= 1.0)) {
    throw ValidationError("max_missing_fraction must lie in [0, 1]");
  }
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv(line);
  if (header.size() < 4 || trim(header[0]) != "month" || trim(header[1]) != "asset_id" ||
      trim(header[2]) != "ret_next") {
    throw ParseError(1, "header must start with month,asset_id,ret_next and list at least one characteristic");
  }
  const std::size_t n_fields = header.size();  // views into `line`; keep only the count
  const int D = static_cast<int>(n_fields) - 3;
  if (options.D != 0 && options.D != D) {
    throw ParseError(1, "header lists " + std::to_string(D) + " characteristics, expected " + std::to_string(options.D));
  }

  std::map<int, std::vector<RawRow>> by_month;
  std::map<int, std::set<std::string>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n_fields) {
      throw ParseError(line_no, "expected " + std::to_string(n_fields) + " fields, found " + std::to_string(cells.size()));
    }
    const int month = parse_month(trim(cells[0]), line_no);
    RawRow row;
    row.asset_id = std::string(trim(cells[1]));
    if (row.asset_id.empty()) throw ParseError(line_no, "empty asset_id");
    if (!seen[month].insert(row.asset_id).second) {
      throw ParseError(line_no, "duplicate asset '" + row.asset_id + "' in month " + std::to_string(month));
    }
    const auto ret = trim(cells[2]);
    if (ret.empty()) throw ParseError(line_no, "missing ret_next");
    row.ret_next = parse_double(ret, line_no, "ret_next");
    row.chars.reserve(D);
    for (int d = 0; d < D; ++d) {
      const auto cell = trim(cells[3 + d]);
      if (cell.empty()) {
        row.chars.emplace_back(std::nullopt);
      } else {
        row.chars.emplace_back(parse_double(cell, line_no, "characteristic"));
      }
    }
    by_month[month].push_back(std::move(row));
  }

  std::vector<MonthSlice> months;
  months.reserve(by_month.size());
  for (auto& [month, rows] : by_month) {
    std::vector<const RawRow*> kept;
    for (const RawRow& row : rows) {
      const auto missing = std::count(row.chars.begin(), row.chars.end(), std::nullopt);
      if (static_cast<double>(missing) <= options.max_missing_fraction * D + 1e-12) kept.push_back(&row);
    }
    if (kept.empty()) {
      throw ValidationError("month " + std::to_string(month) + " has no assets after dropping rows above the missing cutoff");
    }
    MonthSlice slice;
    slice.month_id = month;
    const Index n = static_cast<Index>(kept.size());
    slice.Z.resize(n, D);
    slice.R_next.resize(n);
    for (int d = 0; d < D; ++d) {
      std::vector<double> present;
      for (const RawRow* row : kept) {
        if (row->chars[d]) present.push_back(*row->chars[d]);
      }
      // A column missing for every surviving asset is filled with zeros; after
      // rank standardization any constant fill is equivalent.
      const double fill = present.empty() ? 0.0 : median(present);
      for (Index i = 0; i < n; ++i) slice.Z(i, d) = kept[i]->chars[d].value_or(fill);
    }
    for (Index i = 0; i < n; ++i) {
      slice.R_next(i) = kept[i]->ret_next;
      slice.asset_ids.push_back(kept[i]->asset_id);
    }
    months.push_back(std::move(slice));
  }
  return CharacteristicPanel(std::move(months), D);
}

void write_panel_csv(std::ostream& out, const CharacteristicPanel& panel) {
  out << "month,asset_id,ret_next";
  for (int d = 1; d <= panel.D(); ++d) out << ",c" << d;
  out << '\n';
  out << std::setprecision(17);
  for (const MonthSlice& m : panel.months()) {
    for (Index i = 0; i < m.N(); ++i) {
      out << m.month_id << ',';
      if (m.asset_ids.empty()) {
        out << 'A' << i;
      } else {
        out << m.asset_ids[i];
      }
      out << ',' << m.R_next(i);
      for (Index d = 0; d < m.Z.cols(); ++d) out << ',' << m.Z(i, d);
      out << '\n';
    }
  }
}

Vector rank_standardize_column(const Vector& column) {
  const Index n = column.size();
  Vector out(n);
  if (n == 1) {
    out(0) = 0.0;
    return out;
  }
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return column(a) < column(b); });
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && column(order[j + 1]) == column(order[i])) ++j;
    // ranks i+1 .. j+1 share their average
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double value = (avg_rank - 1.0) / static_cast<double>(n - 1) - 0.5;
    for (Index k = i; k <= j; ++k) out(order[k]) = value;
    i = j + 1;
  }
  return out;
}

CharacteristicPanel rank_standardize(const CharacteristicPanel& panel) {
  std::vector<MonthSlice> months = panel.months();
  for (MonthSlice& m : months) {
    for (Index d = 0; d < m.Z.cols(); ++d) m.Z.col(d) = rank_standardize_column(m.Z.col(d));
  }
  return CharacteristicPanel(std::move(months), panel.D());
}

void PlantedKernelSpec::validate(int T_total) const {
  const int P_max = support_space.P;
  const int T = window > 0 ? window : T_total;
  if (k_true < 1) throw ValidationError("k_true must be >= 1");
  if (P_max < 1) throw ValidationError("support space needs P_max >= 1");
  if (k_true > T) throw ValidationError("k_true=" + std::to_string(k_true) + " exceeds T=" + std::to_string(T));
  if (k_true > P_max) throw ValidationError("k_true=" + std::to_string(k_true) + " exceeds P_max=" + std::to_string(P_max));
  if (!(signal_scale > 0.0)) throw ValidationError("signal_scale must be > 0");
  if (!(noise_vol >= 0.0)) throw ValidationError("noise_vol must be >= 0");
  if (!support.empty()) {
    if (static_cast<int>(support.size()) != k_true) throw ValidationError("explicit support must list k_true indices");
    std::set<int> unique(support.begin(), support.end());
    if (unique.size() != support.size()) throw ValidationError("explicit support has duplicates");
    if (*unique.begin() < 0 || *unique.rbegin() >= P_max) throw ValidationError("explicit support index outside [0, P_max)");
  }
}

namespace {

constexpr std::uint64_t kCharStream = 0xC4;
constexpr std::uint64_t kNoiseStream = 0xE5;
constexpr std::uint64_t kLoadingStream = 0x1A;

Vector planted_mean(const FeatureDraw& draw, const std::vector<int>& support, const Vector& lambda,
                    const Matrix& Z) {
  const double scale = std::sqrt(2.0 / static_cast<double>(draw.P()));
  Vector mean = Vector::Zero(Z.rows());
  for (int p : support) {
    const Vector arg = Z * draw.omegas.row(p).transpose();
    mean += (lambda(p) * scale) * (arg.array() + draw.phases(p)).cos().matrix();
  }
  return mean;
}

}  // namespace

SyntheticPanel synth_panel(const PlantedKernelSpec& spec, int T_total, int N, int D) {
  if (T_total < 2) throw ValidationError("synthetic panel needs T_total >= 2");
  if (N < D) throw ValidationError("synthetic panel needs N >= D");
  if (D < 1) throw ValidationError("synthetic panel needs D >= 1");
  spec.validate(T_total);

  SyntheticPanel out;
  FeatureSpec space = spec.support_space;
  space.D = D;
  out.support_draw = draw_features(space);
  const int P_max = space.P;

  Stream loadings(derive_seed(spec.seed, kLoadingStream));
  if (spec.support.empty()) {
    // Partial Fisher-Yates over [0, P_max) selects k distinct indices.
    std::vector<int> pool(P_max);
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < spec.k_true; ++k) {
      const auto j = k + static_cast<int>(loadings.index(static_cast<std::uint64_t>(P_max - k)));
      std::swap(pool[k], pool[j]);
    }
    out.support.assign(pool.begin(), pool.begin() + spec.k_true);
  } else {
    out.support = spec.support;
  }
  std::sort(out.support.begin(), out.support.end());
  out.true_lambda = Vector::Zero(P_max);
  for (int p : out.support) {
    const double sign = loadings.uniform() < 0.5 ? -1.0 : 1.0;
    out.true_lambda(p) = sign * spec.signal_scale * loadings.uniform(0.5, 1.5);
  }

  std::vector<MonthSlice> months;
  months.reserve(T_total);
  int month_id = 199001;
  for (int t = 0; t < T_total; ++t) {
    MonthSlice slice;
    slice.month_id = month_id;
    month_id = next_month(month_id);
    Stream chars(derive_seed(spec.seed, kCharStream, t));
    slice.Z.resize(N, D);
    for (int i = 0; i < N; ++i) {
      for (int d = 0; d < D; ++d) slice.Z(i, d) = chars.uniform();
    }
    for (int d = 0; d < D; ++d) slice.Z.col(d) = rank_standardize_column(slice.Z.col(d));
    Stream noise(derive_seed(spec.seed, kNoiseStream, t));
    slice.R_next = planted_mean(out.support_draw, out.support, out.true_lambda, slice.Z);
    if (spec.noise_vol > 0.0) {
      for (int i = 0; i < N; ++i) slice.R_next(i) += spec.noise_vol * noise.normal();
    }
    slice.asset_ids.reserve(N);
    for (int i = 0; i < N; ++i) {
      std::ostringstream id;
      id << 'S' << std::setw(5) << std::setfill('0') << i;
      slice.asset_ids.push_back(id.str());
    }
    months.push_back(std::move(slice));
  }
  out.panel = CharacteristicPanel(std::move(months), D);
  return out;
}

Vector planted_expected_returns(const SyntheticPanel& synth, const MonthSlice& slice) {
  return planted_mean(synth.support_draw, synth.support, synth.true_lambda, slice.Z);
}

}  // namespace sparsesdf
