#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace leafshap {

enum class FeatureKind { kContinuous, kCategorical, kIndicator };

std::string_view to_string(FeatureKind kind);

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<std::string> categories;  // categorical only; values are codes into this list
  std::vector<double> bin_edges;        // set once a continuous column has been binned
  int source_feature = -1;              // derived indicator columns point at their source
};

// Column-major numeric table. Categorical cells hold the category code.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::vector<double>> columns, std::vector<FeatureMeta> meta);

  size_t rows() const noexcept { return n_; }
  size_t cols() const noexcept { return columns_.size(); }

  double at(size_t row, size_t col) const { return columns_[col][row]; }
  std::span<const double> column(size_t col) const { return columns_.at(col); }
  std::vector<double> row(size_t r) const;
  const FeatureMeta& meta(size_t col) const { return meta_.at(col); }
  const std::vector<FeatureMeta>& meta() const noexcept { return meta_; }
  int column_index(std::string_view name) const;

  // Copy with `col` appended. Invariants are re-checked.
  Dataset with_column(std::vector<double> values, FeatureMeta meta) const;
  Dataset with_replaced(size_t col, std::vector<double> values, FeatureMeta meta) const;

 private:
  void validate() const;

  size_t n_ = 0;
  std::vector<std::vector<double>> columns_;
  std::vector<FeatureMeta> meta_;
};

// Column kinds, one line per column: "name = continuous|indicator|categorical(a,b,c)".
struct Schema {
  std::vector<FeatureMeta> columns;

  static Schema parse(std::string_view text);
  std::string to_text() const;
  const FeatureMeta* find(std::string_view name) const;
};

Dataset load_dataset(std::string_view csv, const Schema& schema);
Dataset load_dataset_files(const std::string& csv_path, const std::string& schema_path);
std::string write_csv(const Dataset& ds);
Schema schema_of(const Dataset& ds);

// Disjoint column groups acting as Shapley players.
struct PlayerPartition {
  std::vector<std::vector<int>> players;
  std::vector<std::string> labels;

  size_t size() const noexcept { return players.size(); }
  // Throws ValidationError when groups overlap, are empty, or exceed n_columns.
  void validate(int n_columns) const;
  // Owner player of each column, -1 when unassigned.
  std::vector<int> owner_of_columns(int n_columns) const;

  static PlayerPartition singletons(int n_columns, const std::vector<std::string>& names = {});
  static PlayerPartition from_json(std::string_view text);
  std::string to_json() const;
  friend bool operator==(const PlayerPartition&, const PlayerPartition&) = default;
};

PlayerPartition load_partition(const std::string& path);

// --- quantile discretization ---------------------------------------------

// Bin edges with -inf/+inf sentinels; bin r covers [edges[r], edges[r+1]).
std::vector<double> quantile_edges(std::span<const double> values, int q);
int bin_of(std::span<const double> edges, double v);

struct DiscretizeResult {
  Dataset data;
  PlayerPartition indicator_groups;  // filled when indicators were requested
  std::vector<std::string> warnings;
};

// Replaces each target column by its bin code (kind becomes categorical with
// bin_edges recorded). With `expand_indicators`, one indicator column per bin
// is appended and grouped as a single player.
DiscretizeResult quantile_discretize(const Dataset& ds, std::span<const int> columns, int q,
                                     bool expand_indicators = false);

// Re-applies recorded edges to raw values of the same feature.
std::vector<double> apply_bins(std::span<const double> edges, std::span<const double> values);

// --- categorical encoding -------------------------------------------------

enum class EncodingScheme { kOneHot, kDummy };

struct EncodingSpec {
  EncodingScheme scheme = EncodingScheme::kDummy;
  int dropped_category = -1;     // dummy only; defaults to the last category
  std::vector<int> column_map;   // category code -> derived column id, -1 for the dropped one
};

struct EncodeResult {
  Dataset data;
  EncodingSpec spec;
  std::vector<int> group;  // derived column ids, one player
  std::string label;
};

EncodeResult encode_categorical(const Dataset& ds, int column, EncodingSpec spec);

// Inverse of the encoding row by row; throws ValidationError on rows that do
// not correspond to exactly one category.
std::vector<double> decode_categorical(const Dataset& ds, const EncodingSpec& spec);

// Indicator patterns admissible for an encoded group: exactly one 1 (one-hot),
// at most one 1 (dummy).
bool feasible_pattern(EncodingScheme scheme, std::span<const double> group_values);

// --- counting -------------------------------------------------------------

struct Constraint {
  enum class Kind { kInterval, kExact };
  int column = 0;
  Kind kind = Kind::kInterval;
  double lo = 0.0;  // interval: lo < x <= hi
  double hi = 0.0;
  double value = 0.0;  // exact: x == value

  static Constraint interval(int column, double lo, double hi) {
    return {column, Kind::kInterval, lo, hi, 0.0};
  }
  static Constraint exact(int column, double value) { return {column, Kind::kExact, 0.0, 0.0, value}; }
  bool holds(double v) const noexcept { return kind == Kind::kExact ? v == value : (lo < v && v <= hi); }
};

std::int64_t count_region(const Dataset& ds, std::span<const Constraint> constraints);

}  // namespace leafshap
