#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leafshap/data_frame.hpp"
#include "leafshap/tree_model.hpp"

namespace leafshap {

enum class EstimatorKind { kShapPath, kDiscrete, kLeaf };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view name);

// How the Leaf estimator turns per-leaf probabilities into a value.
//   kByZ:  divide by Z(S, x) so the weights form a distribution.
//   kNone: use the raw sum; this is the value function whose Shapley values
//          decompose leaf by leaf (multi-games).
enum class LeafNormalization { kNone, kByZ };

std::string_view to_string(LeafNormalization n);

struct LeafKey {
  int tree = 0;
  int leaf = 0;  // node id
  friend bool operator==(const LeafKey&, const LeafKey&) = default;
};

struct LeafWeight {
  LeafKey key;
  double weight = 0.0;
};

struct ReducedValue {
  double value = 0.0;
  std::vector<LeafWeight> weights;  // per compatible leaf, ensemble tree weight excluded
  double normalizer = 1.0;          // Z(S, x), per tree average for ensembles; Leaf only
  double unnormalized = 0.0;        // Leaf only: sum without the 1/Z factor
};

// An encoded categorical group; leaves admitting no feasible indicator pattern
// evaluate to 0 (the predictor extension on impossible dummy combinations).
struct EncodedGroup {
  std::vector<int> columns;
  EncodingScheme scheme = EncodingScheme::kDummy;
};

struct EstimatorOptions {
  std::vector<EncodedGroup> encoded_groups;
};

// N(L_m^S) for every leaf and every S within the leaf's used features,
// computed once per dataset by a superset-sum over per-row membership masks.
class ProjectedCounts {
 public:
  ProjectedCounts() = default;
  ProjectedCounts(const TreeEnsemble& ensemble, const Dataset& data);

  // `local_mask` indexes the leaf's used_features.
  std::int64_t count(size_t tree, size_t leaf_pos, std::uint32_t local_mask) const {
    return tables_[tree][leaf_pos][local_mask];
  }
  std::int64_t leaf_count(size_t tree, size_t leaf_pos) const {
    const auto& t = tables_[tree][leaf_pos];
    return t[t.size() - 1];
  }
  std::int64_t rows() const noexcept { return rows_; }

  static constexpr int kMaxUsedFeatures = 24;

 private:
  std::vector<std::vector<std::vector<std::int64_t>>> tables_;
  std::int64_t rows_ = 0;
};

// Reduced predictors f_S(x_S) for one model and one reference dataset. The
// dataset is optional for the path-dependent estimator, which only needs the
// node counts stored in the model.
class ReducedPredictor {
 public:
  ReducedPredictor(const TreeEnsemble& ensemble, const Dataset* data, EstimatorOptions options = {});

  const TreeEnsemble& ensemble() const noexcept { return *ensemble_; }
  const Dataset* data() const noexcept { return data_; }
  const EstimatorOptions& options() const noexcept { return options_; }
  int n_features() const noexcept { return ensemble_->n_features(); }

  // `in_s` is a membership mask over model columns.
  ReducedValue shap_reduced(std::span<const char> in_s, std::span<const double> x) const;
  ReducedValue discrete_reduced(std::span<const char> in_s, std::span<const double> x) const;
  ReducedValue leaf_reduced(std::span<const char> in_s, std::span<const double> x) const;
  ReducedValue evaluate(EstimatorKind kind, std::span<const char> in_s, std::span<const double> x) const;

  // Value-only fast paths used by the Shapley engine.
  double shap_value(std::span<const char> in_s, std::span<const double> x) const;
  double leaf_value(std::span<const char> in_s, std::span<const double> x, LeafNormalization norm) const;

  // Leaf output after the encoding extension (0 on infeasible leaves).
  double effective_value(size_t tree, size_t leaf_pos) const { return leaf_values_[tree][leaf_pos]; }
  // f(x) with the encoding extension applied.
  double predict(std::span<const double> x) const;

  const ProjectedCounts& counts() const;
  // Per-row model output under the extension; used by the Discrete estimator.
  const std::vector<double>& row_predictions() const;
  const std::vector<std::vector<int>>& row_leaves() const;  // [tree][row] -> leaf position

  // Throws a precondition error when S holds a continuous column.
  void check_discrete_columns(std::span<const char> in_s) const;

 private:
  void require_data(const char* what) const;

  const TreeEnsemble* ensemble_;
  const Dataset* data_;
  EstimatorOptions options_;
  std::vector<std::vector<double>> leaf_values_;
  ProjectedCounts counts_;
  std::vector<double> row_pred_;
  std::vector<std::vector<int>> row_leaf_;
};

// Replaces every node count by the number of dataset rows reaching it.
TreeEnsemble recount(const TreeEnsemble& ensemble, const Dataset& data);

std::vector<char> column_mask(int n_columns, std::span<const int> columns);

}  // namespace leafshap
