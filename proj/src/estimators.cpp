#include "leafshap/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "leafshap/error.hpp"

namespace leafshap {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kShapPath:
      return "shap_path";
    case EstimatorKind::kDiscrete:
      return "discrete";
    case EstimatorKind::kLeaf:
      return "leaf";
  }
  return "?";
}

EstimatorKind parse_estimator(std::string_view name) {
  if (name == "shap_path") return EstimatorKind::kShapPath;
  if (name == "discrete") return EstimatorKind::kDiscrete;
  if (name == "leaf") return EstimatorKind::kLeaf;
  throw ConfigError("unknown estimator \"" + std::string(name) + "\" (expected shap_path|discrete|leaf)");
}

std::string_view to_string(LeafNormalization n) { return n == LeafNormalization::kByZ ? "z" : "none"; }

std::vector<char> column_mask(int n_columns, std::span<const int> columns) {
  std::vector<char> m(static_cast<size_t>(n_columns), 0);
  for (int c : columns) m.at(static_cast<size_t>(c)) = 1;
  return m;
}

namespace {

std::string describe_subset(std::span<const char> in_s, std::span<const double> x) {
  std::ostringstream os;
  os << "S={";
  bool first = true;
  for (size_t i = 0; i < in_s.size(); ++i) {
    if (!in_s[i]) continue;
    os << (first ? "" : ",") << i;
    first = false;
  }
  os << "} x_S=(";
  first = true;
  for (size_t i = 0; i < in_s.size(); ++i) {
    if (!in_s[i]) continue;
    os << (first ? "" : ",") << x[i];
    first = false;
  }
  os << ")";
  return os.str();
}

// True when the leaf box admits at least one feasible indicator pattern of the group.
bool leaf_feasible(const LeafRegion& r, const EncodedGroup& g) {
  const size_t k = g.columns.size();
  auto pattern_fits = [&](size_t hot) {  // hot == k means all zeros
    for (size_t j = 0; j < k; ++j) {
      const double v = (j == hot) ? 1.0 : 0.0;
      if (!r.interval(g.columns[j]).contains(v)) return false;
    }
    return true;
  };
  if (g.scheme == EncodingScheme::kDummy && pattern_fits(k)) return true;
  for (size_t j = 0; j < k; ++j) {
    if (pattern_fits(j)) return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------

ProjectedCounts::ProjectedCounts(const TreeEnsemble& ensemble, const Dataset& data)
    : rows_(static_cast<std::int64_t>(data.rows())) {
  const size_t n = data.rows();
  tables_.resize(ensemble.trees().size());
  std::vector<std::uint32_t> masks(n);
  for (size_t t = 0; t < ensemble.trees().size(); ++t) {
    const auto& leaves = ensemble.trees()[t].leaves();
    tables_[t].resize(leaves.size());
    for (size_t m = 0; m < leaves.size(); ++m) {
      const LeafRegion& r = leaves[m];
      const size_t d = r.used_features.size();
      if (d > static_cast<size_t>(kMaxUsedFeatures)) {
        throw ConfigError("leaf " + std::to_string(r.leaf_id) + " uses " + std::to_string(d) +
                          " features; projected-count tables support at most " +
                          std::to_string(kMaxUsedFeatures));
      }
      std::fill(masks.begin(), masks.end(), 0u);
      for (size_t k = 0; k < d; ++k) {
        const auto col = data.column(static_cast<size_t>(r.used_features[k]));
        const Interval iv = r.bounds[k];
        const std::uint32_t bit = 1u << k;
        for (size_t i = 0; i < n; ++i) {
          if (iv.contains(col[i])) masks[i] |= bit;
        }
      }
      auto& table = tables_[t][m];
      table.assign(size_t{1} << d, 0);
      for (std::uint32_t mk : masks) ++table[mk];
      // Superset sums: table[S] = #rows whose membership mask contains S.
      for (size_t k = 0; k < d; ++k) {
        const size_t bit = size_t{1} << k;
        for (size_t s = 0; s < table.size(); ++s) {
          if (!(s & bit)) table[s] += table[s | bit];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

ReducedPredictor::ReducedPredictor(const TreeEnsemble& ensemble, const Dataset* data, EstimatorOptions options)
    : ensemble_(&ensemble), data_(data), options_(std::move(options)) {
  if (data_ && static_cast<int>(data_->cols()) != ensemble.n_features()) {
    throw ValidationError("dataset has " + std::to_string(data_->cols()) + " columns, model expects " +
                          std::to_string(ensemble.n_features()));
  }
  for (const auto& g : options_.encoded_groups) {
    for (int c : g.columns) {
      if (c < 0 || c >= ensemble.n_features()) throw ConfigError("encoded group column out of range");
    }
  }
  leaf_values_.resize(ensemble.trees().size());
  for (size_t t = 0; t < ensemble.trees().size(); ++t) {
    for (const LeafRegion& r : ensemble.trees()[t].leaves()) {
      bool feasible = true;
      for (const auto& g : options_.encoded_groups) feasible = feasible && leaf_feasible(r, g);
      leaf_values_[t].push_back(feasible ? r.value : 0.0);
    }
  }
  if (data_) {
    counts_ = ProjectedCounts(ensemble, *data_);
    const size_t n = data_->rows();
    row_pred_.assign(n, 0.0);
    row_leaf_.assign(ensemble.trees().size(), std::vector<int>(n, 0));
    std::vector<double> x(data_->cols());
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < x.size(); ++c) x[c] = data_->at(i, c);
      double s = 0.0;
      for (size_t t = 0; t < ensemble.trees().size(); ++t) {
        const Tree& tree = ensemble.trees()[t];
        const int pos = tree.leaf_index(tree.leaf_for(x));
        row_leaf_[t][i] = pos;
        s += leaf_values_[t][static_cast<size_t>(pos)];
      }
      row_pred_[i] = s * ensemble.tree_weight();
    }
  }
}

void ReducedPredictor::require_data(const char* what) const {
  if (!data_) throw ConfigError(std::string(what) + " estimator requires a reference dataset");
}

const ProjectedCounts& ReducedPredictor::counts() const {
  require_data("leaf");
  return counts_;
}

const std::vector<double>& ReducedPredictor::row_predictions() const {
  require_data("discrete");
  return row_pred_;
}

const std::vector<std::vector<int>>& ReducedPredictor::row_leaves() const {
  require_data("discrete");
  return row_leaf_;
}

double ReducedPredictor::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != ensemble_->n_features()) {
    throw ValidationError("point dimension mismatch");
  }
  for (const auto& g : options_.encoded_groups) {
    std::vector<double> vals;
    for (int c : g.columns) vals.push_back(x[static_cast<size_t>(c)]);
    if (!feasible_pattern(g.scheme, vals)) return 0.0;
  }
  double s = 0.0;
  for (size_t t = 0; t < ensemble_->trees().size(); ++t) {
    const Tree& tree = ensemble_->trees()[t];
    s += leaf_values_[t][static_cast<size_t>(tree.leaf_index(tree.leaf_for(x)))];
  }
  return s * ensemble_->tree_weight();
}

// ---------------------------------------------------------------------------
// Path-dependent estimator: descend one child when the split feature is
// conditioned on, both children weighted by node-count ratios otherwise.

namespace {

template <typename LeafFn>
void path_walk(const Tree& tree, size_t t, std::span<const char> in_s, std::span<const double> x,
               LeafFn&& on_leaf) {
  struct Item {
    int id;
    double w;
  };
  std::vector<Item> stack{{0, 1.0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const TreeNode& nd = tree.node(it.id);
    if (nd.is_leaf()) {
      on_leaf(nd.id, it.w);
      continue;
    }
    if (in_s[static_cast<size_t>(nd.feature)]) {
      stack.push_back({x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right, it.w});
      continue;
    }
    if (nd.count == 0) {
      throw DegenerateQueryError("tree " + std::to_string(t) + " node " + std::to_string(nd.id) +
                                 ": zero sample count on an unconditioned split (division by zero)");
    }
    const double total = static_cast<double>(nd.count);
    const double wl = it.w * static_cast<double>(tree.node(nd.left).count) / total;
    const double wr = it.w * static_cast<double>(tree.node(nd.right).count) / total;
    // Zero-weight branches contribute nothing; pruning them keeps empty
    // subtrees from tripping the division check.
    if (wr != 0.0) stack.push_back({nd.right, wr});
    if (wl != 0.0) stack.push_back({nd.left, wl});
  }
}

}  // namespace

ReducedValue ReducedPredictor::shap_reduced(std::span<const char> in_s, std::span<const double> x) const {
  ReducedValue out;
  for (size_t t = 0; t < ensemble_->trees().size(); ++t) {
    const Tree& tree = ensemble_->trees()[t];
    double v = 0.0;
    path_walk(tree, t, in_s, x, [&](int leaf, double w) {
      out.weights.push_back({{static_cast<int>(t), leaf}, w});
      v += w * leaf_values_[t][static_cast<size_t>(tree.leaf_index(leaf))];
    });
    out.value += v;
  }
  out.value *= ensemble_->tree_weight();
  out.unnormalized = out.value;
  return out;
}

double ReducedPredictor::shap_value(std::span<const char> in_s, std::span<const double> x) const {
  double total = 0.0;
  for (size_t t = 0; t < ensemble_->trees().size(); ++t) {
    const Tree& tree = ensemble_->trees()[t];
    double v = 0.0;
    path_walk(tree, t, in_s, x, [&](int leaf, double w) {
      v += w * leaf_values_[t][static_cast<size_t>(tree.leaf_index(leaf))];
    });
    total += v;
  }
  return total * ensemble_->tree_weight();
}

// ---------------------------------------------------------------------------

void ReducedPredictor::check_discrete_columns(std::span<const char> in_s) const {
  require_data("discrete");
  for (size_t c = 0; c < in_s.size(); ++c) {
    if (in_s[c] && data_->meta(c).kind == FeatureKind::kContinuous) {
      throw ConfigError("discrete estimator cannot condition on continuous column " + data_->meta(c).name +
                        "; bin it first with quantile_discretize");
    }
  }
}

ReducedValue ReducedPredictor::discrete_reduced(std::span<const char> in_s, std::span<const double> x) const {
  check_discrete_columns(in_s);
  std::vector<size_t> cols;
  for (size_t c = 0; c < in_s.size(); ++c) {
    if (in_s[c]) cols.push_back(c);
  }
  const size_t n = data_->rows();
  const size_t n_trees = ensemble_->trees().size();
  std::vector<std::vector<std::int64_t>> leaf_hits(n_trees);
  for (size_t t = 0; t < n_trees; ++t) leaf_hits[t].assign(ensemble_->trees()[t].leaves().size(), 0);

  std::int64_t matches = 0;
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (size_t c : cols) {
      if (data_->at(i, c) != x[c]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    ++matches;
    sum += row_pred_[i];
    for (size_t t = 0; t < n_trees; ++t) ++leaf_hits[t][static_cast<size_t>(row_leaf_[t][i])];
  }
  if (matches == 0) {
    throw DegenerateQueryError("discrete estimator: no observation matches " + describe_subset(in_s, x) +
                               " (unsupported conditioning)");
  }
  ReducedValue out;
  out.value = sum / static_cast<double>(matches);
  out.unnormalized = out.value;
  for (size_t t = 0; t < n_trees; ++t) {
    const auto& leaves = ensemble_->trees()[t].leaves();
    for (size_t m = 0; m < leaves.size(); ++m) {
      if (leaf_hits[t][m] == 0) continue;
      out.weights.push_back({{static_cast<int>(t), leaves[m].leaf_id},
                             static_cast<double>(leaf_hits[t][m]) / static_cast<double>(matches)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaf estimator: weight N(L_m)/N(L_m^S) per compatible leaf, optional 1/Z.

namespace {

// Membership bits of S within the leaf's used features; false if x_S falls
// outside the leaf projection.
inline bool project(const LeafRegion& r, std::span<const char> in_s, std::span<const double> x,
                    std::uint32_t& local) {
  local = 0;
  for (size_t k = 0; k < r.used_features.size(); ++k) {
    const auto f = static_cast<size_t>(r.used_features[k]);
    if (!in_s[f]) continue;
    if (!r.bounds[k].contains(x[f])) return false;
    local |= 1u << k;
  }
  return true;
}

}  // namespace

ReducedValue ReducedPredictor::leaf_reduced(std::span<const char> in_s, std::span<const double> x) const {
  require_data("leaf");
  ReducedValue out;
  double z_total = 0.0;
  for (size_t t = 0; t < ensemble_->trees().size(); ++t) {
    const auto& leaves = ensemble_->trees()[t].leaves();
    double sum = 0.0;
    double z = 0.0;
    const size_t first_weight = out.weights.size();
    for (size_t m = 0; m < leaves.size(); ++m) {
      std::uint32_t local = 0;
      if (!project(leaves[m], in_s, x, local)) continue;
      const auto n_s = counts_.count(t, m, local);
      if (n_s == 0) continue;  // leaf supported off the conditioning slab: excluded
      const double p = static_cast<double>(counts_.leaf_count(t, m)) / static_cast<double>(n_s);
      z += p;
      sum += leaf_values_[t][m] * p;
      out.weights.push_back({{static_cast<int>(t), leaves[m].leaf_id}, p});
    }
    if (z == 0.0) {
      throw DegenerateQueryError("leaf estimator: tree " + std::to_string(t) +
                                 " has no compatible leaf with observations for " + describe_subset(in_s, x));
    }
    for (size_t k = first_weight; k < out.weights.size(); ++k) out.weights[k].weight /= z;
    out.value += sum / z;
    out.unnormalized += sum;
    z_total += z;
  }
  const double w = ensemble_->tree_weight();
  out.value *= w;
  out.unnormalized *= w;
  out.normalizer = z_total / static_cast<double>(ensemble_->trees().size());
  return out;
}

double ReducedPredictor::leaf_value(std::span<const char> in_s, std::span<const double> x,
                                    LeafNormalization norm) const {
  require_data("leaf");
  double total = 0.0;
  for (size_t t = 0; t < ensemble_->trees().size(); ++t) {
    const auto& leaves = ensemble_->trees()[t].leaves();
    double sum = 0.0;
    double z = 0.0;
    for (size_t m = 0; m < leaves.size(); ++m) {
      std::uint32_t local = 0;
      if (!project(leaves[m], in_s, x, local)) continue;
      const auto n_s = counts_.count(t, m, local);
      if (n_s == 0) continue;
      const double p = static_cast<double>(counts_.leaf_count(t, m)) / static_cast<double>(n_s);
      z += p;
      sum += leaf_values_[t][m] * p;
    }
    if (norm == LeafNormalization::kByZ) {
      if (z == 0.0) {
        throw DegenerateQueryError("leaf estimator: tree " + std::to_string(t) +
                                   " has no compatible leaf with observations for " + describe_subset(in_s, x));
      }
      sum /= z;
    }
    total += sum;
  }
  return total * ensemble_->tree_weight();
}

ReducedValue ReducedPredictor::evaluate(EstimatorKind kind, std::span<const char> in_s,
                                        std::span<const double> x) const {
  if (static_cast<int>(x.size()) != ensemble_->n_features() || in_s.size() != x.size()) {
    throw ValidationError("query dimension mismatch: model expects " + std::to_string(ensemble_->n_features()));
  }
  switch (kind) {
    case EstimatorKind::kShapPath:
      return shap_reduced(in_s, x);
    case EstimatorKind::kDiscrete:
      return discrete_reduced(in_s, x);
    case EstimatorKind::kLeaf:
      return leaf_reduced(in_s, x);
  }
  throw ConfigError("unknown estimator");
}

// ---------------------------------------------------------------------------

TreeEnsemble recount(const TreeEnsemble& ensemble, const Dataset& data) {
  if (static_cast<int>(data.cols()) != ensemble.n_features()) {
    throw ValidationError("dataset/model column mismatch");
  }
  std::vector<Tree> trees;
  std::vector<double> x(data.cols());
  for (const Tree& tree : ensemble.trees()) {
    auto nodes = tree.nodes();
    for (auto& nd : nodes) nd.count = 0;
    for (size_t i = 0; i < data.rows(); ++i) {
      for (size_t c = 0; c < x.size(); ++c) x[c] = data.at(i, c);
      int id = 0;
      while (true) {
        auto& nd = nodes[static_cast<size_t>(id)];
        ++nd.count;
        if (nd.is_leaf()) break;
        id = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
      }
    }
    trees.emplace_back(std::move(nodes), ensemble.n_features());
  }
  return TreeEnsemble(std::move(trees), ensemble.n_features(), ensemble.aggregation(), ensemble.feature_names());
}

}  // namespace leafshap
