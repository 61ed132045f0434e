#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace leafshap {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One node of a binary regression tree. Internal nodes route a point left iff
// x[feature] <= threshold.
struct TreeNode {
  int id = 0;
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;        // leaf output f_m
  std::int64_t count = 0;    // training observations reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
};

// Half-open interval (lo, hi]. Leaves tile R^p exactly under this convention.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double v) const noexcept { return lo < v && v <= hi; }
  bool unbounded() const noexcept { return lo == -kInf && hi == kInf; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// A leaf seen as an axis-aligned box. Only the features used on the
// root-to-leaf path are stored; every other coordinate is unconstrained.
struct LeafRegion {
  int leaf_id = 0;
  std::vector<int> used_features;   // sorted, distinct
  std::vector<Interval> bounds;     // parallel to used_features
  int depth = 0;
  double value = 0.0;
  std::int64_t sample_count = 0;

  Interval interval(int feature) const;
  bool contains(std::span<const double> x) const;
  // x_S in L_m^S, with S given as a membership mask over all features.
  bool compatible(std::span<const char> in_s, std::span<const double> x) const;
};

class Tree {
 public:
  Tree() = default;
  // Validates structure; throws ValidationError naming the offending node.
  explicit Tree(std::vector<TreeNode> nodes, int n_features = -1);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  const TreeNode& root() const { return nodes_.front(); }
  size_t size() const noexcept { return nodes_.size(); }

  // Id of the leaf containing x.
  int leaf_for(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return node(leaf_for(x)).value; }

  const std::vector<LeafRegion>& leaves() const noexcept { return leaves_; }
  // Position of a leaf id inside leaves(); -1 when the id is not a leaf.
  int leaf_index(int node_id) const;
  int max_depth() const noexcept { return max_depth_; }

 private:
  void build_regions();

  std::vector<TreeNode> nodes_;
  std::vector<LeafRegion> leaves_;
  std::vector<int> leaf_index_;
  int max_depth_ = 0;
};

enum class Aggregation { kSum, kAverage };

class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  TreeEnsemble(std::vector<Tree> trees, int n_features,
               Aggregation aggregation = Aggregation::kSum,
               std::vector<std::string> feature_names = {});

  const std::vector<Tree>& trees() const noexcept { return trees_; }
  int n_features() const noexcept { return n_features_; }
  Aggregation aggregation() const noexcept { return aggregation_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  // Per-tree multiplier: 1 for sum, 1/M for average.
  double tree_weight() const noexcept;

  // Throws ValidationError on dimension mismatch.
  double predict(std::span<const double> x) const;

 private:
  std::vector<Tree> trees_;
  int n_features_ = 0;
  Aggregation aggregation_ = Aggregation::kSum;
  std::vector<std::string> feature_names_;
};

TreeEnsemble parse_model(std::string_view document);
TreeEnsemble load_model(const std::string& path);
std::string dump_model(const TreeEnsemble& ensemble);

std::vector<LeafRegion> leaf_regions(const Tree& tree);

// Leaf ids m with x_S in L_m^S. `features` lists S.
std::vector<int> compatible_leaves(const Tree& tree, std::span<const int> features,
                                   std::span<const double> x);

// Applies a strictly increasing map per feature to every threshold. Used to
// check reparametrization invariance together with the same map on the data.
using FeatureMap = std::function<double(int feature, double value)>;
TreeEnsemble transform_thresholds(const TreeEnsemble& ensemble, const FeatureMap& map);

}  // namespace leafshap
