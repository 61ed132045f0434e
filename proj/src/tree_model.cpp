#include "leafshap/tree_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "leafshap/error.hpp"

namespace leafshap {

namespace {

std::string node_path(int tree, int node) {
  std::ostringstream os;
  if (tree >= 0) os << "trees[" << tree << "].";
  os << "nodes[" << node << "]";
  return os.str();
}

}  // namespace

Interval LeafRegion::interval(int feature) const {
  auto it = std::lower_bound(used_features.begin(), used_features.end(), feature);
  if (it == used_features.end() || *it != feature) return {};
  return bounds[static_cast<size_t>(it - used_features.begin())];
}

bool LeafRegion::contains(std::span<const double> x) const {
  for (size_t k = 0; k < used_features.size(); ++k) {
    if (!bounds[k].contains(x[static_cast<size_t>(used_features[k])])) return false;
  }
  return true;
}

bool LeafRegion::compatible(std::span<const char> in_s, std::span<const double> x) const {
  for (size_t k = 0; k < used_features.size(); ++k) {
    const auto f = static_cast<size_t>(used_features[k]);
    if (in_s[f] && !bounds[k].contains(x[f])) return false;
  }
  return true;
}

Tree::Tree(std::vector<TreeNode> nodes, int n_features) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> parent_count(nodes_.size(), 0);
  for (int i = 0; i < n; ++i) {
    const TreeNode& nd = nodes_[static_cast<size_t>(i)];
    if (nd.id != i) throw ValidationError(node_path(-1, i) + ": node ids must be 0..N-1 in order");
    if (nd.count < 0) throw ValidationError(node_path(-1, i) + ": negative count");
    if (nd.is_leaf()) {
      if (!std::isfinite(nd.value)) throw ValidationError(node_path(-1, i) + ": leaf value not finite");
      continue;
    }
    if (n_features >= 0 && nd.feature >= n_features) {
      throw ValidationError(node_path(-1, i) + ": split feature " + std::to_string(nd.feature) +
                            " >= n_features " + std::to_string(n_features));
    }
    if (!std::isfinite(nd.threshold)) throw ValidationError(node_path(-1, i) + ": threshold not finite");
    for (int child : {nd.left, nd.right}) {
      if (child <= 0 || child >= n) {
        throw ValidationError(node_path(-1, i) + ": child id " + std::to_string(child) + " out of range");
      }
      ++parent_count[static_cast<size_t>(child)];
    }
    if (nd.left == nd.right) throw ValidationError(node_path(-1, i) + ": left and right child coincide");
  }
  for (int i = 1; i < n; ++i) {
    if (parent_count[static_cast<size_t>(i)] != 1) {
      throw ValidationError(node_path(-1, i) + ": expected exactly one parent, found " +
                            std::to_string(parent_count[static_cast<size_t>(i)]));
    }
  }
  // Reachability from the root also rules out cycles (n-1 edges, all nodes reached).
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack{0};
  int reached = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (seen[static_cast<size_t>(id)]) throw ValidationError(node_path(-1, id) + ": cycle detected");
    seen[static_cast<size_t>(id)] = 1;
    ++reached;
    const TreeNode& nd = nodes_[static_cast<size_t>(id)];
    if (!nd.is_leaf()) {
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }
  if (reached != n) throw ValidationError("tree has nodes unreachable from the root");

  for (const TreeNode& nd : nodes_) {
    if (nd.is_leaf()) continue;
    const auto sum = nodes_[static_cast<size_t>(nd.left)].count + nodes_[static_cast<size_t>(nd.right)].count;
    if (nd.count != sum) {
      throw ValidationError(node_path(-1, nd.id) + ": count " + std::to_string(nd.count) +
                            " != left + right = " + std::to_string(sum));
    }
  }
  build_regions();
}

void Tree::build_regions() {
  leaves_ = leaf_regions(*this);
  leaf_index_.assign(nodes_.size(), -1);
  max_depth_ = 0;
  for (size_t k = 0; k < leaves_.size(); ++k) {
    leaf_index_[static_cast<size_t>(leaves_[k].leaf_id)] = static_cast<int>(k);
    max_depth_ = std::max(max_depth_, leaves_[k].depth);
  }
}

int Tree::leaf_for(std::span<const double> x) const {
  int id = 0;
  while (true) {
    const TreeNode& nd = nodes_[static_cast<size_t>(id)];
    if (nd.is_leaf()) return id;
    id = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
}

int Tree::leaf_index(int node_id) const {
  if (node_id < 0 || static_cast<size_t>(node_id) >= leaf_index_.size()) return -1;
  return leaf_index_[static_cast<size_t>(node_id)];
}

std::vector<LeafRegion> leaf_regions(const Tree& tree) {
  std::vector<LeafRegion> out;
  struct Frame {
    int id;
    int depth;
    std::vector<std::pair<int, Interval>> box;  // sorted by feature
  };
  std::vector<Frame> stack;
  stack.push_back({0, 0, {}});
  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    const TreeNode& nd = tree.node(fr.id);
    if (nd.is_leaf()) {
      LeafRegion r;
      r.leaf_id = nd.id;
      r.depth = fr.depth;
      r.value = nd.value;
      r.sample_count = nd.count;
      for (auto& [f, iv] : fr.box) {
        r.used_features.push_back(f);
        r.bounds.push_back(iv);
      }
      out.push_back(std::move(r));
      continue;
    }
    auto narrowed = [&](bool left) {
      auto box = fr.box;
      auto it = std::lower_bound(box.begin(), box.end(), nd.feature,
                                 [](const auto& e, int f) { return e.first < f; });
      if (it == box.end() || it->first != nd.feature) it = box.insert(it, {nd.feature, Interval{}});
      if (left) {
        it->second.hi = std::min(it->second.hi, nd.threshold);
      } else {
        it->second.lo = std::max(it->second.lo, nd.threshold);
      }
      return box;
    };
    // Right pushed first so leaves come out in left-to-right order.
    stack.push_back({nd.right, fr.depth + 1, narrowed(false)});
    stack.push_back({nd.left, fr.depth + 1, narrowed(true)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.leaf_id < b.leaf_id; });
  return out;
}

std::vector<int> compatible_leaves(const Tree& tree, std::span<const int> features,
                                   std::span<const double> x) {
  std::vector<char> in_s(x.size(), 0);
  for (int f : features) in_s.at(static_cast<size_t>(f)) = 1;
  std::vector<int> out;
  for (const LeafRegion& r : tree.leaves()) {
    if (r.compatible(in_s, x)) out.push_back(r.leaf_id);
  }
  return out;
}

TreeEnsemble::TreeEnsemble(std::vector<Tree> trees, int n_features, Aggregation aggregation,
                           std::vector<std::string> feature_names)
    : trees_(std::move(trees)),
      n_features_(n_features),
      aggregation_(aggregation),
      feature_names_(std::move(feature_names)) {
  if (n_features_ <= 0) throw ValidationError("n_features must be positive");
  if (trees_.empty()) throw ValidationError("ensemble has no trees");
  if (!feature_names_.empty() && static_cast<int>(feature_names_.size()) != n_features_) {
    throw ValidationError("feature_names length differs from n_features");
  }
  for (size_t t = 0; t < trees_.size(); ++t) {
    for (const TreeNode& nd : trees_[t].nodes()) {
      if (!nd.is_leaf() && nd.feature >= n_features_) {
        throw ValidationError(node_path(static_cast<int>(t), nd.id) + ": split feature out of range");
      }
    }
  }
}

double TreeEnsemble::tree_weight() const noexcept {
  return aggregation_ == Aggregation::kAverage ? 1.0 / static_cast<double>(trees_.size()) : 1.0;
}

double TreeEnsemble::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_features_) {
    throw ValidationError("point has " + std::to_string(x.size()) + " coordinates, model expects " +
                          std::to_string(n_features_));
  }
  double s = 0.0;
  for (const Tree& t : trees_) s += t.predict(x);
  return s * tree_weight();
}

// ---------------------------------------------------------------------------
// JSON model dump

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path, std::string("missing key \"") + key + "\"");
  return *it;
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(path + "." + key, "expected number or null");
  return it->get<double>();
}

std::optional<std::int64_t> optional_int(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw ParseError(path + "." + key, "expected integer or null");
  return it->get<std::int64_t>();
}

Tree parse_tree(const json& jt, int t, int n_features) {
  const std::string tpath = "trees[" + std::to_string(t) + "]";
  if (!jt.is_object()) throw ParseError(tpath, "expected object");
  const json& jn = require(jt, "nodes", tpath);
  if (!jn.is_array() || jn.empty()) throw ParseError(tpath + ".nodes", "expected non-empty array");

  std::vector<TreeNode> nodes(jn.size());
  std::vector<char> filled(jn.size(), 0);
  for (size_t i = 0; i < jn.size(); ++i) {
    const std::string path = tpath + ".nodes[" + std::to_string(i) + "]";
    const json& e = jn[i];
    if (!e.is_object()) throw ParseError(path, "expected object");
    const json& jid = require(e, "id", path);
    if (!jid.is_number_integer()) throw ParseError(path + ".id", "expected integer");
    const auto id = jid.get<std::int64_t>();
    if (id < 0 || id >= static_cast<std::int64_t>(jn.size())) {
      throw ParseError(path + ".id", "id " + std::to_string(id) + " outside 0.." + std::to_string(jn.size() - 1));
    }
    if (filled[static_cast<size_t>(id)]) throw ParseError(path + ".id", "duplicate id " + std::to_string(id));
    filled[static_cast<size_t>(id)] = 1;

    TreeNode nd;
    nd.id = static_cast<int>(id);
    const json& jc = require(e, "count", path);
    if (!jc.is_number_integer() || jc.get<std::int64_t>() < 0) {
      throw ParseError(path + ".count", "expected non-negative integer");
    }
    nd.count = jc.get<std::int64_t>();

    const auto feature = optional_int(e, "feature", path);
    if (feature) {
      if (*feature < 0 || *feature >= n_features) {
        throw ParseError(path + ".feature", "feature index " + std::to_string(*feature) + " outside 0.." +
                                                std::to_string(n_features - 1));
      }
      const auto thr = optional_number(e, "threshold", path);
      const auto left = optional_int(e, "left", path);
      const auto right = optional_int(e, "right", path);
      if (!thr) throw ParseError(path + ".threshold", "internal node requires a threshold");
      if (!std::isfinite(*thr)) throw ParseError(path + ".threshold", "threshold must be finite");
      if (!left || !right) throw ParseError(path, "internal node requires left and right children");
      nd.feature = static_cast<int>(*feature);
      nd.threshold = *thr;
      nd.left = static_cast<int>(*left);
      nd.right = static_cast<int>(*right);
    } else {
      const auto value = optional_number(e, "value", path);
      if (!value) throw ParseError(path + ".value", "leaf requires a value");
      if (optional_int(e, "left", path) || optional_int(e, "right", path)) {
        throw ParseError(path, "leaf must not have children");
      }
      nd.value = *value;
    }
    nodes[static_cast<size_t>(id)] = nd;
  }
  try {
    return Tree(std::move(nodes), n_features);
  } catch (const ValidationError& e) {
    throw ValidationError(tpath + "." + e.what());
  }
}

}  // namespace

TreeEnsemble parse_model(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("$", "expected object");
  const json& jp = require(doc, "n_features", "$");
  if (!jp.is_number_integer() || jp.get<std::int64_t>() <= 0) {
    throw ParseError("n_features", "expected positive integer");
  }
  const int p = jp.get<int>();

  Aggregation agg = Aggregation::kSum;
  if (auto it = doc.find("aggregation"); it != doc.end()) {
    if (!it->is_string()) throw ParseError("aggregation", "expected \"sum\" or \"average\"");
    const auto s = it->get<std::string>();
    if (s == "sum") {
      agg = Aggregation::kSum;
    } else if (s == "average") {
      agg = Aggregation::kAverage;
    } else {
      throw ParseError("aggregation", "expected \"sum\" or \"average\", got \"" + s + "\"");
    }
  }

  std::vector<std::string> names;
  if (auto it = doc.find("feature_names"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != static_cast<size_t>(p)) {
      throw ParseError("feature_names", "expected array of n_features strings");
    }
    for (size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) throw ParseError("feature_names[" + std::to_string(i) + "]", "expected string");
      names.push_back((*it)[i].get<std::string>());
    }
  }

  const json& jt = require(doc, "trees", "$");
  if (!jt.is_array() || jt.empty()) throw ParseError("trees", "expected non-empty array");
  std::vector<Tree> trees;
  trees.reserve(jt.size());
  for (size_t t = 0; t < jt.size(); ++t) trees.push_back(parse_tree(jt[t], static_cast<int>(t), p));
  return TreeEnsemble(std::move(trees), p, agg, std::move(names));
}

TreeEnsemble load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string dump_model(const TreeEnsemble& ensemble) {
  json doc;
  doc["n_features"] = ensemble.n_features();
  doc["aggregation"] = ensemble.aggregation() == Aggregation::kSum ? "sum" : "average";
  if (!ensemble.feature_names().empty()) doc["feature_names"] = ensemble.feature_names();
  json trees = json::array();
  for (const Tree& t : ensemble.trees()) {
    json nodes = json::array();
    for (const TreeNode& nd : t.nodes()) {
      json e;
      e["id"] = nd.id;
      e["count"] = nd.count;
      if (nd.is_leaf()) {
        e["feature"] = nullptr;
        e["threshold"] = nullptr;
        e["left"] = nullptr;
        e["right"] = nullptr;
        e["value"] = nd.value;
      } else {
        e["feature"] = nd.feature;
        e["threshold"] = nd.threshold;
        e["left"] = nd.left;
        e["right"] = nd.right;
        e["value"] = nullptr;
      }
      nodes.push_back(std::move(e));
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1);
}

TreeEnsemble transform_thresholds(const TreeEnsemble& ensemble, const FeatureMap& map) {
  std::vector<Tree> trees;
  for (const Tree& t : ensemble.trees()) {
    auto nodes = t.nodes();
    for (TreeNode& nd : nodes) {
      if (!nd.is_leaf()) nd.threshold = map(nd.feature, nd.threshold);
    }
    trees.emplace_back(std::move(nodes), ensemble.n_features());
  }
  return TreeEnsemble(std::move(trees), ensemble.n_features(), ensemble.aggregation(),
                      ensemble.feature_names());
}

}  // namespace leafshap
