#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "leafshap/error.hpp"
#include "leafshap/tree_model.hpp"
#include "support.hpp"

using namespace leafshap;

namespace {

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

TreeEnsemble stump() {
  return parse_model(R"({"n_features": 2, "trees": [{"nodes": [
    {"id": 0, "feature": 1, "threshold": 0.305, "left": 1, "right": 2, "count": 10},
    {"id": 1, "value": 1.0, "count": 4},
    {"id": 2, "value": 2.0, "count": 6}]}]})");
}

}  // namespace

TEST(TreeModel, SingleLeafPredictsConstant) {
  const auto m = parse_model(R"({"n_features": 3, "trees": [{"nodes": [{"id": 0, "value": 3.0, "count": 10}]}]})");
  EXPECT_EQ(m.predict(std::vector<double>{1, -2, 7}), 3.0);
  const auto& leaves = m.trees()[0].leaves();
  ASSERT_EQ(leaves.size(), 1u);
  EXPECT_TRUE(leaves[0].used_features.empty());
  EXPECT_TRUE(leaves[0].interval(0).unbounded());
}

TEST(TreeModel, GoldenFixtureStructure) {
  const auto m = load_model(fx::fixture("golden_tree.json"));
  ASSERT_EQ(m.trees().size(), 1u);
  EXPECT_EQ(m.trees()[0].size(), 15u);
  EXPECT_EQ(m.trees()[0].root().count, 335);
  EXPECT_EQ(m.trees()[0].node(1).count, 202);
  EXPECT_EQ(m.trees()[0].node(8).count, 133);
}

TEST(TreeModel, GoldenCompatibleLeaves) {
  const auto m = load_model(fx::fixture("golden_tree.json"));
  const Tree& t = m.trees()[0];
  const std::vector<double> x{2, 3, 0.5, -1};
  EXPECT_EQ(sorted(compatible_leaves(t, std::vector<int>{0, 2}, x)), (std::vector<int>{6, 7, 11, 13, 14}));
  EXPECT_EQ(compatible_leaves(t, std::vector<int>{0, 1, 2, 3}, x), ((std::vector<int>{t.leaf_for(x)})));
  EXPECT_EQ(compatible_leaves(t, std::vector<int>{}, x).size(), t.leaves().size());
}

TEST(TreeModel, CountInconsistencyRejected) {
  const char* doc = R"({"n_features": 1, "trees": [{"nodes": [
    {"id": 0, "feature": 0, "threshold": 0.0, "left": 1, "right": 2, "count": 10},
    {"id": 1, "value": 1.0, "count": 4},
    {"id": 2, "value": 2.0, "count": 7}]}]})";
  EXPECT_THROW(parse_model(doc), ValidationError);
}

TEST(TreeModel, ParseErrorsNameThePath) {
  try {
    parse_model(R"({"n_features": 1, "trees": [{"nodes": [{"id": 0, "feature": 0, "threshold": "x", "left": 1,
      "right": 2, "count": 2}, {"id": 1, "value": 1, "count": 1}, {"id": 2, "value": 2, "count": 1}]}]})");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.path(), "trees[0].nodes[0].threshold");
  }
  EXPECT_THROW(parse_model("{"), ParseError);
  EXPECT_THROW(parse_model(R"({"trees": []})"), ParseError);
  EXPECT_THROW(parse_model(R"({"n_features": 1, "trees": [{"nodes": [{"id": 0, "count": 1}]}]})"), ParseError);
  // Feature index beyond n_features.
  EXPECT_THROW(parse_model(R"({"n_features": 1, "trees": [{"nodes": [
    {"id": 0, "feature": 3, "threshold": 0, "left": 1, "right": 2, "count": 0},
    {"id": 1, "value": 1, "count": 0}, {"id": 2, "value": 1, "count": 0}]}]})"),
               ValidationError);
}

TEST(TreeModel, StructuralDefectsRejected) {
  // Node 2 has two parents and node 3 is unreachable.
  std::vector<TreeNode> nodes{{0, 0, 0.0, 1, 2, 0.0, 0}, {1, 0, 1.0, 2, 3, 0.0, 0}, {2, -1, 0, -1, -1, 1.0, 0},
                              {3, -1, 0, -1, -1, 1.0, 0}};
  EXPECT_THROW(Tree(nodes, 1), ValidationError);
  std::vector<TreeNode> inf_leaf{{0, -1, 0, -1, -1, std::numeric_limits<double>::infinity(), 1}};
  EXPECT_THROW(Tree(inf_leaf, 1), ValidationError);
}

TEST(TreeModel, StumpPredictionAndRegion) {
  const auto m = stump();
  EXPECT_EQ(m.predict(std::vector<double>{5.0, 0.0}), 1.0);
  EXPECT_EQ(m.predict(std::vector<double>{5.0, 0.305}), 1.0);
  EXPECT_EQ(m.predict(std::vector<double>{5.0, 0.3050001}), 2.0);
  const auto& left = m.trees()[0].leaves()[0];
  EXPECT_EQ(left.leaf_id, 1);
  EXPECT_EQ(left.interval(1), (Interval{-kInf, 0.305}));
  EXPECT_TRUE(left.interval(0).unbounded());
  EXPECT_THROW(m.predict(std::vector<double>{1.0}), ValidationError);
}

TEST(TreeModel, AverageAggregation) {
  auto m = parse_model(R"({"n_features": 1, "aggregation": "average", "trees": [
    {"nodes": [{"id": 0, "value": 1.0, "count": 1}]}, {"nodes": [{"id": 0, "value": 4.0, "count": 1}]}]})");
  EXPECT_DOUBLE_EQ(m.predict(std::vector<double>{0.0}), 2.5);
  EXPECT_DOUBLE_EQ(m.tree_weight(), 0.5);
}

TEST(TreeModel, PredictMatchesRegionMembership) {
  const auto ds = fx::random_dataset(400, 4, 3);
  const auto m = fx::random_forest(ds, 6, 1, 5);
  std::mt19937_64 rng(9);
  const Tree& t = m.trees()[0];
  for (int i = 0; i < 1000; ++i) {
    const auto x = fx::random_point(4, rng);
    double by_region = 0.0;
    int hits = 0;
    for (const auto& r : t.leaves()) {
      if (r.contains(x)) {
        by_region = r.value;
        ++hits;
      }
    }
    ASSERT_EQ(hits, 1);
    EXPECT_EQ(m.predict(x), by_region);
  }
}

TEST(TreeModel, RegionsPartitionTheSpace) {
  const auto ds = fx::random_dataset(600, 5, 11);
  const auto m = fx::random_forest(ds, 6, 1, 12);
  const Tree& t = m.trees()[0];
  EXPECT_LE(t.max_depth(), 6);
  for (const auto& r : t.leaves()) {
    EXPECT_LE(static_cast<int>(r.used_features.size()), r.depth);
    for (const auto& b : r.bounds) EXPECT_LT(b.lo, b.hi);
  }
  std::mt19937_64 rng(1);
  // Points drawn from the data, including exact threshold hits.
  std::vector<double> thresholds;
  for (const auto& nd : t.nodes()) {
    if (!nd.is_leaf()) thresholds.push_back(nd.threshold);
  }
  for (int i = 0; i < 10000; ++i) {
    auto x = fx::random_point(5, rng);
    if (i % 3 == 0 && !thresholds.empty()) x[static_cast<size_t>(i % 5)] = thresholds[static_cast<size_t>(i) % thresholds.size()];
    int hits = 0;
    for (const auto& r : t.leaves()) hits += r.contains(x) ? 1 : 0;
    ASSERT_EQ(hits, 1);
  }
}

TEST(TreeModel, CompatibilityIsMonotoneInS) {
  const auto ds = fx::random_dataset(500, 5, 21);
  const auto m = fx::random_forest(ds, 5, 1, 22);
  const Tree& t = m.trees()[0];
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = fx::random_point(5, rng);
    std::vector<int> s;
    std::vector<int> s2;
    for (int c = 0; c < 5; ++c) {
      const auto u = rng() % 3;
      if (u == 0) s.push_back(c);
      if (u <= 1) s2.push_back(c);
    }
    const auto small = sorted(compatible_leaves(t, s2, x));  // S' contains S
    const auto big = sorted(compatible_leaves(t, s, x));
    EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    // Full S leaves exactly the containing leaf.
    EXPECT_EQ(compatible_leaves(t, std::vector<int>{0, 1, 2, 3, 4}, x), (std::vector<int>{t.leaf_for(x)}));
  }
}

TEST(TreeModel, ReparametrizationKeepsCompatibleSets) {
  const auto ds = fx::random_dataset(500, 3, 31);
  const auto m = fx::random_forest(ds, 5, 1, 32);
  const FeatureMap g = [](int f, double v) { return f == 0 ? std::exp(v) : (f == 1 ? v * v * v + v : 2.0 * v - 7.0); };
  const auto mt = transform_thresholds(m, g);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = fx::random_point(3, rng);
    std::vector<double> gx(3);
    for (int f = 0; f < 3; ++f) gx[static_cast<size_t>(f)] = g(f, x[static_cast<size_t>(f)]);
    for (unsigned mask = 0; mask < 8; ++mask) {
      std::vector<int> s;
      for (int f = 0; f < 3; ++f) {
        if (mask & (1u << f)) s.push_back(f);
      }
      EXPECT_EQ(sorted(compatible_leaves(m.trees()[0], s, x)), sorted(compatible_leaves(mt.trees()[0], s, gx)));
    }
  }
}

TEST(TreeModel, DumpRoundTrip) {
  const auto m = load_model(fx::fixture("golden_tree.json"));
  const auto again = parse_model(dump_model(m));
  ASSERT_EQ(again.trees()[0].size(), m.trees()[0].size());
  for (size_t i = 0; i < m.trees()[0].size(); ++i) {
    const auto& a = m.trees()[0].nodes()[i];
    const auto& b = again.trees()[0].nodes()[i];
    EXPECT_EQ(a.feature, b.feature);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.count, b.count);
  }
  EXPECT_EQ(again.feature_names(), m.feature_names());
}
