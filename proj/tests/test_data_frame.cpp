#include <gtest/gtest.h>

#include <random>

#include "leafshap/data_frame.hpp"
#include "leafshap/error.hpp"
#include "support.hpp"

using namespace leafshap;

namespace {

Dataset categorical_abc(std::vector<double> codes) {
  return Dataset({std::move(codes)}, {{"Z", FeatureKind::kCategorical, {"a", "b", "c"}}});
}

}  // namespace

TEST(DataFrame, LoadsSmallCsv) {
  const auto schema = Schema::parse("u = continuous\nv = continuous\n");
  const auto ds = load_dataset("u,v\n1,2\n3.5,-4\n0,1e-3\n", schema);
  EXPECT_EQ(ds.rows(), 3u);
  EXPECT_EQ(ds.cols(), 2u);
  EXPECT_EQ(ds.at(1, 1), -4.0);
  EXPECT_EQ(ds.at(2, 1), 1e-3);
}

TEST(DataFrame, UnknownCategoryNamesTheRow) {
  const auto schema = Schema::parse("Z = categorical(a,b,c)\n");
  try {
    load_dataset("Z\na\nb\nd\n", schema);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.path(), "csv row 2");
    EXPECT_NE(std::string(e.what()).find("\"d\""), std::string::npos);
  }
}

TEST(DataFrame, RejectsBadTokensAndRaggedRows) {
  const auto schema = Schema::parse("u = continuous\nv = indicator\n");
  EXPECT_THROW(load_dataset("u,v\n1,0\nfoo,1\n", schema), ParseError);
  EXPECT_THROW(load_dataset("u,v\n1,0\n2\n", schema), ParseError);
  EXPECT_THROW(load_dataset("u,v\n1,2\n", schema), ParseError);
  EXPECT_THROW(load_dataset("u,w\n1,0\n", schema), ParseError);
  EXPECT_THROW(load_dataset("u,v\nnan,0\n", schema), ParseError);
  EXPECT_THROW(Schema::parse("u = fancy\n"), ParseError);
}

TEST(DataFrame, CsvRoundTripIsExact) {
  const auto base = fx::random_dataset(10000, 3, 7, 0.0);
  const auto ds = base.with_column(std::vector<double>(base.rows(), 1.0), {"flag", FeatureKind::kIndicator});
  const auto back = load_dataset(write_csv(ds), schema_of(ds));
  ASSERT_EQ(back.rows(), ds.rows());
  for (size_t c = 0; c < ds.cols(); ++c) {
    for (size_t r = 0; r < ds.rows(); ++r) ASSERT_EQ(back.at(r, c), ds.at(r, c));
  }
  const auto abc = categorical_abc({0, 2, 1});
  const auto back2 = load_dataset(write_csv(abc), Schema::parse(schema_of(abc).to_text()));
  EXPECT_EQ(back2.at(1, 0), 2.0);
}

TEST(DataFrame, DatasetInvariants) {
  EXPECT_THROW(categorical_abc({0, 3}), ValidationError);
  EXPECT_THROW(Dataset({{1.0, std::numeric_limits<double>::infinity()}}, {{"u"}}), ValidationError);
  EXPECT_THROW(Dataset({{0.5}}, {{"i", FeatureKind::kIndicator}}), ValidationError);
  EXPECT_THROW(Dataset({{1.0}, {1.0, 2.0}}, {{"u"}, {"v"}}), ValidationError);
}

TEST(DataFrame, QuantileConstantColumnHasOneBin) {
  const Dataset ds({std::vector<double>(50, 4.2)}, {{"u"}});
  const int cols[] = {0};
  const auto res = quantile_discretize(ds, cols, 10);
  EXPECT_EQ(res.data.meta(0).bin_edges.size(), 2u);
  EXPECT_EQ(res.warnings.size(), 1u);
  for (size_t r = 0; r < ds.rows(); ++r) EXPECT_EQ(res.data.at(r, 0), 0.0);
}

TEST(DataFrame, QuantileMedianSplitsTwoTwo) {
  const Dataset ds({{1, 2, 3, 4}}, {{"u"}});
  const int cols[] = {0};
  const auto res = quantile_discretize(ds, cols, 2);
  EXPECT_EQ(res.data.column(0)[0], 0.0);
  EXPECT_EQ(res.data.column(0)[1], 0.0);
  EXPECT_EQ(res.data.column(0)[2], 1.0);
  EXPECT_EQ(res.data.column(0)[3], 1.0);
  EXPECT_TRUE(res.warnings.empty());
}

TEST(DataFrame, QuantileBinsAreBalancedOnUniformData) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u;
  std::vector<double> v(100000);
  for (auto& x : v) x = u(rng);
  const Dataset ds({v}, {{"u"}});
  const int cols[] = {0};
  const auto res = quantile_discretize(ds, cols, 10);
  std::vector<int> counts(10, 0);
  for (double c : res.data.column(0)) ++counts[static_cast<size_t>(c)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 200);
  const auto& edges = res.data.meta(0).bin_edges;
  EXPECT_EQ(edges.front(), -kInf);
  EXPECT_EQ(edges.back(), kInf);
  EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
  // Re-applying the recorded edges to the raw column reproduces the codes.
  const auto again = apply_bins(edges, v);
  for (size_t i = 0; i < v.size(); ++i) ASSERT_EQ(again[i], res.data.at(i, 0));
}

TEST(DataFrame, IndicatorExpansionIsExclusive) {
  const auto ds = fx::random_dataset(500, 2, 5);
  const int cols[] = {1};
  const auto res = quantile_discretize(ds, cols, 4, true);
  ASSERT_EQ(res.indicator_groups.size(), 1u);
  const auto& group = res.indicator_groups.players[0];
  for (size_t r = 0; r < res.data.rows(); ++r) {
    int ones = 0;
    for (int c : group) ones += res.data.at(r, static_cast<size_t>(c)) == 1.0;
    ASSERT_EQ(ones, 1);
    EXPECT_EQ(res.data.at(r, static_cast<size_t>(group[static_cast<size_t>(res.data.at(r, 1))])), 1.0);
  }
  EXPECT_THROW(quantile_discretize(ds, cols, 1), ConfigError);
}

TEST(DataFrame, DummyAndOneHotEncoding) {
  const auto ds = categorical_abc({0, 1, 2, 0});
  const auto de = encode_categorical(ds, 0, {EncodingScheme::kDummy});
  ASSERT_EQ(de.group.size(), 2u);
  EXPECT_EQ(de.data.cols(), 3u);  // source kept
  EXPECT_EQ(de.data.at(0, 1), 1.0);
  EXPECT_EQ(de.data.at(0, 2), 0.0);
  EXPECT_EQ(de.data.at(2, 1), 0.0);
  EXPECT_EQ(de.data.at(2, 2), 0.0);
  EXPECT_EQ(decode_categorical(de.data, de.spec), (std::vector<double>{0, 1, 2, 0}));

  const auto ohe = encode_categorical(ds, 0, {EncodingScheme::kOneHot});
  ASSERT_EQ(ohe.group.size(), 3u);
  for (size_t r = 0; r < ds.rows(); ++r) {
    double s = 0;
    for (int c : ohe.group) s += ohe.data.at(r, static_cast<size_t>(c));
    EXPECT_EQ(s, 1.0);
  }
  EXPECT_EQ(decode_categorical(ohe.data, ohe.spec), (std::vector<double>{0, 1, 2, 0}));

  const Dataset single({{0, 0}}, {{"Z", FeatureKind::kCategorical, {"only"}}});
  EXPECT_THROW(encode_categorical(single, 0, {EncodingScheme::kDummy}), ConfigError);
  EXPECT_TRUE(feasible_pattern(EncodingScheme::kDummy, std::vector<double>{0, 0}));
  EXPECT_FALSE(feasible_pattern(EncodingScheme::kDummy, std::vector<double>{1, 1}));
  EXPECT_FALSE(feasible_pattern(EncodingScheme::kOneHot, std::vector<double>{0, 0, 0}));
}

TEST(DataFrame, ToyLayoutWidths) {
  const auto toy = gen_toy_categorical(300, 1);
  EXPECT_EQ(encode_categorical(toy.data, 3, {EncodingScheme::kDummy}).data.cols() - 1, 3u + 2u);
  EXPECT_EQ(encode_categorical(toy.data, 3, {EncodingScheme::kOneHot}).data.cols() - 1, 3u + 3u);
}

TEST(DataFrame, CountRegionMatchesScan) {
  const auto ds = fx::random_dataset(2000, 4, 9);
  EXPECT_EQ(count_region(ds, {}), 2000);
  const Constraint none[] = {Constraint::interval(0, 100, 200)};
  EXPECT_EQ(count_region(ds, none), 0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Constraint> cs;
    for (int c = 0; c < 4; ++c) {
      if (rng() % 2) {
        double a = nd(rng);
        double b = nd(rng);
        if (a > b) std::swap(a, b);
        cs.push_back(Constraint::interval(c, a, b));
      }
    }
    if (rng() % 3 == 0) cs.push_back(Constraint::exact(1, ds.at(static_cast<size_t>(rng() % 2000), 1)));
    std::int64_t scan = 0;
    for (size_t r = 0; r < ds.rows(); ++r) {
      bool ok = true;
      for (const auto& c : cs) ok = ok && c.holds(ds.at(r, static_cast<size_t>(c.column)));
      scan += ok;
    }
    EXPECT_EQ(count_region(ds, cs), scan);
    // Adding a constraint never increases the count.
    auto more = cs;
    more.push_back(Constraint::interval(2, -0.5, 0.5));
    EXPECT_LE(count_region(ds, more), count_region(ds, cs));
  }
}

TEST(DataFrame, PartitionValidationAndJson) {
  auto p = PlayerPartition::from_json(R"({"players": [[0, 2], [1]], "labels": ["a", "b"]})");
  EXPECT_NO_THROW(p.validate(3));
  EXPECT_EQ(p.owner_of_columns(4), (std::vector<int>{0, 1, 0, -1}));
  EXPECT_EQ(PlayerPartition::from_json(p.to_json()), p);
  EXPECT_THROW(PlayerPartition::from_json(R"({"players": [[0], [0]]})").validate(2), ValidationError);
  EXPECT_THROW(PlayerPartition::from_json(R"({"players": [[]]})").validate(2), ValidationError);
  EXPECT_THROW(PlayerPartition::from_json(R"({"players": [[5]]})").validate(2), ValidationError);
  EXPECT_THROW(PlayerPartition::from_json(R"({"players": 3})"), ParseError);
}
