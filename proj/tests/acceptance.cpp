// Acceptance run: prints one PASS/FAIL line per criterion, exits 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "leafshap/error.hpp"
#include "leafshap/estimators.hpp"
#include "leafshap/oracle.hpp"
#include "leafshap/shapley.hpp"
#include "leafshap/tree_model.hpp"
#include "support.hpp"

using namespace leafshap;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void guarded(const char* name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- golden fixture -------------------------------------------------------------

void golden() {
  const auto t0 = Clock::now();
  const auto model = load_model(fx::fixture("golden_tree.json"));
  ReducedPredictor pred(model, nullptr);
  const std::vector<double> x{2, 3, 0.5, -1};
  const int s[] = {0, 2};
  const double v = pred.shap_value(column_mask(4, s), x);
  const double secs = since(t0);
  report("golden-fixture", std::abs(v - 41.98) <= 0.01 && secs < 1.0,
         fmt("f_S(x) = %.6f for S = {0,2}, target 41.98 +- 0.01, %.4f s", v, secs));
}

// --- multi-games vs brute force ---------------------------------------------------

void oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int triples = 0;
  for (std::uint64_t seed = 0; seed < 240; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    const int p = 2 + static_cast<int>(rng() % 9);
    const int depth = 1 + static_cast<int>(rng() % 5);
    const int trees = 1 + static_cast<int>(rng() % 3);
    const auto ds = fx::random_dataset(150 + static_cast<int>(rng() % 300), p, seed + 1000);
    const auto model = fx::random_forest(ds, depth, trees, seed + 2000);
    ReducedPredictor pred(model, &ds);
    PlayerPartition players;
    if (p > 3 && seed % 3 == 0) {
      players.players.push_back({0, p - 1});
      for (int c = 1; c < p - 1; ++c) players.players.push_back({c});
    } else {
      players = PlayerPartition::singletons(p);
    }
    const auto x = seed % 2 ? fx::random_point(p, rng) : ds.row(rng() % ds.rows());
    EstimatorGame game(pred, players, x, EstimatorKind::kLeaf, LeafNormalization::kNone);
    const auto brute = shapley_from_table(tabulate(game), static_cast<int>(players.size()));
    const auto multi = multi_games_sv(pred, players, x);
    for (size_t i = 0; i < brute.phi.size(); ++i) worst = std::max(worst, std::abs(brute.phi[i] - multi.phi[i]));
    ++triples;
  }
  const double secs = since(t0);
  report("oracle-equivalence", triples >= 200 && worst <= 1e-9 && secs < 120.0,
         fmt("%d triples (p <= 10, depth <= 5), max |multi_games - brute_force| = %.3g, %.2f s", triples, worst, secs));
}

// --- efficiency -------------------------------------------------------------------

void efficiency() {
  double worst[3] = {0, 0, 0};
  int instances = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> cards;
    for (int j = 0; j < 3 + static_cast<int>(seed % 4); ++j) cards.push_back(2 + static_cast<int>((seed + j) % 4));
    const auto ds = gen_categorical(600, cards, 0.5, seed + 50);
    const auto model = fx::random_forest(ds, 2 + static_cast<int>(seed % 4), 1 + static_cast<int>(seed % 3), seed + 60);
    ReducedPredictor pred(model, &ds);
    const auto players = PlayerPartition::singletons(static_cast<int>(ds.cols()));
    for (size_t i = 0; i < 10; ++i) {
      const auto x = ds.row(i * 37 + seed);
      int k = 0;
      for (auto kind : {EstimatorKind::kShapPath, EstimatorKind::kDiscrete, EstimatorKind::kLeaf}) {
        ExplainOptions o;
        o.estimator = kind;
        const auto r = explain_instance(pred, players, x, o);
        worst[k] = std::max(worst[k], std::abs(r.efficiency_residual));
        ++k;
      }
      ++instances;
    }
  }
  const bool ok = instances >= 100 && worst[0] <= 1e-9 && worst[1] <= 1e-9 && worst[2] <= 1e-9;
  report("efficiency", ok,
         fmt("%d instances, max |f(x) - v(0) - sum phi|: shap_path %.3g, discrete %.3g, leaf %.3g", instances,
             worst[0], worst[1], worst[2]));
}

// --- categorical coalition ---------------------------------------------------------

struct DummyColumn {
  int feature;
  int category;
};

// Rebuilds a tree grown on dummy columns as a tree on category codes.
int convert(const Tree& src, int id, const std::vector<DummyColumn>& map, std::vector<TreeNode>& out) {
  const TreeNode& n = src.node(id);
  const int me = static_cast<int>(out.size());
  out.push_back({});
  if (n.is_leaf()) {
    out[static_cast<size_t>(me)].id = me;
    out[static_cast<size_t>(me)].value = n.value;
    return me;
  }
  if (!(n.threshold > 0.0 && n.threshold < 1.0)) throw std::runtime_error("dummy split outside (0, 1)");
  const auto [feature, k] = map.at(static_cast<size_t>(n.feature));
  // code < k -> dummy 0; code == k -> dummy 1; code > k -> dummy 0.
  TreeNode low;
  low.id = me;
  low.feature = feature;
  low.threshold = k - 0.5;
  low.left = convert(src, n.left, map, out);
  const int mid = static_cast<int>(out.size());
  out.push_back({});
  TreeNode high;
  high.id = mid;
  high.feature = feature;
  high.threshold = k + 0.5;
  high.left = convert(src, n.right, map, out);
  high.right = convert(src, n.left, map, out);
  out[static_cast<size_t>(mid)] = high;
  low.right = mid;
  out[static_cast<size_t>(me)] = low;
  return me;
}

void categorical_coalition() {
  double worst = 0.0;
  double max_gap = 0.0;
  int instances = 0;
  int diverging = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed + 900);
    std::vector<int> cards;
    for (int j = 0; j < 3; ++j) cards.push_back(2 + static_cast<int>(rng() % 3));
    const auto codes = gen_categorical(500, cards, 0.6, seed + 910);

    // Dummy representation: dummy columns only, one coalition per feature.
    std::vector<std::vector<double>> cols;
    std::vector<FeatureMeta> meta;
    std::vector<DummyColumn> map;
    std::vector<EncodedGroup> groups;
    PlayerPartition coalition;
    for (int j = 0; j < 3; ++j) {
      const auto enc = encode_categorical(codes, j, {EncodingScheme::kDummy});
      EncodedGroup g;
      g.scheme = EncodingScheme::kDummy;
      std::vector<int> player;
      for (int k = 0; k < cards[static_cast<size_t>(j)]; ++k) {
        const int src = enc.spec.column_map[static_cast<size_t>(k)];
        if (src < 0) continue;
        const int id = static_cast<int>(cols.size());
        const auto c = enc.data.column(static_cast<size_t>(src));
        cols.emplace_back(c.begin(), c.end());
        meta.push_back(enc.data.meta(static_cast<size_t>(src)));
        meta.back().source_feature = -1;
        map.push_back({j, k});
        g.columns.push_back(id);
        player.push_back(id);
      }
      groups.push_back(g);
      coalition.players.push_back(player);
      coalition.labels.push_back(codes.meta(static_cast<size_t>(j)).name);
    }
    const Dataset dummies(cols, meta);

    const auto grown = fx::random_forest(dummies, 3 + static_cast<int>(seed % 3), 1 + static_cast<int>(seed % 2), seed + 920);
    std::vector<Tree> code_trees;
    for (const auto& t : grown.trees()) {
      std::vector<TreeNode> nodes;
      convert(t, 0, map, nodes);
      code_trees.emplace_back(std::move(nodes), 3);
    }
    const auto enc_model = recount(grown, dummies);
    const auto code_model = recount(TreeEnsemble(code_trees, 3, grown.aggregation()), codes);
    ReducedPredictor enc_pred(enc_model, &dummies, {groups});
    ReducedPredictor code_pred(code_model, &codes);
    const auto original = PlayerPartition::singletons(3);
    const auto individual = PlayerPartition::singletons(static_cast<int>(dummies.cols()));

    ExplainOptions o;
    o.estimator = EstimatorKind::kDiscrete;
    for (size_t i = 0; i < 40; ++i) {
      const size_t row = (i * 11 + seed) % codes.rows();
      const auto a = explain_instance(code_pred, original, codes.row(row), o);
      const auto b = coalition_sv_categorical(enc_pred, coalition, groups, dummies.row(row), o);
      for (size_t j = 0; j < 3; ++j) worst = std::max(worst, std::abs(a.phi[j] - b.phi[j]));
      const auto ind = explain_instance(enc_pred, individual, dummies.row(row), o);
      const auto summed = sum_players(ind, coalition.players, coalition.labels);
      double gap = 0.0;
      for (size_t j = 0; j < 3; ++j) gap = std::max(gap, std::abs(summed.phi[j] - b.phi[j]));
      max_gap = std::max(max_gap, gap);
      if (gap > 1e-9) ++diverging;
      ++instances;
    }
  }
  report("categorical-coalition", worst <= 1e-12 && diverging > 0,
         fmt("%d instances, max |coalition(dummy) - original| = %.3g; sum of dummies differs from coalition on %d "
             "(max gap %.4g)",
             instances, worst, diverging, max_gap));
}

// --- piecewise model --------------------------------------------------------------

void piecewise() {
  PiecewiseModel m;
  const std::vector<double> x{1, 1, 2, 1, -0.5};
  const auto exact = brute_force_shapley(PiecewiseGame(m, x));
  GaussianLaw law({Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5)});
  MCGame game([&](std::span<const double> z) { return m.predict(z); }, law, x, 100000, 2021);
  const auto mc = mc_shapley(game);
  const double err = std::abs(mc.sv.phi[2] - exact.phi[2]);
  const bool ok = std::abs(exact.phi[2] - 0.5) <= 1e-9 && err <= 3 * mc.std_error[2];
  report("piecewise-off-branch", ok,
         fmt("phi_3 = %.12f (target 0.5, K = %.4f); MC phi_3 = %.5f +- %.5f, |diff| = %.2f SE", exact.phi[2],
             piecewise_off_branch_sv(m, x).k, mc.sv.phi[2], mc.std_error[2], err / mc.std_error[2]));
}

// --- experiments ------------------------------------------------------------------

void experiment1() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  const auto r = run_linear_experiment(c);
  const double secs = since(t0);
  const bool ok = r.leaf.median_rae < r.shap_path.median_rae && r.leaf.mean_tpr >= r.shap_path.mean_tpr && secs < 600;
  report("experiment-1", ok,
         fmt("median R-AE leaf %.3f vs shap_path %.3f; TPR leaf %.3f vs shap_path %.3f; holdout MSE %.3f "
             "(label var %.1f); %.0f s",
             r.leaf.median_rae, r.shap_path.median_rae, r.leaf.mean_tpr, r.shap_path.mean_tpr, r.test_mse,
             r.label_variance, secs));
}

void experiment2() {
  const auto t0 = Clock::now();
  const std::vector<double> rhos{0.0, 0.25, 0.5, 0.7, 0.9};
  std::vector<double> shap, leaf;
  std::string rows;
  bool leaf_wins = true;
  for (double rho : rhos) {
    ExperimentConfig c;
    c.rho = rho;
    c.n_instances = 100;
    const auto r = run_linear_experiment(c);
    shap.push_back(r.shap_path.median_rae);
    leaf.push_back(r.leaf.median_rae);
    if (rho >= 0.5 && !(r.leaf.median_rae < r.shap_path.median_rae)) leaf_wins = false;
    rows += fmt(" rho=%.2f: shap %.3f leaf %.3f;", rho, r.shap_path.median_rae, r.leaf.median_rae);
  }
  const double rs = spearman(rhos, shap);
  report("experiment-2", rs >= 0.8 && leaf_wins,
         fmt("Spearman(rho, median R-AE shap_path) = %.2f;", rs) + rows + fmt(" %.0f s", since(t0)));
}

// --- reparametrization ------------------------------------------------------------

void invariance() {
  int cases = 0;
  int mismatches = 0;
  const std::vector<std::function<double(double)>> maps{
      [](double v) { return std::exp(v); }, [](double v) { return v * v * v + v; },
      [](double v) { return 3.0 * v - 7.0; }, [](double v) { return std::atan(v / 4.0); }};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 4000);
    const int pc = 2 + static_cast<int>(rng() % 3);
    const auto cont = fx::random_dataset(400, pc, seed + 4100);
    const int cards[] = {3, 2 + static_cast<int>(rng() % 3)};
    const auto cat = gen_categorical(400, cards, 0.5, seed + 4200);
    std::vector<std::vector<double>> cols;
    std::vector<FeatureMeta> meta;
    for (size_t c = 0; c < cont.cols(); ++c) {
      cols.emplace_back(cont.column(c).begin(), cont.column(c).end());
      meta.push_back(cont.meta(c));
    }
    for (size_t c = 0; c < cat.cols(); ++c) {
      cols.emplace_back(cat.column(c).begin(), cat.column(c).end());
      meta.push_back(cat.meta(c));
    }
    const Dataset ds(cols, meta);
    const auto model = fx::random_forest(ds, 2 + static_cast<int>(seed % 4), 1 + static_cast<int>(seed % 3), seed + 4300);

    std::vector<int> which(static_cast<size_t>(pc));
    for (auto& w : which) w = static_cast<int>(rng() % maps.size());
    auto g = [&](int f, double v) { return f < pc ? maps[static_cast<size_t>(which[static_cast<size_t>(f)])](v) : v; };
    auto tcols = cols;
    for (int c = 0; c < pc; ++c) {
      for (auto& v : tcols[static_cast<size_t>(c)]) v = g(c, v);
    }
    const Dataset tds(tcols, meta);
    const auto tmodel = transform_thresholds(model, g);

    ReducedPredictor a(model, &ds);
    ReducedPredictor b(tmodel, &tds);
    const auto all = PlayerPartition::singletons(static_cast<int>(ds.cols()));
    // Discrete: the categorical columns play, the continuous ones stay unassigned.
    PlayerPartition cats{{{pc}, {pc + 1}}, {"Z1", "Z2"}};
    const size_t row = rng() % ds.rows();
    const auto x = ds.row(row);
    auto tx = x;
    for (int c = 0; c < pc; ++c) tx[static_cast<size_t>(c)] = g(c, x[static_cast<size_t>(c)]);
    ExplainOptions leaf;
    ExplainOptions disc;
    disc.estimator = EstimatorKind::kDiscrete;
    if (explain_instance(a, all, x, leaf).phi != explain_instance(b, all, tx, leaf).phi) ++mismatches;
    if (explain_instance(a, cats, x, disc).phi != explain_instance(b, cats, tx, disc).phi) ++mismatches;
    ++cases;
  }
  report("reparametrization-invariance", mismatches == 0,
         fmt("%d cases, %d non-identical phi vectors (leaf and discrete, compared bitwise)", cases, mismatches));
}

// --- complexity -------------------------------------------------------------------

void complexity() {
  const int p = 50;
  const auto ds = fx::random_dataset(50000, p, 77, 0.0);
  std::vector<double> dv, lops;
  std::string rows;
  double c_max = 0.0;
  for (int d : {2, 4, 6, 8}) {
    const auto model = recount(chain_tree(p, d, 100 + static_cast<std::uint64_t>(d)), ds);
    ReducedPredictor pred(model, &ds);
    std::mt19937_64 rng(d);
    MultiGamesStats st;
    multi_games_sv(pred, PlayerPartition::singletons(p), fx::random_point(p, rng), &st);
    dv.push_back(d);
    lops.push_back(std::log2(static_cast<double>(st.value_evaluations)));
    c_max = std::max(c_max, static_cast<double>(st.value_evaluations) / std::pow(2.0, d));
    rows += fmt(" D=%d: %lld ops;", d, static_cast<long long>(st.value_evaluations));
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < dv.size(); ++i) {
    mx += dv[i] / dv.size();
    my += lops[i] / dv.size();
  }
  double num = 0, den = 0;
  for (size_t i = 0; i < dv.size(); ++i) {
    num += (dv[i] - mx) * (lops[i] - my);
    den += (dv[i] - mx) * (dv[i] - mx);
  }
  const double slope = num / den;
  report("complexity", std::abs(slope - 1.0) <= 0.15,
         fmt("P = %d, fitted exponent %.3f (log2 ops vs D), ops <= %.2f * 2^D;", p, slope, c_max) + rows);
}

}  // namespace

int main() {
  guarded("golden-fixture", golden);
  guarded("oracle-equivalence", oracle_equivalence);
  guarded("efficiency", efficiency);
  guarded("categorical-coalition", categorical_coalition);
  guarded("piecewise-off-branch", piecewise);
  guarded("reparametrization-invariance", invariance);
  guarded("complexity", complexity);
  guarded("experiment-1", experiment1);
  guarded("experiment-2", experiment2);
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
