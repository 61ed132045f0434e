#include "leafshap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "leafshap/error.hpp"

namespace leafshap {

namespace {

void check_players(int players, int max_players) {
  if (players < 0) throw ConfigError("negative player count");
  const int cap = std::min(max_players, kHardMaxPlayers);
  if (players > cap) {
    throw ConfigError("subset enumeration over " + std::to_string(players) + " players exceeds the guard of " +
                      std::to_string(cap));
  }
}

}  // namespace

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * static_cast<double>(n - k + j) / static_cast<double>(j);
  return std::round(r) == r || r > 9e15 ? r : std::round(r);
}

std::vector<double> shapley_kernel(int players) {
  std::vector<double> w(static_cast<size_t>(std::max(players, 0)));
  for (int s = 0; s < players; ++s) w[static_cast<size_t>(s)] = 1.0 / (players * binomial(players - 1, s));
  return w;
}

std::vector<double> tabulate(const ValueFunction& game, int max_players) {
  const int p = game.players();
  check_players(p, max_players);
  const size_t total = size_t{1} << p;
  std::vector<double> table(total);
  for (size_t i = 0; i < total; ++i) {
    const PlayerMask gray = i ^ (i >> 1);
    table[gray] = game.value(gray);
  }
  return table;
}

std::vector<double> shapley_coefficients(int players, int player) {
  const auto w = shapley_kernel(players);
  const PlayerMask bit = PlayerMask{1} << player;
  std::vector<double> c(size_t{1} << players, 0.0);
  for (PlayerMask t = 0; t < c.size(); ++t) {
    const int size = std::popcount(t);
    c[t] = (t & bit) ? w[static_cast<size_t>(size - 1)] : -w[static_cast<size_t>(size)];
  }
  return c;
}

ShapleyValues shapley_from_table(std::span<const double> table, int players) {
  if (table.size() != (size_t{1} << players)) throw ConfigError("value table size does not match player count");
  ShapleyValues out;
  out.phi.assign(static_cast<size_t>(players), 0.0);
  out.base_value = table.front();
  out.full_value = table.back();
  const auto w = shapley_kernel(players);
  for (int i = 0; i < players; ++i) {
    const PlayerMask bit = PlayerMask{1} << i;
    double acc = 0.0;
    for (PlayerMask s = 0; s < table.size(); ++s) {
      if (s & bit) continue;
      acc += w[static_cast<size_t>(std::popcount(s))] * (table[s | bit] - table[s]);
    }
    out.phi[static_cast<size_t>(i)] = acc;
  }
  return out;
}

double coalition_shapley(std::span<const double> table, int players, PlayerMask coalition) {
  if (table.size() != (size_t{1} << players)) throw ConfigError("value table size does not match player count");
  const int c = std::popcount(coalition);
  if (c == 0) throw ConfigError("coalition must be non-empty");
  const int rest = players - c;
  double acc = 0.0;
  for (PlayerMask s = 0; s < table.size(); ++s) {
    if (s & coalition) continue;
    acc += (table[s | coalition] - table[s]) / binomial(rest, std::popcount(s));
  }
  return acc / static_cast<double>(rest + 1);
}

ShapleyValues brute_force_shapley(const ValueFunction& game, int max_players) {
  const auto table = tabulate(game, max_players);
  return shapley_from_table(table, game.players());
}

double multi_games_weight(int players, int subset_size, int leaf_players) {
  if (leaf_players < 1 || leaf_players > players || subset_size < 0 || subset_size >= leaf_players) {
    throw ConfigError("invalid multi-games weight arguments");
  }
  // Terms r_k = C(P-d, k) / C(P-1, k+s) by their ratio recurrence; the explicit
  // binomials overflow long before P = 1000.
  const int p = players;
  const int d = leaf_players;
  const int s = subset_size;
  double term = 1.0 / binomial(p - 1, s);
  if (!std::isfinite(term) || term == 0.0) {
    term = std::exp(std::lgamma(s + 1.0) + std::lgamma(p - s + 0.0) - std::lgamma(p + 0.0));
  }
  double sum = term;
  for (int k = 0; k < p - d; ++k) {
    term *= static_cast<double>(p - d - k) / static_cast<double>(k + 1);
    term *= static_cast<double>(k + s + 1) / static_cast<double>(p - 1 - k - s);
    sum += term;
  }
  return sum;
}

// ---------------------------------------------------------------------------

EstimatorGame::EstimatorGame(const ReducedPredictor& predictor, const PlayerPartition& partition,
                             std::span<const double> x, EstimatorKind kind, LeafNormalization norm)
    : predictor_(&predictor),
      partition_(&partition),
      x_(x.begin(), x.end()),
      kind_(kind),
      norm_(norm),
      in_s_(static_cast<size_t>(predictor.n_features()), 0) {
  if (static_cast<int>(x_.size()) != predictor.n_features()) {
    throw ValidationError("point has " + std::to_string(x_.size()) + " coordinates, model expects " +
                          std::to_string(predictor.n_features()));
  }
  partition.validate(predictor.n_features());
}

std::vector<int> EstimatorGame::columns_of(PlayerMask subset) const {
  std::vector<int> cols;
  for (size_t g = 0; g < partition_->size(); ++g) {
    if (subset & (PlayerMask{1} << g)) cols.insert(cols.end(), partition_->players[g].begin(), partition_->players[g].end());
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

double EstimatorGame::value(PlayerMask subset) const {
  PlayerMask flip = subset ^ current_;
  while (flip) {
    const int g = std::countr_zero(flip);
    flip &= flip - 1;
    const char on = (subset >> g) & 1 ? 1 : 0;
    for (int c : partition_->players[static_cast<size_t>(g)]) in_s_[static_cast<size_t>(c)] = on;
  }
  current_ = subset;
  try {
    switch (kind_) {
      case EstimatorKind::kShapPath:
        return predictor_->shap_value(in_s_, x_);
      case EstimatorKind::kLeaf:
        return predictor_->leaf_value(in_s_, x_, norm_);
      case EstimatorKind::kDiscrete:
        return predictor_->discrete_reduced(in_s_, x_).value;
    }
  } catch (const DegenerateQueryError& e) {
    std::string cols;
    for (int c : columns_of(subset)) cols += (cols.empty() ? "" : ",") + std::to_string(c);
    throw DegenerateQueryError(std::string(e.what()) + " [subset S = {" + cols + "}]");
  }
  throw ConfigError("unknown estimator");
}

DiscreteGame::DiscreteGame(const ReducedPredictor& predictor, const PlayerPartition& partition,
                           std::span<const double> x, int max_players)
    : players_(static_cast<int>(partition.size())), x_(x.begin(), x.end()) {
  check_players(players_, max_players);
  partition.validate(predictor.n_features());
  std::vector<char> all(static_cast<size_t>(predictor.n_features()), 0);
  for (const auto& g : partition.players) {
    for (int c : g) all[static_cast<size_t>(c)] = 1;
  }
  predictor.check_discrete_columns(all);
  const Dataset& ds = *predictor.data();
  const auto& pred = predictor.row_predictions();
  const size_t total = size_t{1} << players_;
  matches_.assign(total, 0);
  sums_.assign(total, 0.0);
  for (size_t r = 0; r < ds.rows(); ++r) {
    PlayerMask m = 0;
    for (size_t g = 0; g < partition.size(); ++g) {
      bool ok = true;
      for (int c : partition.players[g]) {
        if (ds.at(r, static_cast<size_t>(c)) != x_[static_cast<size_t>(c)]) {
          ok = false;
          break;
        }
      }
      if (ok) m |= PlayerMask{1} << g;
    }
    ++matches_[m];
    sums_[m] += pred[r];
  }
  for (int k = 0; k < players_; ++k) {
    const PlayerMask bit = PlayerMask{1} << k;
    for (PlayerMask s = 0; s < total; ++s) {
      if (!(s & bit)) {
        matches_[s] += matches_[s | bit];
        sums_[s] += sums_[s | bit];
      }
    }
  }
}

double DiscreteGame::value(PlayerMask subset) const {
  const auto n = matches_.at(subset);
  if (n == 0) {
    throw DegenerateQueryError("discrete estimator: no observation matches the query on player subset mask " +
                               std::to_string(subset) + " (unsupported conditioning)");
  }
  return sums_[subset] / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Algorithm a) { return a == Algorithm::kBruteForce ? "brute_force" : "multi_games"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "brute_force") return Algorithm::kBruteForce;
  if (name == "multi_games") return Algorithm::kMultiGames;
  throw ConfigError("unknown algorithm \"" + std::string(name) + "\" (expected brute_force|multi_games)");
}

ShapleyValues multi_games_sv(const ReducedPredictor& predictor, const PlayerPartition& partition,
                             std::span<const double> x, MultiGamesStats* stats) {
  const int p_cols = predictor.n_features();
  if (static_cast<int>(x.size()) != p_cols) throw ValidationError("point dimension mismatch");
  partition.validate(p_cols);
  const int players = static_cast<int>(partition.size());
  const auto owner = partition.owner_of_columns(p_cols);
  const auto& counts = predictor.counts();
  const auto& ensemble = predictor.ensemble();
  const double n_rows = static_cast<double>(counts.rows());

  ShapleyValues out;
  out.phi.assign(static_cast<size_t>(players), 0.0);
  // Per leaf-size kernel: multi_games_weight(P, s, d) / P, cached by d.
  std::vector<std::vector<double>> kernel;
  auto kernel_for = [&](int d) -> const std::vector<double>& {
    if (static_cast<int>(kernel.size()) <= d) kernel.resize(static_cast<size_t>(d) + 1);
    auto& k = kernel[static_cast<size_t>(d)];
    if (k.empty()) {
      for (int s = 0; s < d; ++s) k.push_back(multi_games_weight(players, s, d) / players);
    }
    return k;
  };

  std::vector<int> leaf_players;
  std::vector<std::uint32_t> player_bits;
  std::vector<double> v;
  for (size_t t = 0; t < ensemble.trees().size(); ++t) {
    const auto& leaves = ensemble.trees()[t].leaves();
    double base_tree = 0.0;
    for (size_t m = 0; m < leaves.size(); ++m) {
      const LeafRegion& r = leaves[m];
      const double f = predictor.effective_value(t, m);
      const double n_leaf = static_cast<double>(counts.leaf_count(t, m));
      base_tree += f * n_leaf / n_rows;

      // Players touching this leaf and the used-feature bits each one owns.
      leaf_players.clear();
      player_bits.clear();
      std::uint32_t inside = 0;
      for (size_t k = 0; k < r.used_features.size(); ++k) {
        const auto col = static_cast<size_t>(r.used_features[k]);
        if (r.bounds[k].contains(x[col])) inside |= 1u << k;
        const int g = owner[col];
        if (g < 0) continue;
        auto it = std::find(leaf_players.begin(), leaf_players.end(), g);
        if (it == leaf_players.end()) {
          leaf_players.push_back(g);
          player_bits.push_back(1u << k);
        } else {
          player_bits[static_cast<size_t>(it - leaf_players.begin())] |= 1u << k;
        }
      }
      const int d = static_cast<int>(leaf_players.size());
      if (d == 0 || f == 0.0) continue;
      if (stats) ++stats->leaf_games;

      // v_m(T) = f_m 1[x_T in L_m^T] N(L_m) / N(L_m^T), zero when N(L_m^T) = 0.
      const size_t subsets = size_t{1} << d;
      v.assign(subsets, 0.0);
      for (size_t s = 0; s < subsets; ++s) {
        std::uint32_t local = 0;
        for (int j = 0; j < d; ++j) {
          if (s & (size_t{1} << j)) local |= player_bits[static_cast<size_t>(j)];
        }
        if (stats) ++stats->value_evaluations;
        if ((local & ~inside) != 0) continue;
        const auto n_s = counts.count(t, m, local);
        if (n_s == 0) continue;
        v[s] = f * n_leaf / static_cast<double>(n_s);
      }
      const auto& w = kernel_for(d);
      for (int j = 0; j < d; ++j) {
        const size_t bit = size_t{1} << j;
        double acc = 0.0;
        for (size_t s = 0; s < subsets; ++s) {
          if (s & bit) continue;
          acc += w[static_cast<size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
        out.phi[static_cast<size_t>(leaf_players[static_cast<size_t>(j)])] += acc * ensemble.tree_weight();
      }
    }
    out.base_value += base_tree;
  }
  out.base_value *= ensemble.tree_weight();
  out.full_value = out.base_value + std::accumulate(out.phi.begin(), out.phi.end(), 0.0);
  return out;
}

namespace {

// Players holding at least one split column. Only the path and leaf
// estimators ignore unused columns; the discrete one and encoded groups do not.
std::vector<int> active_players(const ReducedPredictor& predictor, const PlayerPartition& partition,
                                const ExplainOptions& options) {
  std::vector<int> all(partition.size());
  std::iota(all.begin(), all.end(), 0);
  if (options.estimator == EstimatorKind::kDiscrete || !predictor.options().encoded_groups.empty()) return all;
  std::vector<char> used(static_cast<size_t>(predictor.n_features()), 0);
  for (const auto& t : predictor.ensemble().trees()) {
    for (const auto& nd : t.nodes()) {
      if (!nd.is_leaf()) used[static_cast<size_t>(nd.feature)] = 1;
    }
  }
  std::vector<int> out;
  for (size_t g = 0; g < partition.size(); ++g) {
    for (int c : partition.players[g]) {
      if (used.at(static_cast<size_t>(c))) {
        out.push_back(static_cast<int>(g));
        break;
      }
    }
  }
  return out;
}

}  // namespace

SVReport explain_instance(const ReducedPredictor& predictor, const PlayerPartition& partition,
                          std::span<const double> x, const ExplainOptions& options, std::string instance_id) {
  SVReport rep;
  rep.instance = std::move(instance_id);
  rep.estimator = options.estimator;
  rep.algorithm = options.algorithm;
  rep.leaf_normalization = options.leaf_normalization;
  rep.labels = partition.labels;
  if (rep.labels.size() != partition.size()) {
    rep.labels.clear();
    for (size_t g = 0; g < partition.size(); ++g) rep.labels.push_back("player" + std::to_string(g));
  }
  rep.prediction = predictor.predict(x);

  ShapleyValues sv;
  if (options.algorithm == Algorithm::kMultiGames) {
    if (options.estimator != EstimatorKind::kLeaf) {
      throw ConfigError("multi_games requires the leaf estimator");
    }
    if (options.leaf_normalization != LeafNormalization::kNone) {
      throw ConfigError("multi_games decomposes the unnormalized leaf game; use leaf normalization \"none\"");
    }
    sv = multi_games_sv(predictor, partition, x);
  } else if (const auto active = active_players(predictor, partition, options);
             active.size() < partition.size()) {
    // Players the ensemble never splits on are null players; enumerate the rest.
    PlayerPartition sub;
    for (int g : active) sub.players.push_back(partition.players[static_cast<size_t>(g)]);
    EstimatorGame game(predictor, sub, x, options.estimator, options.leaf_normalization);
    const auto table = tabulate(game, options.max_players);
    if (options.diagnostics) {
      for (PlayerMask s = 0; s < table.size(); ++s) rep.diagnostics.push_back({game.columns_of(s), table[s]});
    }
    const auto part = shapley_from_table(table, static_cast<int>(sub.size()));
    sv.base_value = part.base_value;
    sv.full_value = part.full_value;
    sv.phi.assign(partition.size(), 0.0);
    for (size_t i = 0; i < active.size(); ++i) sv.phi[static_cast<size_t>(active[i])] = part.phi[i];
  } else {
    std::vector<double> table;
    if (options.estimator == EstimatorKind::kDiscrete) {
      DiscreteGame game(predictor, partition, x, options.max_players);
      table = tabulate(game, options.max_players);
    } else {
      EstimatorGame game(predictor, partition, x, options.estimator, options.leaf_normalization);
      table = tabulate(game, options.max_players);
      if (options.diagnostics) {
        for (PlayerMask s = 0; s < table.size(); ++s) rep.diagnostics.push_back({game.columns_of(s), table[s]});
      }
    }
    if (options.diagnostics && rep.diagnostics.empty()) {
      EstimatorGame cols(predictor, partition, x, options.estimator, options.leaf_normalization);
      for (PlayerMask s = 0; s < table.size(); ++s) rep.diagnostics.push_back({cols.columns_of(s), table[s]});
    }
    sv = shapley_from_table(table, static_cast<int>(partition.size()));
  }
  rep.phi = sv.phi;
  rep.base_value = sv.base_value;
  rep.efficiency_residual =
      rep.prediction - rep.base_value - std::accumulate(rep.phi.begin(), rep.phi.end(), 0.0);
  return rep;
}

SVReport coalition_sv_categorical(const ReducedPredictor& predictor, const PlayerPartition& partition,
                                  std::span<const EncodedGroup> groups, std::span<const double> x,
                                  const ExplainOptions& options, std::string instance_id) {
  const auto owner = partition.owner_of_columns(predictor.n_features());
  for (const auto& g : groups) {
    if (g.columns.empty()) throw ConfigError("empty encoded group");
    const int first = owner.at(static_cast<size_t>(g.columns.front()));
    for (int c : g.columns) {
      if (owner.at(static_cast<size_t>(c)) < 0) {
        throw ConfigError("encoded column " + std::to_string(c) + " is not assigned to any player");
      }
      if (owner[static_cast<size_t>(c)] != first) {
        throw ConfigError("encoded column " + std::to_string(c) + " is split from its group's coalition");
      }
    }
  }
  return explain_instance(predictor, partition, x, options, std::move(instance_id));
}

SVReport sum_players(const SVReport& report, const std::vector<std::vector<int>>& groups,
                     const std::vector<std::string>& labels) {
  SVReport out = report;
  out.phi.clear();
  out.labels = labels;
  out.diagnostics.clear();
  for (const auto& g : groups) {
    double s = 0.0;
    for (int i : g) s += report.phi.at(static_cast<size_t>(i));
    out.phi.push_back(s);
  }
  return out;
}

std::vector<SVReport> explain_batch(const ReducedPredictor& predictor, const PlayerPartition& partition,
                                    const std::vector<std::vector<double>>& points,
                                    const std::vector<std::string>& ids, const ExplainOptions& options,
                                    int workers) {
  std::vector<SVReport> out(points.size());
  auto run = [&](size_t i) {
    const std::string id = i < ids.size() ? ids[i] : std::to_string(i);
    try {
      out[i] = explain_instance(predictor, partition, points[i], options, id);
    } catch (const DegenerateQueryError& e) {
      throw DegenerateQueryError("instance " + id + ": " + e.what());
    }
  };
  workers = std::max(1, workers);
  if (workers == 1 || points.size() < 2) {
    for (size_t i = 0; i < points.size(); ++i) run(i);
    return out;
  }
  // Static interleaved assignment; each slot is written by exactly one worker.
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = static_cast<size_t>(w); i < points.size(); i += static_cast<size_t>(workers)) run(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using ojson = nlohmann::ordered_json;

ojson report_json(const SVReport& r) {
  ojson j;
  j["instance"] = r.instance;
  j["estimator"] = std::string(to_string(r.estimator));
  j["algorithm"] = std::string(to_string(r.algorithm));
  if (r.estimator == EstimatorKind::kLeaf) j["leaf_normalization"] = std::string(to_string(r.leaf_normalization));
  j["base_value"] = r.base_value;
  j["prediction"] = r.prediction;
  ojson phi = ojson::object();
  for (size_t i = 0; i < r.phi.size(); ++i) phi[r.labels.at(i)] = r.phi[i];
  j["phi"] = std::move(phi);
  j["efficiency_residual"] = r.efficiency_residual;
  if (!r.diagnostics.empty()) {
    ojson diag = ojson::array();
    for (const auto& d : r.diagnostics) diag.push_back(ojson{{"S", d.columns}, {"value", d.value}});
    j["reduced_values"] = std::move(diag);
  }
  return j;
}

SVReport report_from(const ojson& j) {
  SVReport r;
  r.instance = j.at("instance").get<std::string>();
  r.estimator = parse_estimator(j.at("estimator").get<std::string>());
  r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  if (auto it = j.find("leaf_normalization"); it != j.end()) {
    r.leaf_normalization = it->get<std::string>() == "z" ? LeafNormalization::kByZ : LeafNormalization::kNone;
  }
  r.base_value = j.at("base_value").get<double>();
  r.prediction = j.at("prediction").get<double>();
  for (const auto& [k, v] : j.at("phi").items()) {
    r.labels.push_back(k);
    r.phi.push_back(v.get<double>());
  }
  r.efficiency_residual = j.at("efficiency_residual").get<double>();
  if (auto it = j.find("reduced_values"); it != j.end()) {
    for (const auto& d : *it) r.diagnostics.push_back({d.at("S").get<std::vector<int>>(), d.at("value").get<double>()});
  }
  return r;
}

}  // namespace

std::string report_to_json(const SVReport& r) { return report_json(r).dump(); }

std::string reports_to_json(std::span<const SVReport> reports) {
  ojson arr = ojson::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(1) + "\n";
}

std::vector<SVReport> reports_from_json(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw ParseError("reports", e.what());
  }
  std::vector<SVReport> out;
  try {
    if (doc.is_array()) {
      for (const auto& j : doc) out.push_back(report_from(j));
    } else {
      out.push_back(report_from(doc));
    }
  } catch (const ojson::exception& e) {
    throw ParseError("reports", e.what());
  }
  return out;
}

std::string reports_to_csv(std::span<const SVReport> reports) {
  std::string out = "instance";
  if (!reports.empty()) {
    for (const auto& l : reports.front().labels) out += "," + l;
  }
  out += ",base_value,prediction,efficiency_residual\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    out += r.instance;
    for (double v : r.phi) out += "," + num(v);
    out += "," + num(r.base_value) + "," + num(r.prediction) + "," + num(r.efficiency_residual) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<int> rank_by_magnitude(std::span<const double> phi) {
  std::vector<int> idx(phi.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(phi[static_cast<size_t>(a)]) > std::abs(phi[static_cast<size_t>(b)]);
  });
  return idx;
}

GlobalImportance global_importance(std::span<const SVReport> reports) {
  GlobalImportance g;
  if (reports.empty()) return g;
  g.labels = reports.front().labels;
  g.importance.assign(g.labels.size(), 0.0);
  for (const auto& r : reports) {
    if (r.labels != g.labels) {
      throw ConfigError("global importance over reports with different player partitions (instance " + r.instance + ")");
    }
    for (size_t j = 0; j < r.phi.size(); ++j) g.importance[j] += std::abs(r.phi[j]);
  }
  g.ranking = rank_by_magnitude(g.importance);
  return g;
}

double ranking_change_rate(std::span<const SVReport> a, std::span<const SVReport> b) {
  if (a.size() != b.size()) throw ConfigError("report sets differ in size");
  if (a.empty()) return 0.0;
  size_t changed = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].labels != b[i].labels) throw ConfigError("report sets use different players");
    if (rank_by_magnitude(a[i].phi) != rank_by_magnitude(b[i].phi)) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(a.size());
}

}  // namespace leafshap
