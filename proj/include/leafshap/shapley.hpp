#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leafshap/data_frame.hpp"
#include "leafshap/estimators.hpp"

namespace leafshap {

using PlayerMask = std::uint64_t;

// Characteristic function v(S) of a cooperative game over `players()` players.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual int players() const = 0;
  virtual double value(PlayerMask subset) const = 0;
};

constexpr int kDefaultMaxPlayers = 20;
constexpr int kHardMaxPlayers = 30;

// v(S) for all 2^P subsets, indexed by mask. Subsets are visited in Gray-code
// order so incremental games only flip one player between calls.
std::vector<double> tabulate(const ValueFunction& game, int max_players = kDefaultMaxPlayers);

double binomial(int n, int k);

// Shapley kernel 1 / (P * C(P-1, s)) for s = 0..P-1.
std::vector<double> shapley_kernel(int players);

// Coefficient of v(T) in phi_i, for every mask T. Lets callers propagate
// per-subset standard errors into the Shapley value.
std::vector<double> shapley_coefficients(int players, int player);

struct ShapleyValues {
  std::vector<double> phi;
  double base_value = 0.0;  // v(empty)
  double full_value = 0.0;  // v(all players)
};

ShapleyValues shapley_from_table(std::span<const double> table, int players);

// Coalition value for a group C of players:
//   1/(P-|C|+1) * sum_k C(P-|C|, k)^-1 * sum_{|S|=k, S disjoint from C} [v(S u C) - v(S)].
double coalition_shapley(std::span<const double> table, int players, PlayerMask coalition);

ShapleyValues brute_force_shapley(const ValueFunction& game, int max_players = kDefaultMaxPlayers);

// Multi-games reweighting for a leaf game with `leaf_players` players inside a
// game of `players` players, for marginal subsets of size `subset_size`:
//   C(P-1, s)^-1 + sum_{k=1}^{P-d} C(P-d, k) C(P-1, k+s)^-1.
double multi_games_weight(int players, int subset_size, int leaf_players);

// --- games backed by the estimators ---------------------------------------

// Player subsets expand to column sets through the partition; unassigned
// columns are never conditioned on.
class EstimatorGame final : public ValueFunction {
 public:
  EstimatorGame(const ReducedPredictor& predictor, const PlayerPartition& partition, std::span<const double> x,
                EstimatorKind kind, LeafNormalization norm = LeafNormalization::kNone);
  int players() const override { return static_cast<int>(partition_->size()); }
  // Not thread-safe: keeps the last column mask to update it incrementally.
  double value(PlayerMask subset) const override;
  std::vector<int> columns_of(PlayerMask subset) const;

 private:
  const ReducedPredictor* predictor_;
  const PlayerPartition* partition_;
  std::vector<double> x_;
  EstimatorKind kind_;
  LeafNormalization norm_;
  mutable std::vector<char> in_s_;
  mutable PlayerMask current_ = 0;
};

// Discrete estimator for every subset at once: per-row player match masks,
// then superset sums of (matches, sum of predictions).
class DiscreteGame final : public ValueFunction {
 public:
  DiscreteGame(const ReducedPredictor& predictor, const PlayerPartition& partition, std::span<const double> x,
               int max_players = kDefaultMaxPlayers);
  int players() const override { return players_; }
  double value(PlayerMask subset) const override;

 private:
  int players_;
  std::vector<double> x_;
  std::vector<std::int64_t> matches_;
  std::vector<double> sums_;
};

// --- reports ---------------------------------------------------------------

enum class Algorithm { kBruteForce, kMultiGames };
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct SubsetValue {
  std::vector<int> columns;
  double value = 0.0;
};

struct SVReport {
  std::string instance;
  EstimatorKind estimator = EstimatorKind::kLeaf;
  Algorithm algorithm = Algorithm::kBruteForce;
  LeafNormalization leaf_normalization = LeafNormalization::kNone;
  std::vector<std::string> labels;
  std::vector<double> phi;
  double base_value = 0.0;
  double prediction = 0.0;
  double efficiency_residual = 0.0;
  std::vector<SubsetValue> diagnostics;  // reduced value per subset, when requested
};

std::string report_to_json(const SVReport& r);
std::string reports_to_json(std::span<const SVReport> reports);
std::string reports_to_csv(std::span<const SVReport> reports);
std::vector<SVReport> reports_from_json(std::string_view text);

struct ExplainOptions {
  EstimatorKind estimator = EstimatorKind::kLeaf;
  Algorithm algorithm = Algorithm::kBruteForce;
  LeafNormalization leaf_normalization = LeafNormalization::kNone;
  int max_players = kDefaultMaxPlayers;
  bool diagnostics = false;
};

struct MultiGamesStats {
  std::int64_t leaf_games = 0;
  std::int64_t value_evaluations = 0;  // one per (leaf, subset of its players)
};

ShapleyValues multi_games_sv(const ReducedPredictor& predictor, const PlayerPartition& partition,
                             std::span<const double> x, MultiGamesStats* stats = nullptr);

SVReport explain_instance(const ReducedPredictor& predictor, const PlayerPartition& partition,
                          std::span<const double> x, const ExplainOptions& options, std::string instance_id = "0");

// Validates that every encoded group sits inside a single player, then explains.
SVReport coalition_sv_categorical(const ReducedPredictor& predictor, const PlayerPartition& partition,
                                  std::span<const EncodedGroup> groups, std::span<const double> x,
                                  const ExplainOptions& options, std::string instance_id = "0");

// Adds up the phi of players listed in each group (sum-of-dummies attribution).
SVReport sum_players(const SVReport& report, const std::vector<std::vector<int>>& groups,
                     const std::vector<std::string>& labels);

// Instance-parallel batch; results are independent of `workers`.
std::vector<SVReport> explain_batch(const ReducedPredictor& predictor, const PlayerPartition& partition,
                                    const std::vector<std::vector<double>>& points,
                                    const std::vector<std::string>& ids, const ExplainOptions& options,
                                    int workers = 1);

// --- global importance -----------------------------------------------------

struct GlobalImportance {
  std::vector<std::string> labels;
  std::vector<double> importance;  // I_j = sum over instances of |phi_j|
  std::vector<int> ranking;        // player indices, most important first
};

GlobalImportance global_importance(std::span<const SVReport> reports);

// Player indices sorted by decreasing |phi|; ties keep index order.
std::vector<int> rank_by_magnitude(std::span<const double> phi);

// Fraction of instances whose per-instance player ranking differs between two
// report sets over the same labels.
double ranking_change_rate(std::span<const SVReport> a, std::span<const SVReport> b);

}  // namespace leafshap
