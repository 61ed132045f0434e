#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leafshap/data_frame.hpp"
#include "leafshap/estimators.hpp"
#include "leafshap/shapley.hpp"
#include "leafshap/tree_model.hpp"

namespace leafshap {

using Rng = std::mt19937_64;

// Independent stream for (master seed, tags...); identical for equal inputs.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

// --- Gaussian law ----------------------------------------------------------

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
  // Symmetric within 1e-12, eigenvalues >= -1e-10.
  void validate() const;
};

struct GaussianConditional {
  GaussianSpec spec;        // over `rest`
  std::vector<int> rest;    // complement of S, ascending
  bool pseudo_inverse = false;
};

// Law of X_rest given X_S = x_S. `x_s` is parallel to `s`.
GaussianConditional gaussian_conditional(const GaussianSpec& spec, std::span<const int> s,
                                         std::span<const double> x_s, bool allow_pseudo_inverse = false);

// Equicorrelation (1 - rho) I + rho J.
Eigen::MatrixXd equicorrelation(int p, double rho);

// --- feature laws and Monte-Carlo reduced predictors -------------------------

// Draw fills a full point; coordinates in S keep the conditioning values.
using ConditionalDraw = std::function<void(Rng&, std::span<double>)>;

class FeatureLaw {
 public:
  virtual ~FeatureLaw() = default;
  virtual int dim() const = 0;
  virtual ConditionalDraw conditional(std::span<const int> s, std::span<const double> x) const = 0;
};

class GaussianLaw final : public FeatureLaw {
 public:
  explicit GaussianLaw(GaussianSpec spec);
  int dim() const override { return spec_.dim(); }
  ConditionalDraw conditional(std::span<const int> s, std::span<const double> x) const override;
  const GaussianSpec& spec() const { return spec_; }

 private:
  GaussianSpec spec_;
};

// X | Z = z ~ N(mu_z, Sigma_z), P(Z = z) = pi_z. Points are (x_1..x_d, code of z).
class MixtureLaw final : public FeatureLaw {
 public:
  MixtureLaw(std::vector<double> weights, std::vector<GaussianSpec> components);
  int dim() const override { return components_.front().dim() + 1; }
  ConditionalDraw conditional(std::span<const int> s, std::span<const double> x) const override;

  // P(Z = z | X_S = x_S, Z in allowed); `allowed` empty means all classes.
  std::vector<double> posterior(std::span<const int> s_cont, std::span<const double> x,
                                std::span<const int> allowed = {}) const;
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<GaussianSpec>& components() const { return components_; }

 private:
  std::vector<double> weights_;
  std::vector<GaussianSpec> components_;
};

using Predictor = std::function<double(std::span<const double>)>;

struct MCValue {
  double value = 0.0;
  double std_error = 0.0;
};

MCValue mc_reduced(const Predictor& f, const FeatureLaw& law, std::span<const int> s, std::span<const double> x,
                   int n_mc, std::uint64_t seed);

// Value function v(S) = E[f(X) | X_S = x_S] by Monte Carlo, singleton players.
// v(empty) does not depend on x and uses a stream shared across instances;
// v(full) = f(x) exactly.
class MCGame final : public ValueFunction {
 public:
  MCGame(Predictor f, const FeatureLaw& law, std::vector<double> x, int n_mc, std::uint64_t seed,
         std::uint64_t instance = 0);
  int players() const override { return law_->dim(); }
  double value(PlayerMask subset) const override { return evaluate(subset).value; }
  MCValue evaluate(PlayerMask subset) const;

 private:
  Predictor f_;
  const FeatureLaw* law_;
  std::vector<double> x_;
  int n_mc_;
  std::uint64_t seed_;
  std::uint64_t instance_;
};

struct MCShapley {
  ShapleyValues sv;
  std::vector<double> std_error;  // per player, from independent per-subset streams
  std::vector<double> table;
};

MCShapley mc_shapley(const MCGame& game, const MCValue* shared_empty = nullptr);

// --- linear Gaussian model --------------------------------------------------

struct LinearGaussianModel {
  std::vector<double> beta;
  GaussianSpec law;

  double predict(std::span<const double> x) const;
  // Closed-form E[f | X_S = x_S].
  double reduced(std::span<const int> s, std::span<const double> x) const;
};

// --- categorical toy mixture -----------------------------------------------

enum class ToyRepresentation { kOriginal, kOneHot, kDummy };

// f(X, Z) = B_Z X with X | Z = z ~ N(0, Sigma_z), Z uniform over {a, b, c}.
struct ToyMixtureModel {
  std::vector<std::string> classes{"a", "b", "c"};
  std::vector<std::vector<double>> beta;  // per class
  MixtureLaw law;

  static ToyMixtureModel standard();
  double predict(std::span<const double> x_cont, int z) const;
  // Exact E[f | X_S = x_S, Z in allowed], allowed empty meaning unrestricted.
  double reduced(std::span<const int> s_cont, std::span<const double> x_cont, std::span<const int> allowed) const;
};

// Exact value function of the toy model in a given representation.
//   kOriginal: players X1, X2, X3, Z.
//   kOneHot / kDummy with `coalition`: players X1, X2, X3, {all indicators}.
//   kOneHot / kDummy without: X1, X2, X3, then one player per indicator.
// Knowing an indicator restricts Z: Z_k = 1 pins the class, Z_k = 0 excludes it.
class ToyGame final : public ValueFunction {
 public:
  ToyGame(const ToyMixtureModel& model, std::vector<double> x_cont, int z, ToyRepresentation rep, bool coalition,
          int dropped_class = 2);
  int players() const override { return players_; }
  double value(PlayerMask subset) const override;
  std::vector<std::string> labels() const;

 private:
  const ToyMixtureModel* model_;
  std::vector<double> x_;
  int z_;
  ToyRepresentation rep_;
  bool coalition_;
  std::vector<int> indicator_class_;  // class carried by each indicator
  int players_;
};

struct ToySample {
  Dataset data;  // X1, X2, X3 continuous, Z categorical
  std::vector<double> labels;
};

ToySample gen_toy_categorical(int n, std::uint64_t seed);
// Named query of the toy model: x = (0.35, -1.61, -0.11), z = a.
std::vector<double> toy_observation();

// --- piecewise model with a gate ---------------------------------------------

// f(X) = (a1 X1 + a2 X2) 1[X_gate <= 0] + (a3 X3 + a4 X4) 1[X_gate > 0],
// independent standard normal features, 0-based columns 0..3 and `gate`.
struct PiecewiseModel {
  std::vector<double> a{1, 1, 1, 1};
  int p = 5;
  int gate = 4;

  void validate() const;
  double predict(std::span<const double> x) const;
  double reduced(PlayerMask subset, std::span<const double> x) const;
};

class PiecewiseGame final : public ValueFunction {
 public:
  PiecewiseGame(PiecewiseModel model, std::vector<double> x);
  int players() const override { return model_.p; }
  double value(PlayerMask subset) const override { return model_.reduced(subset, x_); }

 private:
  PiecewiseModel model_;
  std::vector<double> x_;
};

struct OffBranchShapley {
  double k = 0.0;                // K = (1/p) P(off branch) sum_S C(p-1, |S|)^-1
  std::vector<int> players;      // 0-based columns of the inactive branch
  std::vector<double> phi;       // K a_i x_i
};

// Closed-form values of the players on the branch not selected by x_gate.
OffBranchShapley piecewise_off_branch_sv(const PiecewiseModel& model, std::span<const double> x);

// --- synthetic generators ----------------------------------------------------

struct LinearSample {
  Dataset data;
  std::vector<double> labels;
};

const std::vector<double>& experiment_beta();
LinearSample gen_experiment1(int n, int p, double rho, std::span<const double> beta, std::uint64_t seed);

// Correlated categorical columns: column j (j > 0) copies column j-1's code
// modulo its cardinality with probability `dependence`, else draws uniformly.
Dataset gen_categorical(int n, std::span<const int> cardinalities, double dependence, std::uint64_t seed);

// --- CART fitter -----------------------------------------------------------

struct CartOptions {
  int max_depth = 5;
  int min_samples_leaf = 1;
  int n_trees = 1;
  bool bootstrap = false;  // forced on when n_trees > 1
  std::uint64_t seed = 0;
};

// Variance-reduction greedy tree(s). Thresholds are midpoints of consecutive
// distinct values; ties go to the lowest feature, then the lowest threshold.
// Forests average their trees and record bootstrap multiplicities as counts.
TreeEnsemble fit_cart(const Dataset& ds, std::span<const double> labels, const CartOptions& options);

// Caterpillar tree over `depth` distinct columns out of `n_features`: one leaf
// per level plus the deepest pair, so leaf m uses min(m + 1, depth) columns.
TreeEnsemble chain_tree(int n_features, int depth, std::uint64_t seed);

// --- metrics ---------------------------------------------------------------

struct RaeResult {
  double value = 0.0;
  int excluded = 0;  // terms with |phi_true| < 1e-12
};

RaeResult r_ae(std::span<const double> phi_true, std::span<const double> phi_est);
// (|top_k(est) & top_k(true)| + |bottom_k(est) & bottom_k(true)|) / 2k.
double tpr(std::span<const double> phi_true, std::span<const double> phi_est, int k, bool by_magnitude = false);
double median(std::vector<double> v);
double spearman(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  std::string estimator;
  std::vector<double> rae;
  std::vector<double> tpr;
  std::vector<int> excluded;
  int k = 3;
  double mean_rae = 0.0;
  double median_rae = 0.0;
  double mean_tpr = 0.0;

  void finalize();
};

std::string metric_reports_to_json(std::span<const MetricReport> reports);
// Plot-ready long format: estimator,instance,r_ae,tpr.
std::string metric_reports_to_csv(std::span<const MetricReport> reports);

// --- experiment harness ------------------------------------------------------

struct ExperimentConfig {
  int n = 10000;
  int p = 5;
  double rho = 0.7;
  std::vector<double> beta = experiment_beta();
  int n_trees = 20;
  int max_depth = 10;
  int min_samples_leaf = 1;
  int n_instances = 200;
  int n_mc = 10000;
  int k = 3;
  bool tpr_by_magnitude = false;
  LeafNormalization leaf_normalization = LeafNormalization::kNone;
  std::uint64_t seed = 2021;
  int workers = 1;
};

struct OracleTruth {
  std::vector<std::vector<double>> points;
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> std_error;
};

struct ExperimentResult {
  ExperimentConfig config;
  double test_mse = 0.0;
  double label_variance = 0.0;
  OracleTruth truth;
  MetricReport shap_path;
  MetricReport leaf;
};

struct LinearFixture {
  LinearSample train;
  TreeEnsemble forest;
  GaussianLaw law;
  std::vector<std::vector<double>> test_points;
  double test_mse = 0.0;
  double label_variance = 0.0;
};

LinearFixture build_linear_fixture(const ExperimentConfig& config);
OracleTruth mc_truth(const TreeEnsemble& forest, const FeatureLaw& law, const std::vector<std::vector<double>>& points,
                     int n_mc, std::uint64_t seed, int workers = 1);
MetricReport score_estimator(const std::string& name, const OracleTruth& truth, std::span<const SVReport> reports,
                             int k, bool by_magnitude);
ExperimentResult run_linear_experiment(const ExperimentConfig& config);

// Fixture bundle: model.json, data.csv, schema.txt, truth.json.
void write_bundle(const std::string& dir, const TreeEnsemble& model, const Dataset& data, const OracleTruth* truth,
                  std::uint64_t seed, int n_mc);
std::string truth_to_json(const OracleTruth& truth, std::uint64_t seed, int n_mc);
OracleTruth truth_from_json(std::string_view text);

}  // namespace leafshap
