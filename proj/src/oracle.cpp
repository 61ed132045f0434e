#include "leafshap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "leafshap/error.hpp"

namespace leafshap {

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------

void GaussianSpec::validate() const {
  const auto p = mean.size();
  if (cov.rows() != p || cov.cols() != p) throw ValidationError("covariance shape does not match the mean");
  if (!mean.allFinite() || !cov.allFinite()) throw ValidationError("Gaussian parameters must be finite");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ValidationError("covariance is not symmetric");
  if (p == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) throw ValidationError("covariance is not positive semi-definite");
}

Eigen::MatrixXd equicorrelation(int p, double rho) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(p, p, rho);
  s.diagonal().setOnes();
  return s;
}

namespace {

Eigen::MatrixXd sub(const Eigen::MatrixXd& m, std::span<const int> r, std::span<const int> c) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (size_t i = 0; i < r.size(); ++i) {
    for (size_t j = 0; j < c.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(r[i], c[j]);
  }
  return out;
}

Eigen::VectorXd sub(const Eigen::VectorXd& v, std::span<const int> r) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(r.size()));
  for (size_t i = 0; i < r.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(r[i]);
  return out;
}

std::vector<int> complement(std::span<const int> s, int p) {
  std::vector<char> in(static_cast<size_t>(p), 0);
  for (int c : s) {
    if (c < 0 || c >= p) throw ConfigError("conditioning index " + std::to_string(c) + " out of range");
    if (in[static_cast<size_t>(c)]) throw ConfigError("duplicate conditioning index " + std::to_string(c));
    in[static_cast<size_t>(c)] = 1;
  }
  std::vector<int> rest;
  for (int c = 0; c < p; ++c) {
    if (!in[static_cast<size_t>(c)]) rest.push_back(c);
  }
  return rest;
}

// Square root factor of a PSD matrix that tolerates singular covariances.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() == 0) return cov;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

double log_density(const GaussianSpec& g, std::span<const int> s, std::span<const double> x) {
  if (s.empty()) return 0.0;
  const Eigen::MatrixXd cov = sub(g.cov, s, s);
  Eigen::VectorXd d(static_cast<Eigen::Index>(s.size()));
  for (size_t i = 0; i < s.size(); ++i) d(static_cast<Eigen::Index>(i)) = x[static_cast<size_t>(s[i])] - g.mean(s[i]);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DegenerateQueryError("singular covariance in mixture posterior");
  const Eigen::VectorXd z = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (z.squaredNorm() + logdet + static_cast<double>(s.size()) * std::log(2.0 * M_PI));
}

}  // namespace

GaussianConditional gaussian_conditional(const GaussianSpec& spec, std::span<const int> s,
                                         std::span<const double> x_s, bool allow_pseudo_inverse) {
  spec.validate();
  if (x_s.size() != s.size()) throw ConfigError("conditioning values do not match the conditioning set");
  GaussianConditional out;
  out.rest = complement(s, spec.dim());
  if (s.empty()) {
    out.spec = spec;
    return out;
  }
  const Eigen::MatrixXd sss = sub(spec.cov, s, s);
  const Eigen::MatrixXd srs = sub(spec.cov, out.rest, s);
  const Eigen::MatrixXd srr = sub(spec.cov, out.rest, out.rest);
  Eigen::VectorXd d(static_cast<Eigen::Index>(s.size()));
  for (size_t i = 0; i < s.size(); ++i) d(static_cast<Eigen::Index>(i)) = x_s[i] - spec.mean(s[i]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sss);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::MatrixXd inv;
  if (ev.minCoeff() <= tol) {
    if (!allow_pseudo_inverse) {
      throw DegenerateQueryError("Sigma_SS is singular; enable the pseudo-inverse to condition anyway");
    }
    Eigen::VectorXd inv_ev = ev;
    for (Eigen::Index i = 0; i < ev.size(); ++i) inv_ev(i) = ev(i) > tol ? 1.0 / ev(i) : 0.0;
    inv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    out.pseudo_inverse = true;
  } else {
    inv = sss.ldlt().solve(Eigen::MatrixXd::Identity(sss.rows(), sss.cols()));
  }
  out.spec.mean = sub(spec.mean, out.rest) + srs * (inv * d);
  Eigen::MatrixXd cov = srr - srs * inv * srs.transpose();
  out.spec.cov = 0.5 * (cov + cov.transpose());
  return out;
}

// ---------------------------------------------------------------------------

GaussianLaw::GaussianLaw(GaussianSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

ConditionalDraw GaussianLaw::conditional(std::span<const int> s, std::span<const double> x) const {
  if (static_cast<int>(x.size()) < dim()) throw ConfigError("point shorter than the law dimension");
  std::vector<double> xs;
  for (int c : s) xs.push_back(x[static_cast<size_t>(c)]);
  auto cond = gaussian_conditional(spec_, s, xs, true);
  Eigen::MatrixXd l = psd_factor(cond.spec.cov);
  std::vector<double> fixed(x.begin(), x.begin() + dim());
  return [mean = cond.spec.mean, l = std::move(l), rest = cond.rest, fixed = std::move(fixed)](
             Rng& rng, std::span<double> point) {
    std::normal_distribution<double> nd;
    std::copy(fixed.begin(), fixed.end(), point.begin());
    Eigen::VectorXd z(static_cast<Eigen::Index>(rest.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd(rng);
    const Eigen::VectorXd y = mean + l * z;
    for (size_t i = 0; i < rest.size(); ++i) point[static_cast<size_t>(rest[i])] = y(static_cast<Eigen::Index>(i));
  };
}

MixtureLaw::MixtureLaw(std::vector<double> weights, std::vector<GaussianSpec> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty() || weights_.size() != components_.size()) {
    throw ValidationError("mixture needs one weight per component");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ValidationError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
  for (const auto& c : components_) {
    c.validate();
    if (c.dim() != components_.front().dim()) throw ValidationError("mixture components differ in dimension");
  }
}

std::vector<double> MixtureLaw::posterior(std::span<const int> s_cont, std::span<const double> x,
                                          std::span<const int> allowed) const {
  const size_t k = components_.size();
  std::vector<double> logp(k, -std::numeric_limits<double>::infinity());
  for (size_t z = 0; z < k; ++z) {
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), static_cast<int>(z)) == allowed.end()) continue;
    if (weights_[z] == 0.0) continue;
    logp[z] = std::log(weights_[z]) + log_density(components_[z], s_cont, x);
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  if (!std::isfinite(mx)) throw DegenerateQueryError("mixture posterior has no admissible class");
  std::vector<double> post(k, 0.0);
  double total = 0.0;
  for (size_t z = 0; z < k; ++z) {
    if (std::isfinite(logp[z])) post[z] = std::exp(logp[z] - mx);
    total += post[z];
  }
  for (double& v : post) v /= total;
  return post;
}

ConditionalDraw MixtureLaw::conditional(std::span<const int> s, std::span<const double> x) const {
  const int d = components_.front().dim();
  if (static_cast<int>(x.size()) < d + 1) throw ConfigError("mixture point needs the class code as last column");
  std::vector<int> s_cont;
  bool z_known = false;
  for (int c : s) {
    if (c == d) {
      z_known = true;
    } else {
      s_cont.push_back(c);
    }
  }
  std::vector<int> allowed;
  if (z_known) allowed.push_back(static_cast<int>(x[static_cast<size_t>(d)]));
  const auto post = posterior(s_cont, x, allowed);
  std::vector<ConditionalDraw> parts;
  for (size_t z = 0; z < components_.size(); ++z) {
    parts.push_back(post[z] > 0.0 ? GaussianLaw(components_[z]).conditional(s_cont, x.first(static_cast<size_t>(d)))
                                  : ConditionalDraw{});
  }
  return [post, parts = std::move(parts), d](Rng& rng, std::span<double> point) {
    std::discrete_distribution<int> pick(post.begin(), post.end());
    const int z = pick(rng);
    parts[static_cast<size_t>(z)](rng, point.first(static_cast<size_t>(d)));
    point[static_cast<size_t>(d)] = z;
  };
}

MCValue mc_reduced(const Predictor& f, const FeatureLaw& law, std::span<const int> s, std::span<const double> x,
                   int n_mc, std::uint64_t seed) {
  if (static_cast<int>(x.size()) != law.dim()) throw ConfigError("point dimension differs from the feature law");
  if (static_cast<int>(s.size()) == law.dim()) return {f(x), 0.0};
  if (n_mc < 2) throw ConfigError("n_mc must be at least 2");
  const auto draw = law.conditional(s, x);
  Rng rng(seed);
  std::vector<double> point(x.size());
  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  for (int j = 0; j < n_mc; ++j) {
    draw(rng, point);
    const double y = f(point);
    const double delta = y - mean;
    mean += delta / (j + 1);
    m2 += delta * (y - mean);
  }
  const double var = m2 / (n_mc - 1);
  return {mean, std::sqrt(var / n_mc)};
}

MCGame::MCGame(Predictor f, const FeatureLaw& law, std::vector<double> x, int n_mc, std::uint64_t seed,
               std::uint64_t instance)
    : f_(std::move(f)), law_(&law), x_(std::move(x)), n_mc_(n_mc), seed_(seed), instance_(instance) {
  if (static_cast<int>(x_.size()) != law.dim()) throw ConfigError("point dimension differs from the feature law");
  if (law.dim() > kHardMaxPlayers) throw ConfigError("too many players for subset enumeration");
}

MCValue MCGame::evaluate(PlayerMask subset) const {
  std::vector<int> s;
  for (int c = 0; c < law_->dim(); ++c) {
    if (subset & (PlayerMask{1} << c)) s.push_back(c);
  }
  const std::uint64_t stream = subset == 0 ? derive_seed(seed_, {0, 0}) : derive_seed(seed_, {instance_ + 1, subset});
  return mc_reduced(f_, *law_, s, x_, n_mc_, stream);
}

MCShapley mc_shapley(const MCGame& game, const MCValue* shared_empty) {
  const int p = game.players();
  const size_t total = size_t{1} << p;
  MCShapley out;
  out.table.resize(total);
  std::vector<double> se(total);
  for (PlayerMask s = 0; s < total; ++s) {
    const MCValue v = (s == 0 && shared_empty) ? *shared_empty : game.evaluate(s);
    out.table[s] = v.value;
    se[s] = v.std_error;
  }
  out.sv = shapley_from_table(out.table, p);
  for (int i = 0; i < p; ++i) {
    const auto c = shapley_coefficients(p, i);
    double var = 0.0;
    for (size_t s = 0; s < total; ++s) var += c[s] * c[s] * se[s] * se[s];
    out.std_error.push_back(std::sqrt(var));
  }
  return out;
}

// ---------------------------------------------------------------------------

double LinearGaussianModel::predict(std::span<const double> x) const {
  double y = 0.0;
  for (size_t i = 0; i < beta.size(); ++i) y += beta[i] * x[i];
  return y;
}

double LinearGaussianModel::reduced(std::span<const int> s, std::span<const double> x) const {
  std::vector<double> xs;
  for (int c : s) xs.push_back(x[static_cast<size_t>(c)]);
  const auto cond = gaussian_conditional(law, s, xs);
  double y = 0.0;
  for (int c : s) y += beta[static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
  for (size_t i = 0; i < cond.rest.size(); ++i) {
    y += beta[static_cast<size_t>(cond.rest[i])] * cond.spec.mean(static_cast<Eigen::Index>(i));
  }
  return y;
}

// ---------------------------------------------------------------------------

ToyMixtureModel ToyMixtureModel::standard() {
  auto mat = [](std::initializer_list<double> v) {
    Eigen::MatrixXd m(3, 3);
    auto it = v.begin();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m(i, j) = *it++;
    }
    return m;
  };
  // Entries as published carry a rounding asymmetry in the last digit; the
  // upper triangle is mirrored.
  auto sym = [](Eigen::MatrixXd m) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
    }
    return m;
  };
  const Eigen::MatrixXd sa = sym(mat({0.41871254, -0.790061361, 0.46956991, -0.79006136, 1.90865098, -0.82571655,
                                      0.46956991, -0.82571655, 0.95835472}));
  const Eigen::MatrixXd sb = sym(mat({0.55326081, 0.11811951, -0.70677924, 0.11811951, 2.73312979, -2.94400196,
                                      -0.70677924, -2.94400196, 4.22105088}));
  const Eigen::MatrixXd sc = sym(mat({9.2859966, 1.12872646, 2.4224434, 1.12872646, 0.92891237, -0.14373393,
                                      2.4224434, -0.14373393, 1.81601676}));
  std::vector<GaussianSpec> comps;
  for (const auto& s : {sa, sb, sc}) comps.push_back({Eigen::VectorXd::Zero(3), s});
  return ToyMixtureModel{{"a", "b", "c"},
                         {{1, 3, 5}, {-5, -10, -8}, {6, 1, 0}},
                         MixtureLaw({1.0 / 3, 1.0 / 3, 1.0 / 3}, std::move(comps))};
}

double ToyMixtureModel::predict(std::span<const double> x_cont, int z) const {
  const auto& b = beta.at(static_cast<size_t>(z));
  double y = 0.0;
  for (size_t i = 0; i < b.size(); ++i) y += b[i] * x_cont[i];
  return y;
}

double ToyMixtureModel::reduced(std::span<const int> s_cont, std::span<const double> x_cont,
                                std::span<const int> allowed) const {
  const auto post = law.posterior(s_cont, x_cont, allowed);
  std::vector<double> xs;
  for (int c : s_cont) xs.push_back(x_cont[static_cast<size_t>(c)]);
  double y = 0.0;
  for (size_t z = 0; z < post.size(); ++z) {
    if (post[z] == 0.0) continue;
    const auto cond = gaussian_conditional(law.components()[z], s_cont, xs);
    const auto& b = beta[z];
    double e = 0.0;
    for (int c : s_cont) e += b[static_cast<size_t>(c)] * x_cont[static_cast<size_t>(c)];
    for (size_t i = 0; i < cond.rest.size(); ++i) {
      e += b[static_cast<size_t>(cond.rest[i])] * cond.spec.mean(static_cast<Eigen::Index>(i));
    }
    y += post[z] * e;
  }
  return y;
}

ToyGame::ToyGame(const ToyMixtureModel& model, std::vector<double> x_cont, int z, ToyRepresentation rep,
                 bool coalition, int dropped_class)
    : model_(&model), x_(std::move(x_cont)), z_(z), rep_(rep), coalition_(coalition) {
  const int k = static_cast<int>(model.classes.size());
  if (z < 0 || z >= k) throw ConfigError("class code out of range");
  if (x_.size() != 3) throw ConfigError("toy model takes three continuous coordinates");
  if (rep == ToyRepresentation::kOneHot) {
    for (int c = 0; c < k; ++c) indicator_class_.push_back(c);
  } else if (rep == ToyRepresentation::kDummy) {
    if (dropped_class < 0 || dropped_class >= k) throw ConfigError("dropped class out of range");
    for (int c = 0; c < k; ++c) {
      if (c != dropped_class) indicator_class_.push_back(c);
    }
  }
  players_ = (rep == ToyRepresentation::kOriginal || coalition) ? 4 : 3 + static_cast<int>(indicator_class_.size());
}

std::vector<std::string> ToyGame::labels() const {
  std::vector<std::string> out{"X1", "X2", "X3"};
  if (players_ == 4) {
    out.push_back("Z");
  } else {
    for (int c : indicator_class_) out.push_back("Z=" + model_->classes[static_cast<size_t>(c)]);
  }
  return out;
}

double ToyGame::value(PlayerMask subset) const {
  std::vector<int> s;
  for (int c = 0; c < 3; ++c) {
    if (subset & (PlayerMask{1} << c)) s.push_back(c);
  }
  const int k = static_cast<int>(model_->classes.size());
  std::vector<char> ok(static_cast<size_t>(k), 1);
  if (players_ == 4) {
    if (subset & (PlayerMask{1} << 3)) {
      std::fill(ok.begin(), ok.end(), 0);
      ok[static_cast<size_t>(z_)] = 1;
    }
  } else {
    for (size_t j = 0; j < indicator_class_.size(); ++j) {
      if (!(subset & (PlayerMask{1} << (3 + j)))) continue;
      const int c = indicator_class_[j];
      if (c == z_) {
        for (int o = 0; o < k; ++o) ok[static_cast<size_t>(o)] = ok[static_cast<size_t>(o)] && o == c;
      } else {
        ok[static_cast<size_t>(c)] = 0;
      }
    }
  }
  std::vector<int> allowed;
  for (int c = 0; c < k; ++c) {
    if (ok[static_cast<size_t>(c)]) allowed.push_back(c);
  }
  return model_->reduced(s, x_, allowed);
}

ToySample gen_toy_categorical(int n, std::uint64_t seed) {
  if (n < 0) throw ConfigError("negative sample size");
  const auto model = ToyMixtureModel::standard();
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  std::normal_distribution<double> nd;
  std::vector<Eigen::MatrixXd> chol;
  for (const auto& c : model.law.components()) chol.push_back(psd_factor(c.cov));
  std::vector<std::vector<double>> cols(4, std::vector<double>(static_cast<size_t>(n)));
  ToySample out;
  out.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int z = pick(rng);
    Eigen::Vector3d e(nd(rng), nd(rng), nd(rng));
    const Eigen::VectorXd x = chol[static_cast<size_t>(z)] * e;
    for (int c = 0; c < 3; ++c) cols[static_cast<size_t>(c)][static_cast<size_t>(i)] = x(c);
    cols[3][static_cast<size_t>(i)] = z;
    out.labels[static_cast<size_t>(i)] = model.predict(std::vector<double>{x(0), x(1), x(2)}, z);
  }
  std::vector<FeatureMeta> meta{{"X1"}, {"X2"}, {"X3"}, {"Z", FeatureKind::kCategorical, {"a", "b", "c"}}};
  out.data = Dataset(std::move(cols), std::move(meta));
  return out;
}

std::vector<double> toy_observation() { return {0.35, -1.61, -0.11, 0.0}; }

// ---------------------------------------------------------------------------

void PiecewiseModel::validate() const {
  if (a.size() != 4) throw ConfigError("piecewise model needs four coefficients");
  if (p < 5) throw ConfigError("piecewise model needs p >= 5");
  if (gate < 4 || gate >= p) throw ConfigError("gate feature must be outside columns 0..3 and below p");
}

double PiecewiseModel::predict(std::span<const double> x) const {
  const auto g = static_cast<size_t>(gate);
  return x[g] <= 0 ? a[0] * x[0] + a[1] * x[1] : a[2] * x[2] + a[3] * x[3];
}

double PiecewiseModel::reduced(PlayerMask subset, std::span<const double> x) const {
  auto in = [&](int c) { return (subset >> c) & 1; };
  const double low = (in(0) ? a[0] * x[0] : 0.0) + (in(1) ? a[1] * x[1] : 0.0);
  const double high = (in(2) ? a[2] * x[2] : 0.0) + (in(3) ? a[3] * x[3] : 0.0);
  if (in(gate)) return x[static_cast<size_t>(gate)] <= 0 ? low : high;
  return 0.5 * low + 0.5 * high;
}

PiecewiseGame::PiecewiseGame(PiecewiseModel model, std::vector<double> x) : model_(std::move(model)), x_(std::move(x)) {
  model_.validate();
  if (static_cast<int>(x_.size()) != model_.p) throw ConfigError("point dimension differs from p");
}

OffBranchShapley piecewise_off_branch_sv(const PiecewiseModel& model, std::span<const double> x) {
  model.validate();
  if (static_cast<int>(x.size()) != model.p) throw ConfigError("point dimension differs from p");
  OffBranchShapley out;
  // x_gate > 0 selects the high branch, so the low pair becomes the inactive one.
  out.players = x[static_cast<size_t>(model.gate)] <= 0 ? std::vector<int>{2, 3} : std::vector<int>{0, 1};
  const int p = model.p;
  double sum = 0.0;
  for (int k = 0; k <= p - 2; ++k) sum += binomial(p - 2, k) / binomial(p - 1, k);
  out.k = sum * 0.5 / p;
  for (int i : out.players) out.phi.push_back(out.k * model.a[static_cast<size_t>(i)] * x[static_cast<size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<double>& experiment_beta() {
  static const std::vector<double> b{6.49, -2.44, -2.11, -4.29, 3.46};
  return b;
}

LinearSample gen_experiment1(int n, int p, double rho, std::span<const double> beta, std::uint64_t seed) {
  if (n < 0 || p <= 0) throw ConfigError("invalid sample shape");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  if (static_cast<int>(beta.size()) != p) throw ConfigError("coefficient vector length differs from p");
  Eigen::LLT<Eigen::MatrixXd> llt(equicorrelation(p, rho));
  if (llt.info() != Eigen::Success) throw ValidationError("equicorrelation matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> cols(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(n)));
  LinearSample out;
  out.labels.resize(static_cast<size_t>(n));
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = nd(rng);
    const Eigen::VectorXd x = l * z;
    double y = 0.0;
    for (int j = 0; j < p; ++j) {
      cols[static_cast<size_t>(j)][static_cast<size_t>(i)] = x(j);
      y += beta[static_cast<size_t>(j)] * x(j);
    }
    out.labels[static_cast<size_t>(i)] = y;
  }
  std::vector<FeatureMeta> meta;
  for (int j = 0; j < p; ++j) meta.push_back({"X" + std::to_string(j + 1)});
  out.data = Dataset(std::move(cols), std::move(meta));
  return out;
}

Dataset gen_categorical(int n, std::span<const int> cardinalities, double dependence, std::uint64_t seed) {
  if (n < 0 || cardinalities.empty()) throw ConfigError("invalid categorical sample shape");
  Rng rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<std::vector<double>> cols(cardinalities.size(), std::vector<double>(static_cast<size_t>(n)));
  std::vector<FeatureMeta> meta;
  for (size_t j = 0; j < cardinalities.size(); ++j) {
    const int k = cardinalities[j];
    if (k < 1) throw ConfigError("cardinality must be positive");
    FeatureMeta m{"Z" + std::to_string(j + 1), FeatureKind::kCategorical};
    for (int c = 0; c < k; ++c) m.categories.push_back("c" + std::to_string(c));
    meta.push_back(std::move(m));
  }
  for (int i = 0; i < n; ++i) {
    for (size_t j = 0; j < cardinalities.size(); ++j) {
      const int k = cardinalities[j];
      int code = std::uniform_int_distribution<int>(0, k - 1)(rng);
      if (j > 0 && u(rng) < dependence) code = static_cast<int>(cols[j - 1][static_cast<size_t>(i)]) % k;
      cols[j][static_cast<size_t>(i)] = code;
    }
  }
  return Dataset(std::move(cols), std::move(meta));
}

// ---------------------------------------------------------------------------

namespace {

class CartBuilder {
 public:
  CartBuilder(const Dataset& ds, std::span<const double> y, const CartOptions& opt) : ds_(ds), y_(y), opt_(opt) {}

  std::vector<TreeNode> build(std::vector<int> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<int>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int r : rows) {
      const double v = y_[static_cast<size_t>(r)];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const auto n = static_cast<std::int64_t>(rows.size());
    TreeNode node;
    node.id = id;
    node.count = n;
    node.value = n > 0 ? sum / static_cast<double>(n) : 0.0;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = n > 0 ? sum * sum / static_cast<double>(n) : 0.0;
    const double base = best_score;
    const bool can_split = depth < opt_.max_depth && n >= 2 * static_cast<std::int64_t>(opt_.min_samples_leaf) &&
                           hi > lo;
    if (can_split) {
      std::vector<int> order(rows);
      for (size_t f = 0; f < ds_.cols(); ++f) {
        const auto col = ds_.column(f);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          const double va = col[static_cast<size_t>(a)];
          const double vb = col[static_cast<size_t>(b)];
          return va < vb || (va == vb && a < b);
        });
        double left = 0.0;
        for (std::int64_t i = 0; i + 1 < n; ++i) {
          left += y_[static_cast<size_t>(order[static_cast<size_t>(i)])];
          const double a = col[static_cast<size_t>(order[static_cast<size_t>(i)])];
          const double b = col[static_cast<size_t>(order[static_cast<size_t>(i + 1)])];
          if (a == b) continue;
          const std::int64_t nl = i + 1;
          const std::int64_t nr = n - nl;
          if (nl < opt_.min_samples_leaf || nr < opt_.min_samples_leaf) continue;
          const double right = sum - left;
          const double score = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
          if (score > best_score) {
            best_score = score;
            best_feature = static_cast<int>(f);
            double mid = a + (b - a) / 2.0;
            if (!(mid < b)) mid = a;
            best_threshold = mid;
          }
        }
      }
    }
    if (best_feature < 0 || best_score - base <= 1e-12 * std::max(1.0, std::abs(base))) {
      nodes_[static_cast<size_t>(id)] = node;
      return id;
    }
    std::vector<int> lrows;
    std::vector<int> rrows;
    const auto col = ds_.column(static_cast<size_t>(best_feature));
    for (int r : rows) (col[static_cast<size_t>(r)] <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = grow(lrows, depth + 1);
    node.right = grow(rrows, depth + 1);
    nodes_[static_cast<size_t>(id)] = node;
    return id;
  }

  const Dataset& ds_;
  std::span<const double> y_;
  const CartOptions& opt_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

TreeEnsemble fit_cart(const Dataset& ds, std::span<const double> labels, const CartOptions& options) {
  if (labels.size() != ds.rows()) throw ConfigError("label count differs from dataset rows");
  if (options.max_depth < 0 || options.min_samples_leaf < 1 || options.n_trees < 1) {
    throw ConfigError("invalid CART options");
  }
  if (ds.rows() < 2 * static_cast<size_t>(options.min_samples_leaf)) {
    throw ConfigError("dataset too small for min_samples_leaf");
  }
  for (double v : labels) {
    if (!std::isfinite(v)) throw ValidationError("labels must be finite");
  }
  const bool bootstrap = options.bootstrap || options.n_trees > 1;
  const int n = static_cast<int>(ds.rows());
  std::vector<Tree> trees;
  CartBuilder builder(ds, labels, options);
  for (int t = 0; t < options.n_trees; ++t) {
    std::vector<int> rows(static_cast<size_t>(n));
    if (bootstrap) {
      Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(t)}));
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees.emplace_back(builder.build(std::move(rows)), static_cast<int>(ds.cols()));
  }
  std::vector<std::string> names;
  for (const auto& m : ds.meta()) names.push_back(m.name);
  return TreeEnsemble(std::move(trees), static_cast<int>(ds.cols()),
                      options.n_trees > 1 ? Aggregation::kAverage : Aggregation::kSum, std::move(names));
}

TreeEnsemble chain_tree(int n_features, int depth, std::uint64_t seed) {
  if (depth < 1 || depth > n_features) throw ConfigError("chain depth must lie in 1..n_features");
  Rng rng(seed);
  std::vector<int> cols(static_cast<size_t>(n_features));
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);
  std::normal_distribution<double> thr(0.0, 0.5);
  std::uniform_real_distribution<double> val(1.0, 5.0);
  std::bernoulli_distribution sign;
  auto leaf_value = [&] { return sign(rng) ? val(rng) : -val(rng); };
  std::vector<TreeNode> nodes;
  for (int level = 0; level < depth; ++level) {
    TreeNode split;
    split.id = static_cast<int>(nodes.size());
    split.feature = cols[static_cast<size_t>(level)];
    split.threshold = thr(rng);
    split.left = split.id + 1;
    split.right = split.id + 2;
    nodes.push_back(split);
    TreeNode leaf;
    leaf.id = split.id + 1;
    leaf.value = leaf_value();
    nodes.push_back(leaf);
  }
  TreeNode last;
  last.id = static_cast<int>(nodes.size());
  last.value = leaf_value();
  nodes.push_back(last);
  std::vector<Tree> trees;
  trees.emplace_back(std::move(nodes), n_features);
  return TreeEnsemble(std::move(trees), n_features);
}

// ---------------------------------------------------------------------------

RaeResult r_ae(std::span<const double> phi_true, std::span<const double> phi_est) {
  if (phi_true.size() != phi_est.size()) throw ConfigError("R-AE needs vectors of equal length");
  RaeResult out;
  for (size_t i = 0; i < phi_true.size(); ++i) {
    if (std::abs(phi_true[i]) < 1e-12) {
      ++out.excluded;
      continue;
    }
    out.value += std::abs(phi_true[i] - phi_est[i]) / std::abs(phi_true[i]);
  }
  return out;
}

namespace {

std::vector<int> order_desc(std::span<const double> v, bool by_magnitude) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](int i) { return by_magnitude ? std::abs(v[static_cast<size_t>(i)]) : v[static_cast<size_t>(i)]; };
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) > key(b); });
  return idx;
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[static_cast<size_t>(a)] < v[static_cast<size_t>(b)]; });
  std::vector<double> r(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && v[static_cast<size_t>(idx[j + 1])] == v[static_cast<size_t>(idx[i])]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) r[static_cast<size_t>(idx[k])] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double tpr(std::span<const double> phi_true, std::span<const double> phi_est, int k, bool by_magnitude) {
  if (phi_true.size() != phi_est.size()) throw ConfigError("TPR needs vectors of equal length");
  if (k < 1 || k > static_cast<int>(phi_true.size())) throw ConfigError("TPR k must lie in 1..p");
  const auto t = order_desc(phi_true, by_magnitude);
  const auto e = order_desc(phi_est, by_magnitude);
  auto overlap = [&](bool top) {
    int hits = 0;
    const size_t p = t.size();
    for (int i = 0; i < k; ++i) {
      const int a = top ? e[static_cast<size_t>(i)] : e[p - 1 - static_cast<size_t>(i)];
      for (int j = 0; j < k; ++j) {
        const int b = top ? t[static_cast<size_t>(j)] : t[p - 1 - static_cast<size_t>(j)];
        if (a == b) ++hits;
      }
    }
    return hits;
  };
  return static_cast<double>(overlap(true) + overlap(false)) / (2.0 * k);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("Spearman needs two equal-length series");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void MetricReport::finalize() {
  const double n = static_cast<double>(rae.size());
  mean_rae = rae.empty() ? 0.0 : std::accumulate(rae.begin(), rae.end(), 0.0) / n;
  median_rae = rae.empty() ? 0.0 : median(rae);
  mean_tpr = tpr.empty() ? 0.0 : std::accumulate(tpr.begin(), tpr.end(), 0.0) / static_cast<double>(tpr.size());
}

std::string metric_reports_to_json(std::span<const MetricReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    arr.push_back({{"estimator", r.estimator},
                   {"k", r.k},
                   {"n", r.rae.size()},
                   {"mean_rae", r.mean_rae},
                   {"median_rae", r.median_rae},
                   {"mean_tpr", r.mean_tpr},
                   {"r_ae", r.rae},
                   {"tpr", r.tpr},
                   {"excluded_terms", r.excluded}});
  }
  return arr.dump(1) + "\n";
}

std::string metric_reports_to_csv(std::span<const MetricReport> reports) {
  std::string out = "estimator,instance,r_ae,tpr\n";
  char buf[96];
  for (const auto& r : reports) {
    for (size_t i = 0; i < r.rae.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g\n", i, r.rae[i], i < r.tpr.size() ? r.tpr[i] : 0.0);
      out += r.estimator + buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<size_t>(n, 1))));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = static_cast<size_t>(w); i < n; i += static_cast<size_t>(workers)) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

LinearFixture build_linear_fixture(const ExperimentConfig& c) {
  auto train = gen_experiment1(c.n, c.p, c.rho, c.beta, derive_seed(c.seed, {1}));
  CartOptions opt;
  opt.max_depth = c.max_depth;
  opt.min_samples_leaf = c.min_samples_leaf;
  opt.n_trees = c.n_trees;
  opt.bootstrap = c.n_trees > 1;
  opt.seed = derive_seed(c.seed, {2});
  auto forest = fit_cart(train.data, train.labels, opt);
  auto test = gen_experiment1(c.n_instances, c.p, c.rho, c.beta, derive_seed(c.seed, {3}));
  std::vector<std::vector<double>> points;
  for (size_t i = 0; i < test.data.rows(); ++i) points.push_back(test.data.row(i));

  const auto holdout = gen_experiment1(2000, c.p, c.rho, c.beta, derive_seed(c.seed, {4}));
  double mse = 0.0;
  const double mean_y = std::accumulate(holdout.labels.begin(), holdout.labels.end(), 0.0) / 2000.0;
  double var = 0.0;
  for (size_t i = 0; i < holdout.data.rows(); ++i) {
    const double e = forest.predict(holdout.data.row(i)) - holdout.labels[i];
    mse += e * e;
    var += (holdout.labels[i] - mean_y) * (holdout.labels[i] - mean_y);
  }
  GaussianLaw law(GaussianSpec{Eigen::VectorXd::Zero(c.p), equicorrelation(c.p, c.rho)});
  return LinearFixture{std::move(train), std::move(forest), std::move(law), std::move(points), mse / 2000.0,
                       var / 2000.0};
}

OracleTruth mc_truth(const TreeEnsemble& forest, const FeatureLaw& law, const std::vector<std::vector<double>>& points,
                     int n_mc, std::uint64_t seed, int workers) {
  OracleTruth truth;
  truth.points = points;
  truth.phi.resize(points.size());
  truth.std_error.resize(points.size());
  if (points.empty()) return truth;
  const Predictor f = [&forest](std::span<const double> x) { return forest.predict(x); };
  const MCValue empty = MCGame(f, law, points.front(), n_mc, seed).evaluate(0);
  parallel_for(points.size(), workers, [&](size_t i) {
    MCGame game(f, law, points[i], n_mc, seed, i);
    auto res = mc_shapley(game, &empty);
    truth.phi[i] = std::move(res.sv.phi);
    truth.std_error[i] = std::move(res.std_error);
  });
  return truth;
}

MetricReport score_estimator(const std::string& name, const OracleTruth& truth, std::span<const SVReport> reports,
                             int k, bool by_magnitude) {
  if (reports.size() != truth.phi.size()) throw ConfigError("report count differs from the oracle instance count");
  MetricReport m;
  m.estimator = name;
  m.k = k;
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto r = r_ae(truth.phi[i], reports[i].phi);
    m.rae.push_back(r.value);
    m.excluded.push_back(r.excluded);
    m.tpr.push_back(tpr(truth.phi[i], reports[i].phi, std::min<int>(k, static_cast<int>(truth.phi[i].size())),
                        by_magnitude));
  }
  m.finalize();
  return m;
}

ExperimentResult run_linear_experiment(const ExperimentConfig& config) {
  ExperimentResult out;
  out.config = config;
  auto fx = build_linear_fixture(config);
  out.test_mse = fx.test_mse;
  out.label_variance = fx.label_variance;
  out.truth = mc_truth(fx.forest, fx.law, fx.test_points, config.n_mc, derive_seed(config.seed, {5}), config.workers);

  ReducedPredictor pred(fx.forest, &fx.train.data);
  const auto players = PlayerPartition::singletons(config.p, fx.forest.feature_names());
  std::vector<std::string> ids;
  for (size_t i = 0; i < fx.test_points.size(); ++i) ids.push_back(std::to_string(i));

  ExplainOptions shap;
  shap.estimator = EstimatorKind::kShapPath;
  const auto shap_reports = explain_batch(pred, players, fx.test_points, ids, shap, config.workers);

  ExplainOptions leaf;
  leaf.estimator = EstimatorKind::kLeaf;
  leaf.leaf_normalization = config.leaf_normalization;
  leaf.algorithm = config.leaf_normalization == LeafNormalization::kNone ? Algorithm::kMultiGames : Algorithm::kBruteForce;
  const auto leaf_reports = explain_batch(pred, players, fx.test_points, ids, leaf, config.workers);

  out.shap_path = score_estimator("shap_path", out.truth, shap_reports, config.k, config.tpr_by_magnitude);
  out.leaf = score_estimator("leaf", out.truth, leaf_reports, config.k, config.tpr_by_magnitude);
  return out;
}

// ---------------------------------------------------------------------------

std::string truth_to_json(const OracleTruth& truth, std::uint64_t seed, int n_mc) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["n_mc"] = n_mc;
  auto& arr = j["instances"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < truth.points.size(); ++i) {
    arr.push_back({{"id", std::to_string(i)},
                   {"x", truth.points[i]},
                   {"phi", truth.phi.at(i)},
                   {"std_error", i < truth.std_error.size() ? truth.std_error[i] : std::vector<double>{}}});
  }
  return j.dump(1) + "\n";
}

OracleTruth truth_from_json(std::string_view text) {
  OracleTruth t;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& e : j.at("instances")) {
      t.points.push_back(e.at("x").get<std::vector<double>>());
      t.phi.push_back(e.at("phi").get<std::vector<double>>());
      t.std_error.push_back(e.value("std_error", std::vector<double>{}));
      if (t.phi.back().size() != t.points.back().size()) throw ParseError("truth.instances", "phi length differs from x");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("truth", e.what());
  }
  return t;
}

void write_bundle(const std::string& dir, const TreeEnsemble& model, const Dataset& data, const OracleTruth* truth,
                  std::uint64_t seed, int n_mc) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (fs::path(dir) / name).string());
    out << body;
  };
  write("model.json", dump_model(model));
  write("data.csv", write_csv(data));
  write("schema.txt", schema_of(data).to_text());
  if (truth) write("truth.json", truth_to_json(*truth, seed, n_mc));
}

}  // namespace leafshap
