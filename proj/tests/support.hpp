#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "leafshap/data_frame.hpp"
#include "leafshap/oracle.hpp"
#include "leafshap/tree_model.hpp"

namespace leafshap::fx {

inline std::string fixture(const std::string& name) { return std::string(LEAFSHAP_FIXTURE_DIR) + "/" + name; }

// Continuous columns on a coarse grid so ties and empty projections occur.
inline Dataset random_dataset(int n, int p, std::uint64_t seed, double grid = 0.25) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> cols(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(n)));
  std::vector<FeatureMeta> meta;
  for (int j = 0; j < p; ++j) {
    for (auto& v : cols[static_cast<size_t>(j)]) v = grid > 0 ? std::round(nd(rng) / grid) * grid : nd(rng);
    meta.push_back({"x" + std::to_string(j)});
  }
  // Mild dependence between neighbouring columns.
  for (int j = 1; j < p; ++j) {
    for (int i = 0; i < n; ++i) {
      cols[static_cast<size_t>(j)][static_cast<size_t>(i)] += 0.5 * cols[static_cast<size_t>(j - 1)][static_cast<size_t>(i)];
    }
  }
  return Dataset(std::move(cols), std::move(meta));
}

inline std::vector<double> random_labels(const Dataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> beta(ds.cols());
  for (auto& b : beta) b = nd(rng) * 3;
  std::vector<double> y(ds.rows());
  for (size_t i = 0; i < ds.rows(); ++i) {
    double v = 0.0;
    for (size_t c = 0; c < ds.cols(); ++c) v += beta[c] * ds.at(i, c);
    if (ds.cols() > 1) v += 2.0 * (ds.at(i, 0) > 0 ? ds.at(i, 1) : -ds.at(i, 1));
    y[i] = v + 0.3 * nd(rng);
  }
  return y;
}

inline TreeEnsemble random_forest(const Dataset& ds, int depth, int n_trees, std::uint64_t seed) {
  CartOptions opt;
  opt.max_depth = depth;
  opt.min_samples_leaf = 1;
  opt.n_trees = n_trees;
  opt.seed = seed;
  return fit_cart(ds, random_labels(ds, seed + 17), opt);
}

inline std::vector<double> random_point(int p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> x(static_cast<size_t>(p));
  for (auto& v : x) v = nd(rng);
  return x;
}

}  // namespace leafshap::fx
