#include "leafshap/cli.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "leafshap/error.hpp"
#include "leafshap/oracle.hpp"
#include "leafshap/shapley.hpp"

namespace leafshap::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad number in ") + what + ": " + item);
    }
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& body, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << body;
    out.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << body;
}

LeafNormalization parse_normalization(const std::string& s) {
  if (s == "none") return LeafNormalization::kNone;
  if (s == "by_z") return LeafNormalization::kByZ;
  throw ConfigError("unknown leaf normalization: " + s);
}

// --- shared model/data plumbing ----------------------------------------------

struct Inputs {
  std::string model;
  std::string data;
  std::string schema;
  std::string query;
  std::string instances;
  std::string partition;
  int q = 0;
  bool recount = false;
};

void add_input_options(CLI::App* sub, Inputs& in, bool require) {
  auto* m = sub->add_option("--model", in.model, "model dump (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--data", in.data, "training/background data (CSV)")->check(CLI::ExistingFile);
  if (require) m->required();
  sub->add_option("--schema", in.schema, "column schema; defaults to schema.txt next to the data")
      ->check(CLI::ExistingFile);
  sub->add_option("--query", in.query, "points to explain (CSV, same schema); defaults to the data")
      ->check(CLI::ExistingFile);
  sub->add_option("--instances", in.instances, "row selector: a:b, a: or i,j,k");
  sub->add_option("--partition", in.partition, "player partition (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--q", in.q, "quantile-bin continuous columns into q bins (0 = off)")->check(CLI::NonNegativeNumber);
  sub->add_flag("--recount", in.recount, "recompute node counts from the data");
}

Dataset load_csv(const std::string& csv, const std::string& schema_path) {
  std::string schema = schema_path;
  if (schema.empty()) {
    const auto sibling = fs::path(csv).parent_path() / "schema.txt";
    if (fs::exists(sibling)) schema = sibling.string();
  }
  if (!schema.empty()) return load_dataset_files(csv, schema);
  // No schema: every header column is continuous.
  const std::string text = read_file(csv);
  const std::string header = text.substr(0, text.find('\n'));
  Schema s;
  for (const auto& name : split_list(header)) s.columns.push_back({name});
  return load_dataset(text, s);
}

struct Loaded {
  TreeEnsemble model;
  Dataset data;
  std::vector<std::vector<double>> points;
  std::vector<std::string> ids;
  PlayerPartition partition;
  bool has_data = false;
  const Dataset* background() const { return has_data ? &data : nullptr; }
};

Loaded load_inputs(const Inputs& in) {
  Loaded l;
  l.model = load_model(in.model);
  if (in.data.empty() && in.query.empty()) throw ConfigError("pass --data, --query or both");
  // Without --data only the path estimator can run; the query then stands in for the layout.
  l.has_data = !in.data.empty();
  l.data = load_csv(l.has_data ? in.data : in.query, in.schema);
  if (static_cast<int>(l.data.cols()) != l.model.n_features()) {
    throw ValidationError("data has " + std::to_string(l.data.cols()) + " columns, model expects " +
                          std::to_string(l.model.n_features()));
  }
  Dataset query = in.query.empty() || !l.has_data ? l.data : load_csv(in.query, in.schema);
  if (query.cols() != l.data.cols()) throw ValidationError("query columns differ from the data columns");
  if (in.q > 0) {
    if (!l.has_data) throw ConfigError("--q needs --data to place the bin edges");
    std::vector<int> cont;
    for (size_t c = 0; c < l.data.cols(); ++c) {
      if (l.data.meta(c).kind == FeatureKind::kContinuous) cont.push_back(static_cast<int>(c));
    }
    auto binned = quantile_discretize(l.data, cont, in.q);
    const bool same = in.query.empty();
    l.data = std::move(binned.data);
    if (same) {
      query = l.data;
    } else {
      for (int c : cont) {
        const auto& edges = l.data.meta(static_cast<size_t>(c)).bin_edges;
        auto col = query.column(static_cast<size_t>(c));
        query = query.with_replaced(static_cast<size_t>(c), apply_bins(edges, col), l.data.meta(static_cast<size_t>(c)));
      }
    }
  }
  if (in.recount) {
    if (!l.has_data) throw ConfigError("--recount needs --data");
    l.model = recount(l.model, l.data);
  }
  for (size_t r : parse_instances(in.instances, query.rows())) {
    l.points.push_back(query.row(r));
    l.ids.push_back(std::to_string(r));
  }
  std::vector<std::string> names;
  for (const auto& m : l.data.meta()) names.push_back(m.name);
  if (in.partition.empty()) {
    l.partition = PlayerPartition::singletons(static_cast<int>(l.data.cols()), names);
  } else {
    l.partition = load_partition(in.partition);
    l.partition.validate(static_cast<int>(l.data.cols()));
  }
  return l;
}

struct Output {
  std::string out;
  std::string format = "json";
  int workers = 1;
  bool strict = false;
};

void add_output_options(CLI::App* sub, Output& o) {
  sub->add_option("--out", o.out, "output path, - for stdout");
  sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--workers", o.workers, "instance-parallel workers")->check(CLI::PositiveNumber);
  sub->add_flag("--strict", o.strict, "deterministic mode: sequential evaluation");
}

int effective_workers(const Output& o) { return o.strict ? 1 : o.workers; }

// --- explain -------------------------------------------------------------------

struct ExplainArgs {
  Inputs in;
  Output out;
  std::string estimator = "leaf";
  std::string algorithm = "brute_force";
  std::string normalization = "none";
  int max_players = kDefaultMaxPlayers;
  bool diagnostics = false;
  std::uint64_t seed = 0;
  int n_mc = 0;
};

int run_explain(const ExplainArgs& a, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  ExplainOptions o;
  o.estimator = parse_estimator(a.estimator);
  o.algorithm = parse_algorithm(a.algorithm);
  o.leaf_normalization = parse_normalization(a.normalization);
  o.max_players = a.max_players;
  o.diagnostics = a.diagnostics;
  if (o.algorithm == Algorithm::kMultiGames && o.estimator != EstimatorKind::kLeaf) {
    throw ConfigError("multi_games requires the leaf estimator");
  }
  const auto l = load_inputs(a.in);
  ReducedPredictor pred(l.model, l.background());
  const auto reports = explain_batch(pred, l.partition, l.points, l.ids, o, effective_workers(a.out));
  emit(a.out.out, a.out.format == "csv" ? reports_to_csv(reports) : reports_to_json(reports), out);
  err << "explained " << reports.size() << " instances in " << seconds_since(t0) << " s\n";
  return 0;
}

// --- compare -------------------------------------------------------------------

struct CompareArgs {
  Inputs in;
  Output out;
  std::string truth;
  std::string oracle_estimator;
  std::string synthetic;
  std::string estimators = "shap_path,leaf";
  std::string normalization = "none";
  std::string rho = "0.7";
  std::string plot_csv;
  ExperimentConfig exp;
  int k = 3;
  bool tpr_by_magnitude = false;
};

ExplainOptions options_for(const std::string& name, LeafNormalization norm) {
  ExplainOptions o;
  o.estimator = parse_estimator(name);
  if (o.estimator == EstimatorKind::kLeaf) {
    o.leaf_normalization = norm;
    if (norm == LeafNormalization::kNone) o.algorithm = Algorithm::kMultiGames;
  }
  return o;
}

std::string plot_rows(const std::string& prefix, const MetricReport& m) {
  std::string s;
  char buf[96];
  for (size_t i = 0; i < m.rae.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g\n", i, m.rae[i], m.tpr[i]);
    s += prefix + m.estimator + buf;
  }
  return s;
}

int run_compare_sweep(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  if (a.synthetic != "linear") throw ConfigError("unknown synthetic oracle: " + a.synthetic);
  const auto rhos = parse_doubles(a.rho, "--rho");
  if (rhos.empty()) throw ConfigError("--rho needs at least one value");
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::string csv = "rho,estimator,n,mean_rae,median_rae,mean_tpr,test_mse\n";
  std::string plot = "rho,estimator,instance,r_ae,tpr\n";
  for (double rho : rhos) {
    const auto t0 = Clock::now();
    ExperimentConfig c = a.exp;
    c.rho = rho;
    c.k = a.k;
    c.tpr_by_magnitude = a.tpr_by_magnitude;
    c.leaf_normalization = parse_normalization(a.normalization);
    c.workers = effective_workers(a.out);
    const auto r = run_linear_experiment(c);
    for (const MetricReport* m : {&r.shap_path, &r.leaf}) {
      rows.push_back({{"rho", rho},
                      {"estimator", m->estimator},
                      {"n", m->rae.size()},
                      {"mean_rae", m->mean_rae},
                      {"median_rae", m->median_rae},
                      {"mean_tpr", m->mean_tpr},
                      {"test_mse", r.test_mse}});
      char buf[256];
      std::snprintf(buf, sizeof buf, "%.17g,%s,%zu,%.17g,%.17g,%.17g,%.17g\n", rho, m->estimator.c_str(),
                    m->rae.size(), m->mean_rae, m->median_rae, m->mean_tpr, r.test_mse);
      csv += buf;
      std::snprintf(buf, sizeof buf, "%.17g,", rho);
      plot += plot_rows(buf, *m);
    }
    err << "rho " << rho << ": median R-AE shap_path " << r.shap_path.median_rae << ", leaf " << r.leaf.median_rae
        << " (" << seconds_since(t0) << " s)\n";
  }
  emit(a.out.out, a.out.format == "csv" ? csv : rows.dump(1) + "\n", out);
  if (!a.plot_csv.empty()) emit(a.plot_csv, plot, out);
  return 0;
}

int run_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.synthetic.empty()) return run_compare_sweep(a, out, err);
  if (a.truth.empty() && a.oracle_estimator.empty()) {
    throw OracleError("no oracle: pass --truth, --oracle-estimator or --synthetic");
  }
  if (a.in.model.empty() || a.in.data.empty()) throw ConfigError("--model and --data are required with this oracle");
  const auto t0 = Clock::now();
  const auto norm = parse_normalization(a.normalization);
  auto l = load_inputs(a.in);
  if (l.partition.size() != l.data.cols()) throw ConfigError("compare works on singleton players");
  ReducedPredictor pred(l.model, l.background());
  const int workers = effective_workers(a.out);
  OracleTruth truth;
  if (!a.truth.empty()) {
    if (!fs::exists(a.truth)) throw OracleError("oracle file not found: " + a.truth);
    truth = truth_from_json(read_file(a.truth));
    l.ids.clear();
    for (size_t i = 0; i < truth.points.size(); ++i) {
      if (truth.points[i].size() != l.data.cols()) throw ValidationError("oracle point dimension differs from data");
      l.ids.push_back(std::to_string(i));
    }
    l.points = truth.points;
  } else {
    const auto o = options_for(a.oracle_estimator, norm);
    truth.points = l.points;
    for (const auto& r : explain_batch(pred, l.partition, l.points, l.ids, o, workers)) truth.phi.push_back(r.phi);
  }
  std::vector<MetricReport> reports;
  for (const auto& name : split_list(a.estimators)) {
    const auto o = options_for(name, norm);
    const auto svs = explain_batch(pred, l.partition, l.points, l.ids, o, workers);
    reports.push_back(score_estimator(name, truth, svs, a.k, a.tpr_by_magnitude));
    err << name << ": median R-AE " << reports.back().median_rae << ", mean TPR " << reports.back().mean_tpr << "\n";
  }
  emit(a.out.out, a.out.format == "csv" ? metric_reports_to_csv(reports) : metric_reports_to_json(reports), out);
  if (!a.plot_csv.empty()) emit(a.plot_csv, metric_reports_to_csv(reports), out);
  err << "compared " << l.points.size() << " instances in " << seconds_since(t0) << " s\n";
  return 0;
}

// --- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "linear";
  std::string out;
  std::string cards = "3,4,2";
  double dependence = 0.6;
  ExperimentConfig exp;
  bool no_truth = false;
  int workers = 1;
};

TreeEnsemble fit_forest(const Dataset& ds, std::span<const double> y, const ExperimentConfig& c) {
  CartOptions opt;
  opt.max_depth = c.max_depth;
  opt.min_samples_leaf = c.min_samples_leaf;
  opt.n_trees = c.n_trees;
  opt.bootstrap = c.n_trees > 1;
  opt.seed = derive_seed(c.seed, {2});
  return fit_cart(ds, y, opt);
}

int run_synth(const SynthArgs& a, std::ostream&, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto& c = a.exp;
  if (a.kind == "linear") {
    const auto fxt = build_linear_fixture(c);
    OracleTruth truth;
    if (!a.no_truth) truth = mc_truth(fxt.forest, fxt.law, fxt.test_points, c.n_mc, derive_seed(c.seed, {5}), a.workers);
    write_bundle(a.out, fxt.forest, fxt.train.data, a.no_truth ? nullptr : &truth, c.seed, c.n_mc);
    err << "linear fixture: holdout MSE " << fxt.test_mse << ", label variance " << fxt.label_variance << "\n";
  } else if (a.kind == "categorical") {
    std::vector<int> cards;
    for (double v : parse_doubles(a.cards, "--cards")) cards.push_back(static_cast<int>(v));
    const auto ds = gen_categorical(c.n, cards, a.dependence, derive_seed(c.seed, {1}));
    // Additive per-category effects plus one pairwise interaction.
    Rng rng(derive_seed(c.seed, {6}));
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> effect;
    for (int k : cards) {
      effect.emplace_back();
      for (int j = 0; j < k; ++j) effect.back().push_back(2.0 * nd(rng));
    }
    std::vector<double> y(ds.rows());
    for (size_t i = 0; i < ds.rows(); ++i) {
      for (size_t j = 0; j < ds.cols(); ++j) y[i] += effect[j][static_cast<size_t>(ds.at(i, j))];
      if (ds.cols() > 1) y[i] += ds.at(i, 0) * ds.at(i, 1);
      y[i] += 0.1 * nd(rng);
    }
    write_bundle(a.out, fit_forest(ds, y, c), ds, nullptr, c.seed, 0);
  } else if (a.kind == "toy") {
    const auto t = gen_toy_categorical(c.n, derive_seed(c.seed, {1}));
    write_bundle(a.out, fit_forest(t.data, t.labels, c), t.data, nullptr, c.seed, 0);
  } else {
    throw ConfigError("unknown fixture kind: " + a.kind);
  }
  err << "wrote " << a.kind << " bundle to " << a.out << " in " << seconds_since(t0) << " s\n";
  return 0;
}

// --- bench -----------------------------------------------------------------------

struct BenchArgs {
  Inputs in;
  Output out;
  std::string combos = "shap_path:brute_force,leaf:brute_force,leaf:multi_games";
  std::string synthetic_p;
  int n = 2000;
  int n_trees = 5;
  int max_depth = 4;
  double rho = 0.0;
  int n_instances = 20;
  int repeats = 5;
  std::uint64_t seed = 2021;
};

nlohmann::ordered_json machine_info() {
  nlohmann::ordered_json m;
  utsname u{};
  if (uname(&u) == 0) {
    m["system"] = u.sysname;
    m["release"] = u.release;
    m["machine"] = u.machine;
  }
  m["hardware_threads"] = std::thread::hardware_concurrency();
#ifdef __VERSION__
  m["compiler"] = __VERSION__;
#endif
  return m;
}

nlohmann::ordered_json bench_fixture(const TreeEnsemble& model, const Dataset& data, const PlayerPartition& players,
                                     const std::vector<std::vector<double>>& points, const BenchArgs& a,
                                     std::ostream& err) {
  ReducedPredictor pred(model, &data);
  std::vector<std::string> ids;
  for (size_t i = 0; i < points.size(); ++i) ids.push_back(std::to_string(i));
  std::set<int> used;
  int depth = 0;
  int max_leaf_features = 0;
  for (const auto& t : model.trees()) {
    depth = std::max(depth, t.max_depth());
    for (const auto& nd : t.nodes()) {
      if (!nd.is_leaf()) used.insert(nd.feature);
    }
    for (const auto& leaf : t.leaves()) {
      max_leaf_features = std::max(max_leaf_features, static_cast<int>(leaf.used_features.size()));
    }
  }
  nlohmann::ordered_json fx;
  fx["n_features"] = model.n_features();
  fx["players"] = players.size();
  fx["used_features"] = used.size();
  fx["trees"] = model.trees().size();
  fx["max_tree_depth"] = depth;
  fx["max_leaf_features"] = max_leaf_features;
  fx["instances"] = points.size();
  std::int64_t ops = 0;
  for (const auto& x : points) {
    MultiGamesStats st;
    multi_games_sv(pred, players, x, &st);
    ops += st.value_evaluations;
  }
  fx["multi_games_value_evaluations"] = ops;
  fx["multi_games_evaluations_per_instance"] = points.empty() ? 0.0 : static_cast<double>(ops) / points.size();
  fx["brute_force_subsets_all_players"] = std::pow(2.0, static_cast<double>(players.size()));
  fx["brute_force_subsets_used_players"] = std::pow(2.0, static_cast<double>(used.size()));
  fx["note"] = "multi_games evaluates 2^d values per leaf with d its path features, so its cost follows tree depth, not p";
  auto& runs = fx["runs"] = nlohmann::ordered_json::array();
  for (const auto& combo : split_list(a.combos)) {
    const auto colon = combo.find(':');
    if (colon == std::string::npos) throw ConfigError("combo must read estimator:algorithm, got " + combo);
    ExplainOptions o;
    o.estimator = parse_estimator(combo.substr(0, colon));
    o.algorithm = parse_algorithm(combo.substr(colon + 1));
    nlohmann::ordered_json run{{"estimator", to_string(o.estimator)}, {"algorithm", to_string(o.algorithm)}};
    std::vector<double> times;
    try {
      for (int r = 0; r < a.repeats; ++r) {
        const auto t0 = Clock::now();
        explain_batch(pred, players, points, ids, o, effective_workers(a.out));
        times.push_back(seconds_since(t0));
      }
      run["status"] = "ok";
      run["median_seconds"] = median(times);
      run["seconds"] = times;
      err << "  " << combo << ": median " << median(times) << " s over " << a.repeats << " runs\n";
    } catch (const ConfigError& e) {
      run["status"] = "skipped";
      run["reason"] = e.what();
      err << "  " << combo << ": skipped (" << e.what() << ")\n";
    }
    runs.push_back(run);
  }
  return fx;
}

int run_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (a.repeats < 5) throw ConfigError("--repeats must be at least 5");
  nlohmann::ordered_json report;
  report["machine"] = machine_info();
  report["repeats"] = a.repeats;
  report["workers"] = effective_workers(a.out);
  auto& fixtures = report["fixtures"] = nlohmann::ordered_json::array();
  if (!a.synthetic_p.empty()) {
    for (double pv : parse_doubles(a.synthetic_p, "--synthetic-p")) {
      const int p = static_cast<int>(pv);
      ExperimentConfig c;
      c.n = a.n;
      c.p = p;
      c.rho = a.rho;
      c.n_trees = a.n_trees;
      c.max_depth = a.max_depth;
      c.n_instances = a.n_instances;
      c.seed = a.seed;
      // Informative coefficients on the first columns, zero elsewhere.
      c.beta.assign(static_cast<size_t>(p), 0.0);
      for (size_t j = 0; j < std::min<size_t>(static_cast<size_t>(p), experiment_beta().size()); ++j) {
        c.beta[j] = experiment_beta()[j];
      }
      err << "synthetic linear fixture p = " << p << "\n";
      const auto fxt = build_linear_fixture(c);
      auto entry = bench_fixture(fxt.forest, fxt.train.data, PlayerPartition::singletons(p), fxt.test_points, a, err);
      entry["synthetic_p"] = p;
      fixtures.push_back(std::move(entry));
    }
  } else {
    if (a.in.model.empty() || a.in.data.empty()) throw ConfigError("bench needs --model and --data or --synthetic-p");
    const auto l = load_inputs(a.in);
    if (!l.has_data) throw ConfigError("bench needs --data");
    fixtures.push_back(bench_fixture(l.model, l.data, l.partition, l.points, a, err));
  }
  emit(a.out.out, report.dump(1) + "\n", out);
  return 0;
}

void add_experiment_options(CLI::App* sub, ExperimentConfig& c) {
  sub->add_option("--n", c.n, "training rows")->check(CLI::NonNegativeNumber);
  sub->add_option("--p", c.p, "features")->check(CLI::PositiveNumber);
  sub->add_option("--n-trees", c.n_trees, "forest size")->check(CLI::PositiveNumber);
  sub->add_option("--max-depth", c.max_depth, "tree depth")->check(CLI::NonNegativeNumber);
  sub->add_option("--min-samples-leaf", c.min_samples_leaf, "CART leaf size")->check(CLI::PositiveNumber);
  sub->add_option("--n-instances", c.n_instances, "test instances")->check(CLI::NonNegativeNumber);
  sub->add_option("--n-mc", c.n_mc, "Monte-Carlo draws per subset")->check(CLI::Range(2, 100000000));
  sub->add_option("--seed", c.seed, "master seed");
}

void fix_beta(ExperimentConfig& c) {
  if (static_cast<int>(c.beta.size()) == c.p) return;
  if (c.p > static_cast<int>(experiment_beta().size())) {
    throw ConfigError("the default coefficients cover 5 features; use --p <= 5");
  }
  c.beta.assign(experiment_beta().begin(), experiment_beta().begin() + c.p);
}

}  // namespace

std::vector<size_t> parse_instances(const std::string& selector, size_t rows) {
  std::vector<size_t> out;
  const std::string s = trim(selector);
  auto number = [&](const std::string& t) -> size_t {
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad instance selector: " + selector);
    }
    return static_cast<size_t>(std::stoull(t));
  };
  if (s.empty()) {
    out.resize(rows);
    std::iota(out.begin(), out.end(), size_t{0});
    return out;
  }
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const size_t a = number(trim(s.substr(0, colon)));
    const std::string rest = trim(s.substr(colon + 1));
    const size_t b = rest.empty() ? rows : number(rest);
    if (a > b || b > rows) throw ConfigError("instance range " + s + " outside 0.." + std::to_string(rows));
    for (size_t i = a; i < b; ++i) out.push_back(i);
    return out;
  }
  for (const auto& item : split_list(s)) {
    const size_t i = number(item);
    if (i >= rows) throw ConfigError("instance " + item + " outside 0.." + std::to_string(rows));
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    if (value == "true") {
      args.push_back("--" + key);
    } else if (value != "false") {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shapley values for tree ensembles with conditional estimators"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; flags override it");

  ExplainArgs ex;
  auto* explain = app.add_subcommand("explain", "Shapley values for selected instances");
  add_input_options(explain, ex.in, true);
  add_output_options(explain, ex.out);
  explain->add_option("--estimator", ex.estimator, "shap_path, discrete or leaf")
      ->check(CLI::IsMember({"shap_path", "discrete", "leaf"}));
  explain->add_option("--algorithm", ex.algorithm, "brute_force or multi_games")
      ->check(CLI::IsMember({"brute_force", "multi_games"}));
  explain->add_option("--leaf-normalization", ex.normalization, "none or by_z")->check(CLI::IsMember({"none", "by_z"}));
  explain->add_option("--max-players", ex.max_players, "subset enumeration guard")->check(CLI::Range(0, kHardMaxPlayers));
  explain->add_flag("--diagnostics", ex.diagnostics, "include the reduced value of every subset");
  explain->add_option("--seed", ex.seed, "accepted for uniformity; explain is deterministic");
  explain->add_option("--n-mc", ex.n_mc, "accepted for uniformity; unused by explain");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "score estimators against an oracle");
  add_input_options(compare, cmp.in, false);
  add_output_options(compare, cmp.out);
  add_experiment_options(compare, cmp.exp);
  compare->add_option("--truth", cmp.truth, "oracle Shapley values (truth.json)");
  compare->add_option("--oracle-estimator", cmp.oracle_estimator, "use an estimator as the oracle");
  compare->add_option("--synthetic", cmp.synthetic, "run the linear Gaussian experiment instead")
      ->check(CLI::IsMember({"linear"}));
  compare->add_option("--rho", cmp.rho, "correlation(s) for --synthetic, comma separated");
  compare->add_option("--estimators", cmp.estimators, "comma separated estimator list");
  compare->add_option("--leaf-normalization", cmp.normalization, "none or by_z")->check(CLI::IsMember({"none", "by_z"}));
  compare->add_option("--k", cmp.k, "TPR top/bottom size")->check(CLI::PositiveNumber);
  compare->add_flag("--tpr-magnitude", cmp.tpr_by_magnitude, "rank TPR by |phi| instead of signed phi");
  compare->add_option("--plot-csv", cmp.plot_csv, "per-instance R-AE/TPR CSV for plotting");

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "write a fixture bundle");
  synth->add_option("--kind", syn.kind, "linear, categorical or toy")
      ->check(CLI::IsMember({"linear", "categorical", "toy"}));
  synth->add_option("--out", syn.out, "bundle directory")->required();
  add_experiment_options(synth, syn.exp);
  synth->add_option("--rho", syn.exp.rho, "correlation (linear)")->check(CLI::Range(0.0, 0.999999));
  synth->add_option("--cards", syn.cards, "category counts (categorical)");
  synth->add_option("--dependence", syn.dependence, "copy probability between columns (categorical)")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--no-truth", syn.no_truth, "skip the Monte-Carlo oracle");
  synth->add_option("--workers", syn.workers, "oracle workers")->check(CLI::PositiveNumber);

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "time estimator/algorithm pairs");
  add_input_options(bench, be.in, false);
  add_output_options(bench, be.out);
  bench->add_option("--combos", be.combos, "estimator:algorithm list");
  bench->add_option("--synthetic-p", be.synthetic_p, "synthetic linear fixtures with these feature counts");
  bench->add_option("--n", be.n, "synthetic training rows")->check(CLI::PositiveNumber);
  bench->add_option("--n-trees", be.n_trees, "synthetic forest size")->check(CLI::PositiveNumber);
  bench->add_option("--max-depth", be.max_depth, "synthetic tree depth")->check(CLI::NonNegativeNumber);
  bench->add_option("--rho", be.rho, "synthetic correlation")->check(CLI::Range(0.0, 0.999999));
  bench->add_option("--n-instances", be.n_instances, "synthetic instances")->check(CLI::NonNegativeNumber);
  bench->add_option("--repeats", be.repeats, "repetitions per pair (>= 5)");
  bench->add_option("--seed", be.seed, "master seed");

  try {
    // Config file values go right after the subcommand so flags win.
    for (size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
      }
      if (path.empty()) continue;
      auto extra = config_file_args(path);
      auto sub = std::find_if(args.begin(), args.end(), [](const std::string& s) {
        return s == "explain" || s == "compare" || s == "synth" || s == "bench";
      });
      if (sub == args.end()) break;
      args.insert(sub + 1, extra.begin(), extra.end());
      break;
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
      app.parse(std::move(rev));
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        out << app.help();
        return 0;
      }
      err << "error: " << e.what() << "\n";
      return 2;
    }
    if (explain->parsed()) return run_explain(ex, out, err);
    if (compare->parsed()) {
      fix_beta(cmp.exp);
      return run_compare(cmp, out, err);
    }
    if (synth->parsed()) {
      fix_beta(syn.exp);
      return run_synth(syn, out, err);
    }
    if (bench->parsed()) return run_bench(be, out, err);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace leafshap::cli
