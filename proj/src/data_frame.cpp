#include "leafshap/data_frame.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "leafshap/error.hpp"
#include "leafshap/tree_model.hpp"

namespace leafshap {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous:
      return "continuous";
    case FeatureKind::kCategorical:
      return "categorical";
    case FeatureKind::kIndicator:
      return "indicator";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<std::vector<double>> columns, std::vector<FeatureMeta> meta)
    : columns_(std::move(columns)), meta_(std::move(meta)) {
  if (columns_.size() != meta_.size()) throw ValidationError("column count differs from metadata count");
  n_ = columns_.empty() ? 0 : columns_.front().size();
  validate();
}

void Dataset::validate() const {
  for (size_t c = 0; c < columns_.size(); ++c) {
    const auto& col = columns_[c];
    const auto& m = meta_[c];
    if (col.size() != n_) throw ValidationError("column " + m.name + " has ragged length");
    for (size_t r = 0; r < n_; ++r) {
      const double v = col[r];
      switch (m.kind) {
        case FeatureKind::kContinuous:
          if (!std::isfinite(v)) {
            throw ValidationError("non-finite value in column " + m.name + " row " + std::to_string(r));
          }
          break;
        case FeatureKind::kCategorical:
          if (!(v >= 0 && v < static_cast<double>(m.categories.size()) && v == std::floor(v))) {
            throw ValidationError("invalid category code in column " + m.name + " row " + std::to_string(r));
          }
          break;
        case FeatureKind::kIndicator:
          if (v != 0.0 && v != 1.0) {
            throw ValidationError("indicator column " + m.name + " row " + std::to_string(r) + " is not 0/1");
          }
          break;
      }
    }
  }
}

std::vector<double> Dataset::row(size_t r) const {
  std::vector<double> out(columns_.size());
  for (size_t c = 0; c < columns_.size(); ++c) out[c] = columns_[c][r];
  return out;
}

int Dataset::column_index(std::string_view name) const {
  for (size_t c = 0; c < meta_.size(); ++c) {
    if (meta_[c].name == name) return static_cast<int>(c);
  }
  return -1;
}

Dataset Dataset::with_column(std::vector<double> values, FeatureMeta meta) const {
  auto cols = columns_;
  auto metas = meta_;
  cols.push_back(std::move(values));
  metas.push_back(std::move(meta));
  return Dataset(std::move(cols), std::move(metas));
}

Dataset Dataset::with_replaced(size_t col, std::vector<double> values, FeatureMeta meta) const {
  auto cols = columns_;
  auto metas = meta_;
  cols.at(col) = std::move(values);
  metas.at(col) = std::move(meta);
  return Dataset(std::move(cols), std::move(metas));
}

// ---------------------------------------------------------------------------

Schema Schema::parse(std::string_view text) {
  Schema s;
  int lineno = 0;
  for (const std::string& raw : lines_of(text)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = "schema line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where, "expected \"column = kind\"");
    FeatureMeta m;
    m.name = trim(std::string_view(line).substr(0, eq));
    const std::string kind = trim(std::string_view(line).substr(eq + 1));
    if (m.name.empty()) throw ParseError(where, "empty column name");
    if (kind == "continuous") {
      m.kind = FeatureKind::kContinuous;
    } else if (kind == "indicator") {
      m.kind = FeatureKind::kIndicator;
    } else if (kind.rfind("categorical(", 0) == 0 && kind.back() == ')') {
      m.kind = FeatureKind::kCategorical;
      m.categories = split(std::string_view(kind).substr(12, kind.size() - 13), ',');
      std::set<std::string> uniq(m.categories.begin(), m.categories.end());
      if (m.categories.empty() || uniq.size() != m.categories.size() || uniq.count("")) {
        throw ParseError(where, "categories must be distinct and non-empty");
      }
    } else {
      throw ParseError(where, "unknown kind \"" + kind + "\"");
    }
    if (s.find(m.name)) throw ParseError(where, "duplicate column " + m.name);
    s.columns.push_back(std::move(m));
  }
  return s;
}

std::string Schema::to_text() const {
  std::string out;
  for (const FeatureMeta& m : columns) {
    out += m.name + " = ";
    if (m.kind == FeatureKind::kCategorical) {
      out += "categorical(";
      for (size_t k = 0; k < m.categories.size(); ++k) out += (k ? "," : "") + m.categories[k];
      out += ")";
    } else {
      out += to_string(m.kind);
    }
    out += "\n";
  }
  return out;
}

const FeatureMeta* Schema::find(std::string_view name) const {
  for (const auto& m : columns) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

Schema schema_of(const Dataset& ds) { return Schema{ds.meta()}; }

Dataset load_dataset(std::string_view csv, const Schema& schema) {
  const auto lines = lines_of(csv);
  size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw ParseError("csv", "missing header row");
  const auto header = split(lines[first], ',');

  std::vector<FeatureMeta> meta;
  for (const auto& name : header) {
    const FeatureMeta* m = schema.find(name);
    if (!m) throw ParseError("csv header", "column \"" + name + "\" not covered by schema");
    meta.push_back(*m);
  }
  std::vector<std::vector<double>> cols(header.size());
  size_t row = 0;
  for (size_t li = first + 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split(lines[li], ',');
    const std::string where = "csv row " + std::to_string(row);
    if (cells.size() != header.size()) {
      throw ParseError(where, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      const FeatureMeta& m = meta[c];
      double v = 0.0;
      if (m.kind == FeatureKind::kCategorical) {
        auto it = std::find(m.categories.begin(), m.categories.end(), cells[c]);
        if (it == m.categories.end()) {
          throw ParseError(where, "unknown category \"" + cells[c] + "\" in column " + m.name);
        }
        v = static_cast<double>(it - m.categories.begin());
      } else {
        auto parsed = parse_double(cells[c]);
        if (!parsed) throw ParseError(where, "non-numeric token \"" + cells[c] + "\" in column " + m.name);
        v = *parsed;
        if (m.kind == FeatureKind::kIndicator && v != 0.0 && v != 1.0) {
          throw ParseError(where, "indicator column " + m.name + " must be 0 or 1");
        }
        if (!std::isfinite(v)) throw ParseError(where, "non-finite value in column " + m.name);
      }
      cols[c].push_back(v);
    }
    ++row;
  }
  return Dataset(std::move(cols), std::move(meta));
}

Dataset load_dataset_files(const std::string& csv_path, const std::string& schema_path) {
  return load_dataset(read_file(csv_path), Schema::parse(read_file(schema_path)));
}

std::string write_csv(const Dataset& ds) {
  std::string out;
  for (size_t c = 0; c < ds.cols(); ++c) out += (c ? "," : "") + ds.meta(c).name;
  out += "\n";
  for (size_t r = 0; r < ds.rows(); ++r) {
    for (size_t c = 0; c < ds.cols(); ++c) {
      if (c) out += ",";
      const FeatureMeta& m = ds.meta(c);
      if (m.kind == FeatureKind::kCategorical) {
        out += m.categories[static_cast<size_t>(ds.at(r, c))];
      } else {
        out += format_double(ds.at(r, c));
      }
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

void PlayerPartition::validate(int n_columns) const {
  if (!labels.empty() && labels.size() != players.size()) {
    throw ValidationError("partition has " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(players.size()) + " players");
  }
  std::vector<char> used(static_cast<size_t>(std::max(n_columns, 0)), 0);
  for (size_t g = 0; g < players.size(); ++g) {
    if (players[g].empty()) throw ValidationError("player " + std::to_string(g) + " has no columns");
    for (int c : players[g]) {
      if (c < 0 || c >= n_columns) {
        throw ValidationError("player " + std::to_string(g) + " references column " + std::to_string(c) +
                              " outside 0.." + std::to_string(n_columns - 1));
      }
      if (used[static_cast<size_t>(c)]) {
        throw ValidationError("column " + std::to_string(c) + " belongs to more than one player");
      }
      used[static_cast<size_t>(c)] = 1;
    }
  }
}

std::vector<int> PlayerPartition::owner_of_columns(int n_columns) const {
  std::vector<int> owner(static_cast<size_t>(n_columns), -1);
  for (size_t g = 0; g < players.size(); ++g) {
    for (int c : players[g]) owner.at(static_cast<size_t>(c)) = static_cast<int>(g);
  }
  return owner;
}

PlayerPartition PlayerPartition::singletons(int n_columns, const std::vector<std::string>& names) {
  PlayerPartition p;
  for (int c = 0; c < n_columns; ++c) {
    p.players.push_back({c});
    p.labels.push_back(static_cast<size_t>(c) < names.size() ? names[static_cast<size_t>(c)]
                                                             : "x" + std::to_string(c));
  }
  return p;
}

PlayerPartition PlayerPartition::from_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("partition", std::string("invalid JSON: ") + e.what());
  }
  PlayerPartition p;
  auto it = doc.find("players");
  if (!doc.is_object() || it == doc.end() || !it->is_array()) throw ParseError("players", "expected array");
  for (size_t g = 0; g < it->size(); ++g) {
    const json& grp = (*it)[g];
    if (!grp.is_array()) throw ParseError("players[" + std::to_string(g) + "]", "expected array of column ids");
    std::vector<int> cols;
    for (const json& c : grp) {
      if (!c.is_number_integer()) throw ParseError("players[" + std::to_string(g) + "]", "expected integer");
      cols.push_back(c.get<int>());
    }
    p.players.push_back(std::move(cols));
  }
  if (auto lt = doc.find("labels"); lt != doc.end()) {
    if (!lt->is_array()) throw ParseError("labels", "expected array");
    for (const json& l : *lt) {
      if (!l.is_string()) throw ParseError("labels", "expected strings");
      p.labels.push_back(l.get<std::string>());
    }
  }
  if (p.labels.empty()) {
    for (size_t g = 0; g < p.players.size(); ++g) p.labels.push_back("player" + std::to_string(g));
  }
  return p;
}

std::string PlayerPartition::to_json() const {
  nlohmann::json doc;
  doc["players"] = players;
  doc["labels"] = labels;
  return doc.dump();
}

PlayerPartition load_partition(const std::string& path) { return PlayerPartition::from_json(read_file(path)); }

// ---------------------------------------------------------------------------

std::vector<double> quantile_edges(std::span<const double> values, int q) {
  if (q < 2) throw ConfigError("q must be at least 2");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges{-kInf};
  const size_t n = sorted.size();
  if (n > 0) {
    for (int r = 1; r < q; ++r) {
      // (floor(n r / q) + 1)-th order statistic: with [a, b) bins this leaves
      // floor(n r / q) rows strictly below the edge when there are no ties.
      size_t k = (n * static_cast<size_t>(r)) / static_cast<size_t>(q);
      k = std::min(k, n - 1);
      const double e = sorted[k];
      // An edge at or below the minimum would only create an empty bin.
      if (e <= sorted.front()) continue;
      if (e > edges.back()) edges.push_back(e);
    }
  }
  edges.push_back(kInf);
  return edges;
}

int bin_of(std::span<const double> edges, double v) {
  // edges[0] = -inf; find the last edge <= v among the interior ones.
  auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, v);
  return static_cast<int>(it - (edges.begin() + 1));
}

std::vector<double> apply_bins(std::span<const double> edges, std::span<const double> values) {
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = bin_of(edges, values[i]);
  return out;
}

DiscretizeResult quantile_discretize(const Dataset& ds, std::span<const int> columns, int q,
                                     bool expand_indicators) {
  if (q < 2) throw ConfigError("q must be at least 2");
  DiscretizeResult res;
  res.data = ds;
  for (int c : columns) {
    if (c < 0 || static_cast<size_t>(c) >= ds.cols()) throw ConfigError("column " + std::to_string(c) + " out of range");
    const FeatureMeta& src = ds.meta(static_cast<size_t>(c));
    if (src.kind != FeatureKind::kContinuous) {
      throw ConfigError("column " + src.name + " is not continuous and cannot be discretized");
    }
    auto edges = quantile_edges(ds.column(static_cast<size_t>(c)), q);
    const int bins = static_cast<int>(edges.size()) - 1;
    if (bins < q) {
      res.warnings.push_back("column " + src.name + ": duplicate quantile edges collapsed, " +
                             std::to_string(bins) + " bins instead of " + std::to_string(q));
    }
    FeatureMeta m = src;
    m.kind = FeatureKind::kCategorical;
    m.bin_edges = edges;
    m.categories.clear();
    for (int r = 0; r < bins; ++r) {
      m.categories.push_back("[" + format_double(edges[static_cast<size_t>(r)]) + "," +
                             format_double(edges[static_cast<size_t>(r) + 1]) + ")");
    }
    auto codes = apply_bins(edges, ds.column(static_cast<size_t>(c)));
    res.data = res.data.with_replaced(static_cast<size_t>(c), codes, m);

    if (expand_indicators) {
      std::vector<int> group;
      for (int r = 0; r < bins; ++r) {
        std::vector<double> ind(codes.size());
        for (size_t i = 0; i < codes.size(); ++i) ind[i] = codes[i] == r ? 1.0 : 0.0;
        FeatureMeta im;
        im.name = src.name + "#" + std::to_string(r);
        im.kind = FeatureKind::kIndicator;
        im.source_feature = c;
        group.push_back(static_cast<int>(res.data.cols()));
        res.data = res.data.with_column(std::move(ind), std::move(im));
      }
      res.indicator_groups.players.push_back(std::move(group));
      res.indicator_groups.labels.push_back(src.name);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

EncodeResult encode_categorical(const Dataset& ds, int column, EncodingSpec spec) {
  if (column < 0 || static_cast<size_t>(column) >= ds.cols()) throw ConfigError("column out of range");
  const FeatureMeta& src = ds.meta(static_cast<size_t>(column));
  if (src.kind != FeatureKind::kCategorical) throw ConfigError("column " + src.name + " is not categorical");
  const int k = static_cast<int>(src.categories.size());
  if (k < 2) throw ConfigError("column " + src.name + " has a single category; encoding is degenerate");
  if (spec.scheme == EncodingScheme::kDummy) {
    if (spec.dropped_category < 0) spec.dropped_category = k - 1;
    if (spec.dropped_category >= k) throw ConfigError("dropped category out of range");
  } else {
    spec.dropped_category = -1;
  }

  EncodeResult res;
  res.data = ds;
  res.label = src.name;
  spec.column_map.assign(static_cast<size_t>(k), -1);
  const auto codes = ds.column(static_cast<size_t>(column));
  for (int cat = 0; cat < k; ++cat) {
    if (cat == spec.dropped_category) continue;
    std::vector<double> ind(codes.size());
    for (size_t i = 0; i < codes.size(); ++i) ind[i] = codes[i] == cat ? 1.0 : 0.0;
    FeatureMeta m;
    m.name = src.name + "=" + src.categories[static_cast<size_t>(cat)];
    m.kind = FeatureKind::kIndicator;
    m.source_feature = column;
    const int id = static_cast<int>(res.data.cols());
    spec.column_map[static_cast<size_t>(cat)] = id;
    res.group.push_back(id);
    res.data = res.data.with_column(std::move(ind), std::move(m));
  }
  res.spec = std::move(spec);
  return res;
}

std::vector<double> decode_categorical(const Dataset& ds, const EncodingSpec& spec) {
  std::vector<double> out(ds.rows(), -1.0);
  for (size_t r = 0; r < ds.rows(); ++r) {
    int found = -1;
    int ones = 0;
    for (size_t cat = 0; cat < spec.column_map.size(); ++cat) {
      const int col = spec.column_map[cat];
      if (col >= 0 && ds.at(r, static_cast<size_t>(col)) == 1.0) {
        ++ones;
        found = static_cast<int>(cat);
      }
    }
    if (ones == 0 && spec.scheme == EncodingScheme::kDummy) found = spec.dropped_category;
    if (ones > 1 || found < 0) throw ValidationError("row " + std::to_string(r) + " is not a valid encoding");
    out[r] = found;
  }
  return out;
}

bool feasible_pattern(EncodingScheme scheme, std::span<const double> group_values) {
  int ones = 0;
  for (double v : group_values) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return false;
    }
  }
  return scheme == EncodingScheme::kOneHot ? ones == 1 : ones <= 1;
}

// ---------------------------------------------------------------------------

std::int64_t count_region(const Dataset& ds, std::span<const Constraint> constraints) {
  for (const auto& c : constraints) {
    if (c.column < 0 || static_cast<size_t>(c.column) >= ds.cols()) {
      throw ConfigError("constraint references column " + std::to_string(c.column));
    }
  }
  if (constraints.empty()) return static_cast<std::int64_t>(ds.rows());
  // Column-major: keep a survivor mask and narrow it one constraint at a time.
  std::vector<char> alive(ds.rows(), 1);
  for (const auto& c : constraints) {
    const auto col = ds.column(static_cast<size_t>(c.column));
    for (size_t r = 0; r < ds.rows(); ++r) alive[r] = alive[r] && c.holds(col[r]);
  }
  return static_cast<std::int64_t>(std::count(alive.begin(), alive.end(), 1));
}

}  // namespace leafshap
