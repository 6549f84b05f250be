#include "mdgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

using Row = std::vector<std::string>;

std::vector<Row> parse_records(const std::string &text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&]() {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&]() {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started)
          throw DataError("stray quote on line " + std::to_string(line));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string &cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "null";
}

double parse_number(const std::string &cell, const std::string &column,
                    std::size_t row) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw DataError("cannot parse '" + cell + "' in column '" + column +
                    "', row " + std::to_string(row));
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset::Dataset(std::vector<Column> columns) {
  for (auto &c : columns) add(std::move(c));
}

bool Dataset::has(const std::string &name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column &c) { return c.name == name; });
}

const Column &Dataset::column(const std::string &name) const {
  for (const auto &c : columns_)
    if (c.name == name) return c;
  throw DataError("missing column '" + name + "'");
}

Column &Dataset::column(const std::string &name) {
  for (auto &c : columns_)
    if (c.name == name) return c;
  throw DataError("missing column '" + name + "'");
}

void Dataset::add(Column column) {
  if (has(column.name))
    throw DataError("duplicate column '" + column.name + "'");
  if (!columns_.empty() && column.values.size() != rows_)
    throw DataError("column '" + column.name + "' has the wrong length");
  rows_ = column.values.size();
  columns_.push_back(std::move(column));
}

Eigen::VectorXd Dataset::vector(const std::string &name) const {
  const auto &v = column(name).values;
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd Dataset::covariates(const CovariateSpace &space) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows_),
                    static_cast<Eigen::Index>(space.size()));
  for (std::size_t d = 0; d < space.size(); ++d) {
    const Column &c = column(space.name(d));
    const bool cat = c.kind == ColumnKind::Categorical;
    if (cat != space.is_categorical(d))
      throw DataError("column '" + c.name + "' has the wrong kind");
    if (cat && c.labels.size() > space.num_categories(d))
      throw DataError("column '" + c.name + "' has more levels than the model");
    X.col(static_cast<Eigen::Index>(d)) = vector(c.name);
  }
  return X;
}

Dataset Dataset::select(const std::vector<std::size_t> &rows) const {
  Dataset out;
  for (const auto &c : columns_) {
    Column s{c.name, c.kind, {}, c.labels};
    for (std::size_t r : rows) s.values.push_back(c.values.at(r));
    out.add(std::move(s));
  }
  return out;
}

Dataset parse_csv(const std::string &text, const std::vector<ColumnSpec> &specs,
                  const LevelMap &levels) {
  const auto records = parse_records(text);
  if (records.empty()) throw DataError("CSV has no header row");
  const Row &header = records.front();
  Dataset out;
  for (const auto &spec : specs) {
    std::size_t idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == spec.name) idx = i;
    if (idx == header.size())
      throw DataError("missing column '" + spec.name + "'");
    Column col{spec.name, spec.kind, {}, {}};
    const auto known = levels.find(spec.name);
    if (spec.kind == ColumnKind::Categorical && known != levels.end())
      col.labels = known->second;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const Row &rec = records[r];
      if (rec.size() != header.size())
        throw DataError("row " + std::to_string(r) + " has " +
                        std::to_string(rec.size()) + " fields, header has " +
                        std::to_string(header.size()));
      const std::string &cell = rec[idx];
      if (is_missing(cell))
        throw DataError("missing value in column '" + spec.name + "', row " +
                        std::to_string(r));
      if (spec.kind == ColumnKind::Continuous) {
        col.values.push_back(parse_number(cell, spec.name, r));
        continue;
      }
      const std::string label = trim(cell);
      auto it = std::find(col.labels.begin(), col.labels.end(), label);
      if (it == col.labels.end()) {
        if (known != levels.end())
          throw DataError("unseen level '" + label + "' in column '" +
                          spec.name + "'");
        col.labels.push_back(label);
        it = col.labels.end() - 1;
      }
      col.values.push_back(static_cast<double>(it - col.labels.begin()));
    }
    out.add(std::move(col));
  }
  return out;
}

Dataset load_csv(const std::string &path, const std::vector<ColumnSpec> &specs,
                 const LevelMap &levels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), specs, levels);
}

Dataset parse_numeric_csv(const std::string &text) {
  const auto records = parse_records(text);
  if (records.empty()) throw DataError("CSV has no header row");
  std::vector<ColumnSpec> specs;
  for (const auto &h : records.front()) specs.push_back({trim(h), ColumnKind::Continuous});
  return parse_csv(text, specs);
}

Dataset load_numeric_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_numeric_csv(ss.str());
}

std::vector<std::string> csv_header(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto records = parse_records(line + "\n");
  if (records.empty()) throw DataError("CSV has no header row");
  std::vector<std::string> out;
  for (const auto &h : records.front()) out.push_back(trim(h));
  return out;
}

std::string csv_field(const std::string &text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv(const std::string &path, const Dataset &data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const auto &cols = data.columns();
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << csv_field(cols[c].name);
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = cols[c].values[r];
      out << (c ? "," : "");
      if (cols[c].kind == ColumnKind::Categorical)
        out << csv_field(cols[c].labels.at(static_cast<std::size_t>(v)));
      else
        out << format_number(v);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

Standardization Standardization::fit(const Dataset &data,
                                     const std::vector<std::string> &columns) {
  Standardization s;
  for (const auto &name : columns) {
    const Column &c = data.column(name);
    if (c.kind != ColumnKind::Continuous)
      throw DataError("cannot standardize categorical column '" + name + "'");
    const auto n = static_cast<double>(c.values.size());
    if (c.values.size() < 2)
      throw DataError("column '" + name + "' needs at least 2 rows");
    double mean = 0.0;
    for (double v : c.values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : c.values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0))
      throw DataError("column '" + name + "' has zero variance");
    s.scales_[name] = {mean, sd};
  }
  return s;
}

const ColumnScaling &Standardization::scaling(const std::string &name) const {
  const auto it = scales_.find(name);
  if (it == scales_.end())
    throw DataError("no standardization stored for '" + name + "'");
  return it->second;
}

void Standardization::set(const std::string &name, ColumnScaling scaling) {
  if (!(scaling.sd > 0.0)) throw DataError("scaling sd must be positive");
  scales_[name] = scaling;
}

Dataset Standardization::apply(const Dataset &data) const {
  Dataset out = data;
  for (const auto &[name, sc] : scales_) {
    if (!out.has(name)) continue;
    for (double &v : out.column(name).values) v = sc.forward(v);
  }
  return out;
}

Dataset Standardization::invert(const Dataset &data) const {
  Dataset out = data;
  for (const auto &[name, sc] : scales_) {
    if (!out.has(name)) continue;
    for (double &v : out.column(name).values) v = sc.inverse(v);
  }
  return out;
}

nlohmann::json Standardization::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[name, sc] : scales_)
    j[name] = {{"mean", sc.mean}, {"sd", sc.sd}};
  return j;
}

Standardization Standardization::from_json(const nlohmann::json &j) {
  if (!j.is_object()) throw DataError("standardization must be an object");
  Standardization s;
  for (const auto &[name, v] : j.items()) {
    if (!v.contains("mean") || !v.contains("sd"))
      throw DataError("standardization of '" + name + "' needs mean and sd");
    s.set(name, {v.at("mean").get<double>(), v.at("sd").get<double>()});
  }
  return s;
}

std::pair<Dataset, Standardization> standardize(
    const Dataset &data, const std::vector<std::string> &columns) {
  Standardization s = Standardization::fit(data, columns);
  return {s.apply(data), s};
}

CovariateSpace make_space(const Dataset &data,
                          const std::vector<std::string> &covariates) {
  std::vector<DimSpec> dims;
  for (const auto &name : covariates) {
    const Column &c = data.column(name);
    if (c.kind == ColumnKind::Categorical) {
      dims.push_back(CategoricalDim{name, c.labels});
    } else {
      if (c.values.empty()) throw DataError("column '" + name + "' is empty");
      const auto [lo, hi] = std::minmax_element(c.values.begin(), c.values.end());
      if (!(*lo < *hi))
        throw DataError("covariate '" + name + "' has a single value");
      dims.push_back(ContinuousDim{name, *lo, *hi});
    }
  }
  return CovariateSpace(std::move(dims));
}

LevelMap level_map(const Dataset &data) {
  LevelMap out;
  for (const auto &c : data.columns())
    if (c.kind == ColumnKind::Categorical) out[c.name] = c.labels;
  return out;
}

}  // namespace mdgp
