#include "adn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "adn/error.hpp"
#include "adn/rng.hpp"

namespace adn {

void Schema::validate() const {
  if (attributes.empty()) throw ConfigError("schema needs at least one attribute");
  if (classes.size() < 2) throw ConfigError("schema needs at least two classes");
  auto unique = [](const std::vector<std::string>& v) {
    return std::set<std::string>(v.begin(), v.end()).size() == v.size();
  };
  if (!unique(classes)) throw ConfigError("duplicate class name");
  for (const auto& a : attributes) {
    if (a.kind == AttributeKind::Nominal) {
      if (a.categories.empty()) throw ConfigError("nominal attribute '" + a.name + "' has no categories");
      if (!unique(a.categories)) throw ConfigError("duplicate category in attribute '" + a.name + "'");
    }
  }
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : schema.attributes) {
    nlohmann::json j{{"name", a.name}, {"kind", a.kind == AttributeKind::Real ? "real" : "nominal"}};
    if (a.kind == AttributeKind::Nominal) j["categories"] = a.categories;
    attrs.push_back(j);
  }
  return {{"attributes", attrs}, {"classes", schema.classes}};
}

Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  try {
    for (const auto& a : j.at("attributes")) {
      Attribute attr;
      attr.name = a.at("name").get<std::string>();
      const auto kind = a.at("kind").get<std::string>();
      if (kind == "real") {
        attr.kind = AttributeKind::Real;
      } else if (kind == "nominal") {
        attr.kind = AttributeKind::Nominal;
        attr.categories = a.at("categories").get<std::vector<std::string>>();
      } else {
        throw ConfigError("unknown attribute kind '" + kind + "'");
      }
      s.attributes.push_back(std::move(attr));
    }
    s.classes = j.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  return schema_from_json(j);
}

void save_schema(const Schema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << schema_to_json(schema).dump(2) << '\n';
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int category_of(const std::vector<std::string>& cats, const std::string& v) {
  auto it = std::find(cats.begin(), cats.end(), v);
  return it == cats.end() ? -1 : static_cast<int>(it - cats.begin());
}

}  // namespace

Dataset parse_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  Dataset data;
  data.schema = schema;
  const std::size_t width = schema.num_attributes() + 1;

  std::string line;
  if (!std::getline(in, line)) throw LoadError(1, "missing header row");
  auto header = split_row(line);
  if (header.size() != width)
    throw LoadError(1, "header has " + std::to_string(header.size()) + " columns, schema expects " +
                           std::to_string(width));
  for (std::size_t i = 0; i < schema.num_attributes(); ++i) {
    if (header[i] != schema.attributes[i].name)
      throw LoadError(1, "header column '" + header[i] + "' does not match attribute '" +
                             schema.attributes[i].name + "'");
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_row(line);
    if (cells.size() != width)
      throw LoadError(row, "expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()));
    Instance inst;
    inst.values.resize(schema.num_attributes());
    for (std::size_t i = 0; i < schema.num_attributes(); ++i) {
      const auto& a = schema.attributes[i];
      const auto& cell = cells[i];
      if (cell.empty() || cell == "?") throw LoadError(row, "missing value for '" + a.name + "'");
      if (a.kind == AttributeKind::Real) {
        double v = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
          throw LoadError(row, "cannot parse '" + cell + "' as real for '" + a.name + "'");
        inst.values[i] = v;
      } else {
        int c = category_of(a.categories, cell);
        if (c < 0) throw LoadError(row, "unknown category '" + cell + "' for '" + a.name + "'");
        inst.values[i] = c;
      }
    }
    int label = category_of(schema.classes, cells.back());
    if (label < 0) throw LoadError(row, "unknown class '" + cells.back() + "'");
    inst.label = label;
    data.instances.push_back(std::move(inst));
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw LoadError(0, "cannot open " + path.string());
  return parse_csv(in, schema);
}

void write_csv(const Dataset& data, std::ostream& out) {
  const auto& s = data.schema;
  for (const auto& a : s.attributes) out << a.name << ',';
  out << "class\n";
  for (const auto& inst : data.instances) {
    for (std::size_t i = 0; i < s.num_attributes(); ++i) {
      const auto& a = s.attributes[i];
      if (a.kind == AttributeKind::Real)
        out << format_real(inst.values[i]);
      else
        out << a.categories.at(static_cast<std::size_t>(inst.values[i]));
      out << ',';
    }
    out << s.classes.at(static_cast<std::size_t>(inst.label)) << '\n';
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(data, out);
}

// --- normalization ---------------------------------------------------------

double NormalizationStats::apply(std::size_t attribute, double value) const {
  double s = scale.at(attribute);
  if (s == 0.0) return 0.0;
  return (value - offset[attribute]) / s;
}

void NormalizationStats::apply(Instance& inst) const {
  for (std::size_t i = 0; i < inst.values.size() && i < offset.size(); ++i) {
    if (offset[i] == 0.0 && scale[i] == 1.0) continue;
    inst.values[i] = apply(i, inst.values[i]);
  }
}

void NormalizationStats::apply(Dataset& data) const {
  for (auto& inst : data.instances) apply(inst);
}

nlohmann::json NormalizationStats::to_json() const {
  return {{"strategy", strategy == Normalization::MinMax01 ? "minmax01" : "zscore"},
          {"offset", offset},
          {"scale", scale}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats s;
  s.strategy = j.at("strategy").get<std::string>() == "zscore" ? Normalization::ZScore : Normalization::MinMax01;
  s.offset = j.at("offset").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

NormalizationStats fit_normalization(const Dataset& train, Normalization strategy) {
  const auto& schema = train.schema;
  NormalizationStats st;
  st.strategy = strategy;
  st.offset.assign(schema.num_attributes(), 0.0);
  st.scale.assign(schema.num_attributes(), 1.0);
  for (std::size_t a = 0; a < schema.num_attributes(); ++a) {
    if (schema.attributes[a].kind != AttributeKind::Real || train.instances.empty()) continue;
    if (strategy == Normalization::MinMax01) {
      double lo = train.instances[0].values[a], hi = lo;
      for (const auto& inst : train.instances) {
        lo = std::min(lo, inst.values[a]);
        hi = std::max(hi, inst.values[a]);
      }
      st.offset[a] = lo;
      st.scale[a] = hi - lo;
      if (hi == lo) st.warnings.push_back("attribute '" + schema.attributes[a].name + "' is constant; mapped to 0");
    } else {
      double mean = 0.0;
      for (const auto& inst : train.instances) mean += inst.values[a];
      mean /= static_cast<double>(train.size());
      double var = 0.0;
      for (const auto& inst : train.instances) var += (inst.values[a] - mean) * (inst.values[a] - mean);
      var /= static_cast<double>(train.size());
      st.offset[a] = mean;
      st.scale[a] = std::sqrt(var);
      if (var == 0.0)
        st.warnings.push_back("attribute '" + schema.attributes[a].name + "' has zero variance; mapped to 0");
    }
  }
  return st;
}

NormalizationStats normalize(Dataset& data, Normalization strategy) {
  auto st = fit_normalization(data, strategy);
  st.apply(data);
  return st;
}

// --- folds -----------------------------------------------------------------

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  if (data.size() < k) throw ConfigError("dataset smaller than number of folds");
  Rng rng(splitmix64(seed));

  std::vector<std::vector<std::size_t>> by_class(data.schema.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class.at(static_cast<std::size_t>(data.instances[i].label)).push_back(i);

  FoldPlan plan;
  plan.folds.resize(k);
  std::vector<std::size_t> leftovers;
  std::size_t next = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    if (!members.empty() && members.size() < k) {
      plan.warnings.push_back("class '" + data.schema.classes[c] + "' has fewer than " + std::to_string(k) +
                              " members; not stratified");
      leftovers.insert(leftovers.end(), members.begin(), members.end());
      continue;
    }
    for (auto idx : members) plan.folds[next++ % k].push_back(idx);
  }
  std::shuffle(leftovers.begin(), leftovers.end(), rng);
  for (auto idx : leftovers) plan.folds[next++ % k].push_back(idx);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.schema = data.schema;
  out.instances.reserve(indices.size());
  for (auto i : indices) out.instances.push_back(data.instances.at(i));
  return out;
}

}  // namespace adn
