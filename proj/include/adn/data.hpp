#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace adn {

enum class AttributeKind { Real, Nominal };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::Real;
  std::vector<std::string> categories;  // nominal only

  bool operator==(const Attribute&) const = default;
};

struct Schema {
  std::vector<Attribute> attributes;
  std::vector<std::string> classes;

  std::size_t num_attributes() const { return attributes.size(); }
  std::size_t num_classes() const { return classes.size(); }

  /// Throws ConfigError unless there is at least one attribute, two classes,
  /// and every category list is duplicate-free.
  void validate() const;

  bool operator==(const Schema&) const = default;
};

/// One observation. Nominal attributes hold their category id as a double.
struct Instance {
  std::vector<double> values;
  int label = 0;
};

struct Dataset {
  Schema schema;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
};

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);
Schema load_schema(const std::filesystem::path& path);
void save_schema(const Schema& schema, const std::filesystem::path& path);

/// Comma-separated, header row required, last column is the class.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(std::istream& in, const Schema& schema);
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the identical binary64 value.
std::string format_real(double v);

enum class Normalization { MinMax01, ZScore };

/// Per-attribute transform parameters; nominal attributes keep offset 0,
/// scale 1 and are never touched.
struct NormalizationStats {
  Normalization strategy = Normalization::MinMax01;
  std::vector<double> offset;
  std::vector<double> scale;  // 0 marks a degenerate attribute mapped to 0
  std::vector<std::string> warnings;

  double apply(std::size_t attribute, double value) const;
  void apply(Instance& inst) const;
  void apply(Dataset& data) const;

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
};

/// Statistics from `train` only; apply them to any other fold afterwards.
NormalizationStats fit_normalization(const Dataset& train, Normalization strategy);

/// Fits on `data` and transforms it in place.
NormalizationStats normalize(Dataset& data, Normalization strategy);

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;  // indices into the dataset
  std::vector<std::string> warnings;

  std::size_t k() const { return folds.size(); }
  std::vector<std::size_t> test_indices(std::size_t fold) const { return folds.at(fold); }
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Stratified k-fold partition, deterministic under `seed`. Classes with
/// fewer than k members are dealt without stratification.
FoldPlan kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace adn
