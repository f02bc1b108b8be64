#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adn/conv.hpp"
#include "adn/training.hpp"
#include "json.hpp"

namespace adn {

enum class DataSource { File, Multiplexer, Shapes, Idx, PixelCsv };

/// Everything one experiment needs. Every field is reachable through a
/// config key (see config_keys()); the file format is `key = value` lines.
struct ExperimentConfig {
  // data
  DataSource source = DataSource::File;
  std::string data;
  std::string schema;
  std::string test_data;
  std::string test_labels;  // IDX only
  std::string labels;       // IDX only
  std::string normalization = "minmax";  // minmax | zscore | none
  unsigned mux_k = 2;
  unsigned parity_group = 1;
  std::size_t test_samples = 0;  // generators: 0 = enumerate when possible, else 10000
  std::size_t image_limit = 0;
  std::size_t shapes_train = 4000;
  std::size_t shapes_test = 1000;
  double shapes_noise = 0.1;

  // learning
  TrainerConfig trainer;
  ConvConfig conv;
  std::string schedule = "constant";
  std::size_t epochs = 100;
  std::size_t epoch_instances = 0;  // 0: one pass over file data, 10000 for generators
  std::uint64_t max_instances = 0;
  std::optional<double> stop_accuracy;

  // protocol
  std::optional<std::uint64_t> seed;
  std::size_t folds = 10;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::size_t top_m = 20;

  bool images() const { return source == DataSource::Shapes || source == DataSource::Idx || source == DataSource::PixelCsv; }
  std::uint64_t require_seed() const;
  /// Checks cross-field constraints; throws ConfigError.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// All accepted keys in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text form; throws ConfigError on unknown keys or
/// malformed values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

/// `key = value` pairs, `#` comments, blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& values);

/// Every key with its current value, for report echo.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace adn
