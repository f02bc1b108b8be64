#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adn/config.hpp"
#include "adn/training.hpp"
#include "json.hpp"

namespace adn {

/// Outputs of one training run. The report carries wall-clock time; the
/// curve and model are pure functions of config, data and seed.
struct TrainArtifacts {
  nlohmann::json report;
  std::string curve_csv;
  nlohmann::json model;
  nlohmann::json kept;  // transfer runs only
};

inline constexpr const char* kCurveHeader = "epoch,instances,train_acc,test_acc,lr";
std::string curve_to_csv(const std::vector<CurvePoint>& curve);
std::string confusion_to_csv(const std::vector<std::vector<std::size_t>>& confusion);

TrainArtifacts train_experiment(const ExperimentConfig& cfg);

/// Extracts the kept set from `source_model`, injects it into a fresh
/// network for `cfg`, and trains with the biased child choice.
TrainArtifacts transfer_experiment(const ExperimentConfig& cfg, const nlohmann::json& source_model);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t instances = 0;
  std::vector<std::vector<std::size_t>> confusion;
};

/// Scores a saved model on the data named by `cfg`: the file in `data` for
/// file sources, the generator's test set otherwise. Never mutates the model.
EvalResult eval_model(const nlohmann::json& model, const ExperimentConfig& cfg);

/// k-fold run over file data; folds execute on `cfg.threads` workers with
/// per-fold seeds, so results do not depend on the thread count.
nlohmann::json crossval_experiment(const ExperimentConfig& cfg);

/// One line per feature with output weights: the flattened conjunction of
/// its atomic predicates and its class weights, plus a DEFAULT line with the
/// class biases. Throws ConfigError for continuous or convolutional models.
std::string dump_rules(const nlohmann::json& model);

/// Writes the configured generator's data. Multiplexer sources emit CSV plus
/// `<stem>.schema.json`; shapes emit pixel CSV.
void generate_dataset(const ExperimentConfig& cfg, std::size_t samples, bool enumerate,
                      const std::filesystem::path& out);

}  // namespace adn
