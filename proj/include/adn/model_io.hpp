#pragma once

#include <filesystem>
#include <optional>

#include "adn/conv.hpp"
#include "adn/data.hpp"
#include "adn/network.hpp"
#include "json.hpp"

namespace adn {

inline constexpr int kModelSchemaVersion = 1;

/// One feature with child references expressed as ids.
nlohmann::json feature_to_json(const FeatureNetwork& net, FeatureIndex i);

/// Rebuilds a feature from `feature_to_json` output. Child ids are resolved
/// against `net`; output links are not part of the feature record.
Feature feature_from_json(const nlohmann::json& j, const FeatureNetwork& net);

nlohmann::json network_to_json(const FeatureNetwork& net);
FeatureNetwork network_from_json(const nlohmann::json& j);

/// What gets written to disk after training: the network plus the input
/// normalization it was trained under.
struct TabularModel {
  FeatureNetwork network;
  std::optional<NormalizationStats> normalization;
};

nlohmann::json model_to_json(const TabularModel& model);
TabularModel model_from_json(const nlohmann::json& j);

nlohmann::json conv_network_to_json(const ConvNetwork& net);
ConvNetwork conv_network_from_json(const nlohmann::json& j);

struct ConvModel {
  ConvNetwork network;
  PixelScaling scaling;
};

nlohmann::json model_to_json(const ConvModel& model);
ConvModel conv_model_from_json(const nlohmann::json& j);

/// "tabular" or "conv"; throws ConfigError if `j` is not a model document.
std::string model_kind(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace adn
