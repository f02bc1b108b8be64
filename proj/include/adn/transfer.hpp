#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "adn/multiplexer.hpp"
#include "adn/network.hpp"
#include "adn/rng.hpp"
#include "json.hpp"

namespace adn {

/// High-value feature subtrees carried from a solved problem into a larger
/// one. Records are child-closed and ordered by id (children first).
struct KeptSet {
  struct Record {
    nlohmann::json feature;  // same layout as a model feature record
    double fitness = 0.0;
  };

  Schema source_schema;
  std::optional<MultiplexerSpec> source_problem;
  std::vector<Record> features;

  nlohmann::json to_json() const;
  static KeptSet from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static KeptSet load(const std::filesystem::path& path);
};

/// The `top_m` composites by selection value (ties to the oldest) together
/// with every feature they transitively depend on.
KeptSet extract_kept(const FeatureNetwork& net, const std::vector<double>& fitness, std::size_t top_m,
                     std::optional<MultiplexerSpec> source = std::nullopt);

/// Re-creates the kept features in `target` with zero output weights and
/// flags them as kept. `attribute_map[s]` is the target index of source
/// attribute s. Features already present are reused. Kept features are
/// exempt from removal until `protect_until`. Returns target indices.
std::vector<FeatureIndex> inject_kept(FeatureNetwork& target, const KeptSet& kept,
                                      const std::vector<std::uint32_t>& attribute_map, std::uint64_t step,
                                      std::uint64_t protect_until);

/// Identity map over the first `n` attributes (the multiplexer ladder).
std::vector<std::uint32_t> identity_attribute_map(std::size_t n);

struct BiasedChoice {
  std::vector<FeatureIndex> children;
  std::size_t from_kept_pool = 0;  // slots served by the kept pool
};

/// For each child slot, independently: with probability `kept_prob` draw
/// uniformly from the active kept features, otherwise from all active
/// features. An empty pool falls back to the other; children are distinct.
BiasedChoice biased_child_choice(const FeatureNetwork& net, const std::vector<FeatureIndex>& active,
                                 std::size_t count, Rng& rng, double kept_prob = 0.5);

}  // namespace adn
