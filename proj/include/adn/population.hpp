#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "adn/network.hpp"
#include "adn/rng.hpp"

namespace adn {

/// Population limits and creation rates. Defaults follow the common
/// parameter set used for every benchmark.
struct PopulationConfig {
  std::size_t max_atomic = 500;
  std::size_t max_composite = 1000;
  double creation_prob = 0.1;
  double incorrect_bias = 0.75;
  double correct_bias = 0.25;
  double atomic_extra_prob = 0.1;
  std::uint64_t removal_interval = 100;
  std::size_t max_children = 2;
  std::size_t sparse_out_limit = 0;  // 0 = dense output layer
  unsigned min_out_depth = 0;
  double sparse_link_prob = 0.1;

  void validate() const;
};

/// Builds the concrete feature once the population has decided what to
/// create. The default builds symbolic features; continuous engines
/// override it to attach trained parameters.
class FeatureFactory {
 public:
  virtual ~FeatureFactory() = default;

  /// A new atom matching `inst`, or nullopt if it would duplicate one.
  virtual std::optional<FeatureIndex> create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                                  std::uint64_t step) const;

  /// A new composite over `children` (already checked for duplicates).
  virtual std::optional<FeatureIndex> create_composite(FeatureNetwork& net, const std::vector<FeatureIndex>& children,
                                                       const ActivationState& state, Rng& rng,
                                                       std::uint64_t step) const;
};

/// Picks `count` distinct children from the active features.
using ChildChooser =
    std::function<std::vector<FeatureIndex>(const std::vector<FeatureIndex>& active, std::size_t count, Rng& rng)>;

struct CreationOutcome {
  std::vector<FeatureIndex> created;
  bool composite_triggered = false;
  bool atomic_triggered = false;
};

/// Stochastic creation for one instance: a composite over uniformly chosen
/// active features with probability creation_prob times the error bias, and
/// independently a covering atom with probability atomic_extra_prob.
CreationOutcome maybe_create(FeatureNetwork& net, const ActivationState& state, const Instance& inst, bool was_correct,
                             Rng& rng, std::uint64_t step, const PopulationConfig& cfg,
                             const FeatureFactory& factory = FeatureFactory{}, const ChildChooser& chooser = {});

bool is_duplicate(const FeatureNetwork& net, std::span<const FeatureIndex> children);

/// Removes the lowest-valued atoms, then composites, until both populations
/// fit their caps. Features created at or after `interval_start`, or still
/// protected at `now`, are removed only when nothing else is left. Ties go
/// to the oldest feature.
std::vector<FeatureId> trim_population(FeatureNetwork& net, const std::vector<double>& fitness,
                                       const PopulationConfig& cfg, std::uint64_t interval_start,
                                       std::uint64_t now);

/// Sparse output layer: maybe links a random active feature (at the
/// minimum depth) to a class drawn proportionally to |delta|. Returns the
/// number of links created (0 or 1).
std::size_t sparse_link_step(FeatureNetwork& net, const ActivationState& state, std::span<const double> deltas,
                             Rng& rng, std::uint64_t step, const PopulationConfig& cfg);

/// Drops the smallest-magnitude links until at most sparse_out_limit remain.
std::size_t sparse_link_trim(FeatureNetwork& net, const PopulationConfig& cfg);

}  // namespace adn
