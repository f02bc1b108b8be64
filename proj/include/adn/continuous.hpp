#pragma once

#include <span>
#include <vector>

#include "adn/network.hpp"
#include "adn/population.hpp"
#include "adn/soft_logic.hpp"

namespace adn {

struct Rates {
  double output = 0.01;
  /// 0 freezes the feature network while the output layer keeps learning.
  double internal = 0.01;
};

/// Loss gradients for every parameter, indexed like the network.
struct Gradients {
  std::vector<std::vector<double>> out;      // per feature, aligned with Feature::out
  std::vector<std::vector<double>> weights;  // per feature, aligned with Feature::weights
  std::vector<double> bias;                  // per feature
  std::vector<double> class_bias;            // per output unit
  double loss = 0.0;
};

/// Full forward pass followed by reverse-topological backpropagation of the
/// cross-entropy loss. Pure: the network is not modified.
Gradients compute_gradients(const FeatureNetwork& net, const Instance& inst, int target);

struct StepResult {
  ActivationState state;
  Prediction prediction;
  std::vector<double> deltas;
  double loss = 0.0;
};

/// One gradient step on every weight and bias. `selective` asks for the
/// gradient to be taken over a selective (active-only) pass, which would only
/// ever push feature activity down; combined with internal_rate > 0 it is
/// rejected with ConfigError.
StepResult backprop_full(FeatureNetwork& net, const Instance& inst, int target, const Rates& rates, Minibatch& batch,
                         bool selective = false);

struct RandomInitOptions {
  double threshold = 0.5;
  ActivationFn fn = ActivationFn::Tanh;
  double init_stddev = 0.1;
  std::size_t max_steps = 1000;
  double rate = 0.1;
};

struct RandomInit {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t steps = 0;
};

/// Random weights from N(0, stddev^2), then gradient ascent on the unit's
/// own activation for `inputs` until it exceeds the threshold. Throws
/// InitFailure if the step cap is reached first.
RandomInit init_random_feature(std::span<const double> inputs, const RandomInitOptions& opt, Rng& rng);

/// Creation with soft-logic parameters: symbolic atoms get the soft atom
/// unit, composites the soft-and over their children's current activations.
class SoftLogicFactory : public FeatureFactory {
 public:
  SoftLogicFactory(double threshold, double buffer) : threshold_(threshold), buffer_(buffer) {}

  std::optional<FeatureIndex> create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                          std::uint64_t step) const override;
  std::optional<FeatureIndex> create_composite(FeatureNetwork& net, const std::vector<FeatureIndex>& children,
                                               const ActivationState& state, Rng& rng,
                                               std::uint64_t step) const override;

 private:
  double threshold_;
  double buffer_;
};

/// Creation with randomly initialized units that are pushed to match the
/// creating input. Atoms read `atom_inputs` encoded attributes.
class RandomInitFactory : public FeatureFactory {
 public:
  /// Weights are drawn from `init_rng` when given, else from the creation RNG.
  RandomInitFactory(RandomInitOptions opt, std::size_t atom_inputs, Rng* init_rng = nullptr)
      : opt_(opt), atom_inputs_(atom_inputs), init_rng_(init_rng) {}

  std::optional<FeatureIndex> create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                          std::uint64_t step) const override;
  std::optional<FeatureIndex> create_composite(FeatureNetwork& net, const std::vector<FeatureIndex>& children,
                                               const ActivationState& state, Rng& rng,
                                               std::uint64_t step) const override;

 private:
  RandomInitOptions opt_;
  std::size_t atom_inputs_;
  Rng* init_rng_;
};

}  // namespace adn
