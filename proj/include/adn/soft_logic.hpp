#pragma once

#include <span>
#include <vector>

#include "adn/network.hpp"

namespace adn {

/// Parameters of a tanh unit that approximates a logical test.
struct SoftParams {
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;  // t
  double buffer = 0.1;     // b (b_comp for composites)
  double scale = 0.0;      // c

  double pre(std::span<const double> inputs) const;
  double activation(std::span<const double> inputs) const;
};

/// c = b / (1 - atanh(t)). Throws ConfigError unless t in (0, 1), b > 0 and
/// atanh(t) < 1 (i.e. t < tanh(1)).
double soft_scale(double threshold, double buffer);
void validate_soft_threshold(double threshold);

/// Unit for `x >= v`: reaches exactly t at x = v - b and tanh(1) at x = v.
SoftParams init_soft_atom_geq(double v, double threshold, double buffer);

/// Unit for `x <= v`: reaches exactly t at x = v + b and tanh(1) at x = v.
SoftParams init_soft_atom_leq(double v, double threshold, double buffer);

/// Soft-and over the children's current activations. The unit outputs
/// tanh(1) for these activations and exactly t when their sum drops to n*t.
/// Throws InitFailure when the children do not currently match (sum <= n*t).
SoftParams init_soft_composite(std::span<const double> child_activations, double threshold);

/// Gives every feature of a symbolic network its soft-logic parameters and
/// switches the network to continuous evaluation with tanh units. Composites
/// are initialized as if every child sat at its creation activation tanh(1).
/// Atoms on nominal attributes read the one-hot indicator of their category.
void convert_to_soft_logic(FeatureNetwork& net, double threshold, double buffer);

/// Soft-logic parameters for one symbolic atom already in the network.
void init_soft_atom(FeatureNetwork& net, FeatureIndex atom, double threshold, double buffer);

}  // namespace adn
