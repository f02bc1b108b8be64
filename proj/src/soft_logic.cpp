#include "adn/soft_logic.hpp"

#include <cmath>
#include <numeric>

#include "adn/error.hpp"

namespace adn {

double SoftParams::pre(std::span<const double> inputs) const {
  double s = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * inputs[i];
  return s;
}

double SoftParams::activation(std::span<const double> inputs) const { return std::tanh(pre(inputs)); }

void validate_soft_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("match threshold must lie in (0, 1) for tanh units");
  if (std::atanh(t) >= 1.0)
    throw ConfigError("match threshold must be below tanh(1) ~ 0.761594 for soft-logic initialization");
}

double soft_scale(double t, double b) {
  validate_soft_threshold(t);
  if (!(b > 0.0)) throw ConfigError("activation buffer must be positive");
  return b / (1.0 - std::atanh(t));
}

SoftParams init_soft_atom_geq(double v, double t, double b) {
  SoftParams p;
  p.threshold = t;
  p.buffer = b;
  p.scale = soft_scale(t, b);
  p.weights = {1.0 / p.scale};
  p.bias = -v / p.scale + 1.0;
  return p;
}

SoftParams init_soft_atom_leq(double v, double t, double b) {
  SoftParams p;
  p.threshold = t;
  p.buffer = b;
  p.scale = soft_scale(t, b);
  p.weights = {-1.0 / p.scale};
  p.bias = v / p.scale + 1.0;
  return p;
}

SoftParams init_soft_composite(std::span<const double> a, double t) {
  validate_soft_threshold(t);
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) throw ConfigError("soft composite needs at least two children");
  const double sum = std::accumulate(a.begin(), a.end(), 0.0);
  const double bcomp = sum - n * t;
  if (!(bcomp > 0.0)) throw InitFailure("children do not currently match (sum of activations <= n*t)");
  SoftParams p;
  p.threshold = t;
  p.buffer = bcomp;
  p.scale = bcomp / (1.0 - std::atanh(t));
  p.weights.assign(a.size(), 1.0 / p.scale);
  p.bias = -sum / p.scale + 1.0;
  return p;
}

void init_soft_atom(FeatureNetwork& net, FeatureIndex i, double t, double b) {
  auto& f = net[i];
  if (!f.predicate) throw ConfigError("soft-logic initialization needs a symbolic atom");
  const auto& pr = *f.predicate;
  SoftParams p;
  switch (pr.kind) {
    case PredicateKind::Geq:
      p = init_soft_atom_geq(pr.boundary, t, b);
      f.inputs = {InputRef{pr.attribute, -1}};
      break;
    case PredicateKind::Leq:
      p = init_soft_atom_leq(pr.boundary, t, b);
      f.inputs = {InputRef{pr.attribute, -1}};
      break;
    case PredicateKind::Equals:
      // indicator >= 1: matching gives exactly tanh(1), non-matching sits far below t
      p = init_soft_atom_geq(1.0, t, b);
      f.inputs = {InputRef{pr.attribute, static_cast<std::int32_t>(pr.boundary)}};
      break;
  }
  f.weights = p.weights;
  f.bias = p.bias;
}

void convert_to_soft_logic(FeatureNetwork& net, double t, double b) {
  validate_soft_threshold(t);
  const double creation_activation = std::tanh(1.0);
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    auto& f = net[i];
    if (f.is_atomic()) {
      if (!f.predicate) {
        if (f.inputs.empty()) throw InvariantError("atom without predicate or inputs");
        continue;  // already continuous
      }
      init_soft_atom(net, i, t, b);
    } else {
      std::vector<double> a(f.children.size(), creation_activation);
      auto p = init_soft_composite(a, t);
      f.weights = p.weights;
      f.bias = p.bias;
    }
  }
  net.set_activation_fn(ActivationFn::Tanh);
  net.set_match_threshold(t);
  net.set_continuous(true);
}

}  // namespace adn
