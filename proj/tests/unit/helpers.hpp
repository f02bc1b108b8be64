#pragma once

// Builders and brute-force oracles shared by the unit tests.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "adn/network.hpp"
#include "adn/rng.hpp"

namespace testutil {

using namespace adn;

inline Schema mixed_schema(std::size_t reals, std::size_t nominals, std::size_t classes) {
  Schema s;
  for (std::size_t i = 0; i < reals; ++i) s.attributes.push_back({"r" + std::to_string(i), AttributeKind::Real, {}});
  for (std::size_t i = 0; i < nominals; ++i)
    s.attributes.push_back({"n" + std::to_string(i), AttributeKind::Nominal, {"a", "b", "c"}});
  for (std::size_t c = 0; c < classes; ++c) s.classes.push_back("c" + std::to_string(c));
  return s;
}

inline Instance random_instance(const Schema& s, Rng& rng) {
  Instance inst;
  for (const auto& a : s.attributes) {
    if (a.kind == AttributeKind::Real)
      inst.values.push_back(uniform01(rng));
    else
      inst.values.push_back(static_cast<double>(uniform_index(rng, a.categories.size())));
  }
  inst.label = static_cast<int>(uniform_index(rng, s.num_classes()));
  return inst;
}

inline Predicate random_predicate(const Schema& s, Rng& rng) {
  Predicate p;
  p.attribute = static_cast<std::uint32_t>(uniform_index(rng, s.num_attributes()));
  const auto& a = s.attributes[p.attribute];
  if (a.kind == AttributeKind::Nominal) {
    p.kind = PredicateKind::Equals;
    p.boundary = static_cast<double>(uniform_index(rng, a.categories.size()));
  } else {
    p.kind = bernoulli(rng, 0.5) ? PredicateKind::Geq : PredicateKind::Leq;
    p.boundary = uniform01(rng);
  }
  return p;
}

/// Symbolic DAG: `atoms` atoms then composites over 2..max_children random
/// earlier features until `total` features exist.
inline FeatureNetwork random_symbolic(const Schema& s, std::size_t atoms, std::size_t total, Rng& rng,
                                      std::size_t max_children = 3) {
  FeatureNetwork net(s);
  std::uint64_t step = 0;
  while (net.size() < atoms) {
    auto p = random_predicate(s, rng);
    if (!net.find_atom(p)) net.add_atom(p, step++);
  }
  std::size_t guard = 0;
  while (net.size() < total && guard++ < 100 * total) {
    const std::size_t k = 2 + uniform_index(rng, max_children - 1);
    std::vector<FeatureIndex> pool(net.size());
    for (FeatureIndex i = 0; i < pool.size(); ++i) pool[i] = i;
    auto children = sample_distinct(rng, pool, k);
    if (net.find_composite(children)) continue;
    net.add_composite(children, step++);
  }
  return net;
}

inline void randomize_outputs(FeatureNetwork& net, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  for (FeatureIndex i = 0; i < net.size(); ++i)
    for (auto& l : net[i].out) l.weight = g(rng);
  for (auto& b : net.biases()) b = g(rng);
}

/// Continuous DAG with random parameters: atoms read 1..2 encoded inputs.
inline FeatureNetwork random_continuous(const Schema& s, std::size_t atoms, std::size_t total, Rng& rng,
                                        ActivationFn fn = ActivationFn::Tanh,
                                        OutputFunction out = OutputFunction::Softmax) {
  FeatureNetwork net(s, out);
  net.set_continuous(true);
  net.set_activation_fn(fn);
  std::normal_distribution<double> g(0.0, 0.8);
  std::uint64_t step = 0;
  for (std::size_t a = 0; a < atoms; ++a) {
    std::vector<InputRef> in;
    const std::size_t k = 1 + uniform_index(rng, 2);
    for (std::size_t j = 0; j < k; ++j) {
      InputRef r;
      r.attribute = static_cast<std::uint32_t>(uniform_index(rng, s.num_attributes()));
      if (s.attributes[r.attribute].kind == AttributeKind::Nominal)
        r.category = static_cast<std::int32_t>(uniform_index(rng, s.attributes[r.attribute].categories.size()));
      in.push_back(r);
    }
    auto i = net.add_input_atom(in, step++);
    net[i].weights.resize(in.size());
    for (auto& w : net[i].weights) w = g(rng);
    net[i].bias = g(rng);
  }
  std::size_t guard = 0;
  while (net.size() < total && guard++ < 100 * total) {
    std::vector<FeatureIndex> pool(net.size());
    for (FeatureIndex i = 0; i < pool.size(); ++i) pool[i] = i;
    auto children = sample_distinct(rng, pool, 2 + uniform_index(rng, 2));
    if (net.find_composite(children)) continue;
    auto i = net.add_composite(children, step++);
    net[i].weights.resize(children.size());
    for (auto& w : net[i].weights) w = g(rng);
    net[i].bias = g(rng);
  }
  randomize_outputs(net, rng, 0.8);
  return net;
}

/// Evaluates one feature from scratch, ignoring every other feature's state.
inline bool brute_match(const FeatureNetwork& net, FeatureIndex i, const Instance& inst) {
  const auto& f = net[i];
  if (f.is_atomic()) return f.predicate->holds(inst.values[f.predicate->attribute]);
  for (auto c : f.children)
    if (!brute_match(net, c, inst)) return false;
  return true;
}

/// Continuous value of one feature by plain recursion.
inline double brute_value(const FeatureNetwork& net, FeatureIndex i, const Instance& inst) {
  const auto& f = net[i];
  double pre = f.bias;
  if (f.is_atomic()) {
    for (std::size_t j = 0; j < f.inputs.size(); ++j) {
      const auto& r = f.inputs[j];
      const double v = inst.values[r.attribute];
      pre += f.weights[j] * (r.category < 0 ? v : (v == r.category ? 1.0 : 0.0));
    }
  } else {
    for (std::size_t j = 0; j < f.children.size(); ++j) pre += f.weights[j] * brute_value(net, f.children[j], inst);
  }
  switch (net.activation_fn()) {
    case ActivationFn::Tanh: return std::tanh(pre);
    case ActivationFn::Relu: return pre > 0 ? pre : 0.0;
    case ActivationFn::Identity: return pre;
  }
  return pre;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - m));
  for (auto& v : e) v /= s;
  return e;
}

/// Loss of `net` on `inst` evaluated by the library's own forward pass.
inline double loss_of(const FeatureNetwork& net, const Instance& inst, int target) {
  return cross_entropy(classify(net, net.continuous() ? forward_continuous(net, inst) : activate_discrete(net, inst)),
                       target);
}

/// Central difference of f at x.
inline double central(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double x0 = x;
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double down = f();
  x = x0;
  return (up - down) / (2 * h);
}

inline bool grad_close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-8) {
  const double diff = std::abs(analytic - numeric);
  return diff <= abs_floor || diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace testutil
