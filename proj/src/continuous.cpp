#include "adn/continuous.hpp"

#include <cmath>

#include "adn/error.hpp"

namespace adn {

namespace {

Gradients gradients_from(const FeatureNetwork& net, const Instance& inst, int target, const ActivationState& st,
                         const Prediction& pred) {
  const auto deltas = output_deltas(net, pred, target);
  const std::size_t n = net.size();

  Gradients g;
  g.loss = cross_entropy(pred, target);
  g.class_bias = deltas;
  g.out.resize(n);
  g.weights.resize(n);
  g.bias.assign(n, 0.0);

  std::vector<double> grad_act(n, 0.0);
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    g.out[i].resize(f.out.size());
    for (std::size_t k = 0; k < f.out.size(); ++k) {
      g.out[i][k] = deltas[f.out[k].output] * st.values[i];
      grad_act[i] += f.out[k].weight * deltas[f.out[k].output];
    }
  }
  const auto fn = net.activation_fn();
  for (std::size_t k = n; k-- > 0;) {
    const auto i = static_cast<FeatureIndex>(k);
    const auto& f = net[i];
    const double dpre = grad_act[i] * activation_derivative(fn, st.pre[i], st.values[i]);
    g.bias[i] = dpre;
    g.weights[i].resize(f.weights.size());
    if (f.is_atomic()) {
      for (std::size_t j = 0; j < f.inputs.size(); ++j) g.weights[i][j] = dpre * f.inputs[j].read(inst);
    } else {
      for (std::size_t j = 0; j < f.children.size(); ++j) {
        const auto c = f.children[j];
        g.weights[i][j] = dpre * st.values[c];
        grad_act[c] += dpre * f.weights[j];
      }
    }
  }
  return g;
}

}  // namespace

Gradients compute_gradients(const FeatureNetwork& net, const Instance& inst, int target) {
  const auto st = forward_continuous(net, inst);
  return gradients_from(net, inst, target, st, classify(net, st));
}

StepResult backprop_full(FeatureNetwork& net, const Instance& inst, int target, const Rates& rates, Minibatch& batch,
                         bool selective) {
  if (selective && rates.internal > 0.0)
    throw ConfigError("internal gradient descent over a selective activation pass is not supported");
  if (rates.internal < 0.0 || rates.output < 0.0) throw ConfigError("learning rates must be non-negative");

  StepResult r;
  r.state = forward_continuous(net, inst);
  r.prediction = classify(net, r.state);
  r.deltas = output_deltas(net, r.prediction, target);
  r.loss = cross_entropy(r.prediction, target);

  const auto g = gradients_from(net, inst, target, r.state, r.prediction);
  const bool internal = rates.internal > 0.0;
  if (batch.size() == 1) {
    for (FeatureIndex i = 0; i < net.size(); ++i) {
      auto& f = net[i];
      for (std::size_t k = 0; k < f.out.size(); ++k) f.out[k].weight -= rates.output * g.out[i][k];
      if (!internal) continue;
      for (std::size_t j = 0; j < f.weights.size(); ++j) f.weights[j] -= rates.internal * g.weights[i][j];
      f.bias -= rates.internal * g.bias[i];
    }
    for (std::size_t o = 0; o < g.class_bias.size(); ++o) net.biases()[o] -= rates.output * g.class_bias[o];
    return r;
  }
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    const auto& f = net[i];
    for (std::size_t k = 0; k < f.out.size(); ++k) batch.add_out(f.id, f.out[k].output, g.out[i][k]);
    if (!internal) continue;
    for (std::size_t j = 0; j < f.weights.size(); ++j)
      batch.add_weight(f.id, static_cast<std::uint32_t>(j), g.weights[i][j]);
    batch.add_weight(f.id, Minibatch::kBiasSlot, g.bias[i]);
  }
  for (std::size_t o = 0; o < g.class_bias.size(); ++o) batch.add_bias(o, g.class_bias[o]);
  batch.finish_instance(net, rates.output, rates.internal);
  return r;
}

RandomInit init_random_feature(std::span<const double> inputs, const RandomInitOptions& opt, Rng& rng) {
  if (inputs.empty()) throw ConfigError("random init needs at least one input");
  if (opt.fn == ActivationFn::Tanh && !(opt.threshold > -1.0 && opt.threshold < 1.0))
    throw ConfigError("match threshold must lie in (-1, 1) for tanh units");
  std::normal_distribution<double> normal(0.0, opt.init_stddev);
  RandomInit r;
  r.weights.resize(inputs.size());
  for (auto& w : r.weights) w = normal(rng);
  r.bias = normal(rng);

  for (r.steps = 0;; ++r.steps) {
    double pre = r.bias;
    for (std::size_t i = 0; i < inputs.size(); ++i) pre += r.weights[i] * inputs[i];
    const double out = apply_activation(opt.fn, pre);
    if (out > opt.threshold) return r;
    if (r.steps == opt.max_steps) break;
    // ascend the unit's own activation; a flat ReLU falls back to the pre-activation slope
    double slope = activation_derivative(opt.fn, pre, out);
    if (slope == 0.0) slope = 1.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) r.weights[i] += opt.rate * slope * inputs[i];
    r.bias += opt.rate * slope;
  }
  throw InitFailure("random feature did not reach the match threshold within " + std::to_string(opt.max_steps) +
                    " steps");
}

std::optional<FeatureIndex> SoftLogicFactory::create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                                          std::uint64_t step) const {
  auto idx = FeatureFactory::create_atom(net, inst, rng, step);
  if (idx) init_soft_atom(net, *idx, threshold_, buffer_);
  return idx;
}

std::optional<FeatureIndex> SoftLogicFactory::create_composite(FeatureNetwork& net,
                                                               const std::vector<FeatureIndex>& children,
                                                               const ActivationState& state, Rng&,
                                                               std::uint64_t step) const {
  std::vector<double> a;
  for (auto c : children) a.push_back(state.values.at(c));
  SoftParams p;
  try {
    p = init_soft_composite(a, threshold_);
  } catch (const InitFailure&) {
    return std::nullopt;
  }
  auto idx = net.add_composite(children, step);
  net[idx].weights = p.weights;
  net[idx].bias = p.bias;
  return idx;
}

std::optional<FeatureIndex> RandomInitFactory::create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                                           std::uint64_t step) const {
  const auto& schema = net.schema();
  std::vector<InputRef> refs;
  std::vector<double> values;
  for (std::size_t k = 0; k < atom_inputs_; ++k) {
    const auto attr = static_cast<std::uint32_t>(uniform_index(rng, schema.num_attributes()));
    InputRef ref{attr, -1};
    if (schema.attributes[attr].kind == AttributeKind::Nominal)
      ref.category = static_cast<std::int32_t>(inst.values.at(attr));
    refs.push_back(ref);
    values.push_back(ref.read(inst));
  }
  RandomInit init;
  try {
    init = init_random_feature(values, opt_, init_rng_ ? *init_rng_ : rng);
  } catch (const InitFailure&) {
    return std::nullopt;
  }
  auto idx = net.add_input_atom(std::move(refs), step);
  net[idx].weights = init.weights;
  net[idx].bias = init.bias;
  return idx;
}

std::optional<FeatureIndex> RandomInitFactory::create_composite(FeatureNetwork& net,
                                                                const std::vector<FeatureIndex>& children,
                                                                const ActivationState& state, Rng& rng,
                                                                std::uint64_t step) const {
  std::vector<double> a;
  for (auto c : children) a.push_back(state.values.at(c));
  RandomInit init;
  try {
    init = init_random_feature(a, opt_, init_rng_ ? *init_rng_ : rng);
  } catch (const InitFailure&) {
    return std::nullopt;
  }
  auto idx = net.add_composite(children, step);
  net[idx].weights = init.weights;
  net[idx].bias = init.bias;
  return idx;
}

}  // namespace adn
