#include "adn/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "adn/error.hpp"

namespace adn {

std::string describe(const Predicate& p, const Schema& schema) {
  const auto& a = schema.attributes.at(p.attribute);
  switch (p.kind) {
    case PredicateKind::Geq: return a.name + " >= " + format_real(p.boundary);
    case PredicateKind::Leq: return a.name + " <= " + format_real(p.boundary);
    case PredicateKind::Equals:
      return a.name + " == " + a.categories.at(static_cast<std::size_t>(p.boundary));
  }
  return {};
}

double apply_activation(ActivationFn fn, double pre) {
  switch (fn) {
    case ActivationFn::Tanh: return std::tanh(pre);
    case ActivationFn::Relu: return pre > 0.0 ? pre : 0.0;
    case ActivationFn::Identity: return pre;
  }
  return pre;
}

double activation_derivative(ActivationFn fn, double pre, double out) {
  switch (fn) {
    case ActivationFn::Tanh: return 1.0 - out * out;
    case ActivationFn::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case ActivationFn::Identity: return 1.0;
  }
  return 1.0;
}

ActivationFn parse_activation(const std::string& name) {
  if (name == "tanh") return ActivationFn::Tanh;
  if (name == "relu") return ActivationFn::Relu;
  if (name == "identity") return ActivationFn::Identity;
  throw ConfigError("unknown activation function '" + name + "'");
}

std::string to_string(ActivationFn fn) {
  switch (fn) {
    case ActivationFn::Tanh: return "tanh";
    case ActivationFn::Relu: return "relu";
    case ActivationFn::Identity: return "identity";
  }
  return "tanh";
}

// --- FeatureNetwork --------------------------------------------------------

FeatureNetwork::FeatureNetwork(Schema schema, OutputFunction output)
    : schema_(std::move(schema)), output_(output) {
  schema_.validate();
  if (output_ == OutputFunction::Logistic && schema_.num_classes() != 2)
    throw ConfigError("a single logistic output needs exactly two classes");
  biases_.assign(num_outputs(), 0.0);
}

std::optional<FeatureIndex> FeatureNetwork::find(FeatureId id) const {
  auto it = std::lower_bound(features_.begin(), features_.end(), id,
                             [](const Feature& f, FeatureId v) { return f.id < v; });
  if (it == features_.end() || it->id != id) return std::nullopt;
  return static_cast<FeatureIndex>(it - features_.begin());
}

FeatureIndex FeatureNetwork::append(Feature f) {
  const auto idx = static_cast<FeatureIndex>(features_.size());
  unsigned depth = 0;
  for (auto c : f.children) {
    if (c >= idx) throw InvariantError("child index does not precede its parent");
    depth = std::max(depth, features_[c].depth + 1);
  }
  f.depth = depth;
  f.parents.clear();
  if (!sparse_ && f.out.empty() && depth >= min_out_depth_) {
    for (std::uint32_t o = 0; o < num_outputs(); ++o) f.out.push_back({o, 0.0, f.creation_step});
  }
  for (auto c : f.children) features_[c].parents.push_back(idx);
  next_id_ = std::max(next_id_, f.id + 1);
  features_.push_back(std::move(f));
  return idx;
}

FeatureIndex FeatureNetwork::add_atom(const Predicate& p, std::uint64_t step) {
  if (p.attribute >= schema_.num_attributes()) throw SchemaMismatch("predicate attribute out of range");
  const auto& a = schema_.attributes[p.attribute];
  if ((p.kind == PredicateKind::Equals) != (a.kind == AttributeKind::Nominal))
    throw SchemaMismatch("predicate kind does not fit attribute '" + a.name + "'");
  Feature f;
  f.id = next_id_;
  f.creation_step = step;
  f.predicate = p;
  return append(std::move(f));
}

FeatureIndex FeatureNetwork::add_input_atom(std::vector<InputRef> inputs, std::uint64_t step) {
  if (inputs.empty()) throw ConfigError("an input atom needs at least one input");
  for (const auto& in : inputs)
    if (in.attribute >= schema_.num_attributes()) throw SchemaMismatch("input attribute out of range");
  Feature f;
  f.id = next_id_;
  f.creation_step = step;
  f.inputs = std::move(inputs);
  f.weights.assign(f.inputs.size(), 0.0);
  return append(std::move(f));
}

FeatureIndex FeatureNetwork::add_composite(std::vector<FeatureIndex> children, std::uint64_t step) {
  if (children.size() < 2) throw ConfigError("a composite needs at least two children");
  std::set<FeatureIndex> distinct(children.begin(), children.end());
  if (distinct.size() != children.size()) throw ConfigError("composite children must be distinct");
  for (auto c : children)
    if (c >= features_.size()) throw InvariantError("composite child does not exist");
  Feature f;
  f.id = next_id_;
  f.creation_step = step;
  f.weights.assign(children.size(), 0.0);
  f.children = std::move(children);
  return append(std::move(f));
}

std::optional<FeatureIndex> FeatureNetwork::find_atom(const Predicate& p) const {
  for (FeatureIndex i = 0; i < features_.size(); ++i)
    if (features_[i].predicate && *features_[i].predicate == p) return i;
  return std::nullopt;
}

std::optional<FeatureIndex> FeatureNetwork::find_composite(std::span<const FeatureIndex> children) const {
  if (children.empty()) return std::nullopt;
  FeatureIndex scan = children[0];
  for (auto c : children)
    if (features_[c].parents.size() < features_[scan].parents.size()) scan = c;
  std::vector<FeatureIndex> want(children.begin(), children.end());
  std::sort(want.begin(), want.end());
  std::vector<FeatureIndex> have;
  for (auto p : features_[scan].parents) {
    const auto& ch = features_[p].children;
    if (ch.size() != want.size()) continue;
    have.assign(ch.begin(), ch.end());
    std::sort(have.begin(), have.end());
    if (have == want) return p;
  }
  return std::nullopt;
}

std::vector<FeatureId> FeatureNetwork::remove(const std::vector<bool>& marked) {
  const std::size_t n = features_.size();
  std::vector<bool> gone(n, false);
  for (std::size_t i = 0; i < n && i < marked.size(); ++i) gone[i] = marked[i];
  // children precede parents, so one ascending sweep closes the cascade
  for (std::size_t i = 0; i < n; ++i) {
    if (gone[i]) continue;
    for (auto c : features_[i].children)
      if (gone[c]) {
        gone[i] = true;
        break;
      }
  }

  std::vector<FeatureId> removed;
  std::vector<FeatureIndex> remap(n, 0);
  std::vector<Feature> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (gone[i]) {
      removed.push_back(features_[i].id);
      continue;
    }
    remap[i] = static_cast<FeatureIndex>(kept.size());
    kept.push_back(std::move(features_[i]));
  }
  if (removed.empty()) {
    features_ = std::move(kept);
    return removed;
  }
  // `gone` is indexed by old position; rebuild links through `remap`.
  for (auto& f : kept) {
    for (auto& c : f.children) c = remap[c];
    std::vector<FeatureIndex> parents;
    for (auto p : f.parents)
      if (!gone[p]) parents.push_back(remap[p]);
    f.parents = std::move(parents);
  }
  features_ = std::move(kept);
  return removed;
}

bool FeatureNetwork::add_link(FeatureIndex fi, std::uint32_t output, std::uint64_t step) {
  auto& f = features_.at(fi);
  if (output >= num_outputs()) throw ConfigError("output index out of range");
  for (const auto& l : f.out)
    if (l.output == output) return false;
  f.out.push_back({output, 0.0, step});
  return true;
}

std::size_t FeatureNetwork::atomic_count() const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [](const Feature& f) { return f.is_atomic(); }));
}

std::size_t FeatureNetwork::link_count() const {
  std::size_t n = 0;
  for (const auto& f : features_) n += f.out.size();
  return n;
}

FeatureIndex FeatureNetwork::restore(Feature f) {
  if (!features_.empty() && f.id <= features_.back().id)
    throw InvariantError("restored features must arrive in increasing id order");
  for (auto c : f.children)
    if (c >= features_.size()) throw InvariantError("restored composite references a missing child");
  return append(std::move(f));
}

void FeatureNetwork::check_invariants() const {
  std::set<std::vector<FeatureIndex>> seen;
  for (FeatureIndex i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (i > 0 && features_[i - 1].id >= f.id) throw InvariantError("feature ids out of order");
    if (f.is_atomic()) {
      if (!f.predicate && f.inputs.empty()) throw InvariantError("atom without predicate or inputs");
      if (f.depth != 0) throw InvariantError("atom with non-zero depth");
      if (f.predicate && f.predicate->attribute >= schema_.num_attributes())
        throw InvariantError("atom references a missing attribute");
    } else {
      if (f.children.size() < 2) throw InvariantError("composite with fewer than two children");
      unsigned depth = 0;
      for (auto c : f.children) {
        if (c >= i) throw InvariantError("child does not precede parent");
        const auto& cp = features_[c].parents;
        if (std::find(cp.begin(), cp.end(), i) == cp.end()) throw InvariantError("missing parent back-link");
        depth = std::max(depth, features_[c].depth + 1);
      }
      if (depth != f.depth) throw InvariantError("stale depth");
      auto key = f.children;
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) throw InvariantError("duplicate composite");
    }
    for (auto p : f.parents) {
      if (p <= i || p >= features_.size()) throw InvariantError("dangling parent reference");
      const auto& pc = features_[p].children;
      if (std::find(pc.begin(), pc.end(), i) == pc.end()) throw InvariantError("parent does not list child");
    }
    std::set<std::uint32_t> outs;
    for (const auto& l : f.out) {
      if (l.output >= num_outputs()) throw InvariantError("link to missing output");
      if (!outs.insert(l.output).second) throw InvariantError("duplicate output link");
    }
  }
}

// --- activation ------------------------------------------------------------

namespace {

void check_instance(const FeatureNetwork& net, const Instance& inst) {
  if (inst.values.size() != net.schema().num_attributes())
    throw SchemaMismatch("instance has " + std::to_string(inst.values.size()) + " attributes, network expects " +
                         std::to_string(net.schema().num_attributes()));
}

double atom_pre(const Feature& f, const Instance& inst) {
  double s = f.bias;
  for (std::size_t i = 0; i < f.inputs.size(); ++i) s += f.weights[i] * f.inputs[i].read(inst);
  return s;
}

}  // namespace

void activate_discrete(const FeatureNetwork& net, const Instance& inst, ActivationState& st) {
  check_instance(net, inst);
  const std::size_t n = net.size();
  st.continuous = false;
  st.active.clear();
  st.matched.assign(n, 0);
  st.values.assign(n, 0.0);
  st.pre.clear();
  st.fired_children.assign(n, 0);

  std::vector<FeatureIndex>& work = st.active;
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    if (!f.is_atomic()) continue;
    bool on;
    if (f.predicate) {
      if (f.predicate->attribute >= inst.values.size()) throw SchemaMismatch("predicate attribute out of range");
      on = f.predicate->holds(inst.values[f.predicate->attribute]);
    } else {
      on = apply_activation(net.activation_fn(), atom_pre(f, inst)) > net.match_threshold();
    }
    if (on) work.push_back(i);
  }
  // Breadth-first over parents of fired features; a composite enters the
  // worklist exactly once, when its last child fires.
  for (std::size_t w = 0; w < work.size(); ++w) {
    const auto i = work[w];
    st.matched[i] = 1;
    st.values[i] = 1.0;
    for (auto p : net[i].parents) {
      if (++st.fired_children[p] == net[p].children.size()) work.push_back(p);
    }
  }
  std::sort(st.active.begin(), st.active.end());
}

ActivationState activate_discrete(const FeatureNetwork& net, const Instance& inst) {
  ActivationState st;
  activate_discrete(net, inst, st);
  return st;
}

ActivationState forward_continuous(const FeatureNetwork& net, const Instance& inst) {
  check_instance(net, inst);
  if (!net.continuous() && !net.empty()) throw ConfigError("network has no continuous parameters");
  const std::size_t n = net.size();
  ActivationState st;
  st.continuous = true;
  st.values.assign(n, 0.0);
  st.pre.assign(n, 0.0);
  st.matched.assign(n, 0);
  const auto fn = net.activation_fn();
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    double pre;
    if (f.is_atomic()) {
      pre = atom_pre(f, inst);
    } else {
      pre = f.bias;
      for (std::size_t c = 0; c < f.children.size(); ++c) pre += f.weights[c] * st.values[f.children[c]];
    }
    st.pre[i] = pre;
    st.values[i] = apply_activation(fn, pre);
    if (st.values[i] > net.match_threshold()) {
      st.matched[i] = 1;
      st.active.push_back(i);
    }
  }
  return st;
}

Prediction classify(const FeatureNetwork& net, const ActivationState& st) {
  Prediction p;
  p.logits = net.biases();
  auto accumulate = [&](FeatureIndex i, double a) {
    for (const auto& l : net[i].out) p.logits[l.output] += l.weight * a;
  };
  if (st.continuous) {
    for (FeatureIndex i = 0; i < net.size(); ++i)
      if (st.values[i] != 0.0) accumulate(i, st.values[i]);
  } else {
    for (auto i : st.active) accumulate(i, 1.0);
  }

  if (net.output_function() == OutputFunction::Logistic) {
    const double z = p.logits[0];
    const double prob = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    p.class_scores = {1.0 - prob, prob};
    p.argmax = prob > 0.5 ? 1 : 0;
    return p;
  }
  const double zmax = *std::max_element(p.logits.begin(), p.logits.end());
  p.class_scores.resize(p.logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < p.logits.size(); ++c) {
    p.class_scores[c] = std::exp(p.logits[c] - zmax);
    sum += p.class_scores[c];
  }
  for (auto& s : p.class_scores) s /= sum;
  p.argmax = static_cast<int>(std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
  return p;
}

std::vector<double> output_deltas(const FeatureNetwork& net, const Prediction& p, int target) {
  if (net.output_function() == OutputFunction::Logistic) return {p.class_scores[1] - (target == 1 ? 1.0 : 0.0)};
  std::vector<double> d(p.class_scores);
  d.at(static_cast<std::size_t>(target)) -= 1.0;
  return d;
}

double cross_entropy(const Prediction& p, int target) {
  return -std::log(std::max(p.class_scores.at(static_cast<std::size_t>(target)), 1e-300));
}

// --- learning --------------------------------------------------------------

void Minibatch::add_bias(std::size_t output, double g) {
  if (bias_.size() <= output) bias_.resize(output + 1, 0.0);
  bias_[output] += g;
}

bool Minibatch::finish_instance(FeatureNetwork& net, double out_rate, double internal_rate) {
  if (++count_ < size_) return false;
  flush(net, out_rate, internal_rate);
  return true;
}

void Minibatch::flush(FeatureNetwork& net, double out_rate, double internal_rate) {
  if (count_ == 0) return;
  const double scale = 1.0 / static_cast<double>(count_);
  for (const auto& [key, g] : out_) {
    auto idx = net.find(key.first);
    if (!idx) continue;  // removed mid-batch
    for (auto& l : net[*idx].out)
      if (l.output == key.second) l.weight -= out_rate * g * scale;
  }
  for (const auto& [key, g] : internal_) {
    auto idx = net.find(key.first);
    if (!idx) continue;
    auto& f = net[*idx];
    if (key.second == kBiasSlot)
      f.bias -= internal_rate * g * scale;
    else if (key.second < f.weights.size())
      f.weights[key.second] -= internal_rate * g * scale;
  }
  for (std::size_t o = 0; o < bias_.size() && o < net.biases().size(); ++o) net.biases()[o] -= out_rate * bias_[o] * scale;
  out_.clear();
  internal_.clear();
  bias_.clear();
  count_ = 0;
}

std::vector<double> output_layer_step(FeatureNetwork& net, const ActivationState& st, const Prediction& pred,
                                      int target, double rate, Minibatch& batch) {
  auto deltas = output_deltas(net, pred, target);
  auto visit = [&](auto&& fn) {
    if (st.continuous) {
      for (FeatureIndex i = 0; i < net.size(); ++i)
        if (st.values[i] != 0.0) fn(i, st.values[i]);
    } else {
      for (auto i : st.active) fn(i, 1.0);
    }
  };
  if (batch.size() == 1) {
    visit([&](FeatureIndex i, double a) {
      for (auto& l : net[i].out) l.weight -= rate * deltas[l.output] * a;
    });
    for (std::size_t o = 0; o < deltas.size(); ++o) net.biases()[o] -= rate * deltas[o];
    return deltas;
  }
  visit([&](FeatureIndex i, double a) {
    for (const auto& l : net[i].out) batch.add_out(net[i].id, l.output, deltas[l.output] * a);
  });
  for (std::size_t o = 0; o < deltas.size(); ++o) batch.add_bias(o, deltas[o]);
  batch.finish_instance(net, rate, 0.0);
  return deltas;
}

double out_weight_norm(const Feature& f, WeightNorm norm) {
  double s = 0.0;
  if (norm == WeightNorm::L1) {
    for (const auto& l : f.out) s += std::abs(l.weight);
    return s;
  }
  for (const auto& l : f.out) s += l.weight * l.weight;
  return std::sqrt(s);
}

std::vector<double> compute_fitness(const FeatureNetwork& net, WeightNorm norm) {
  const std::size_t n = net.size();
  std::vector<double> fit(n, 0.0);
  // parents sit at higher indices, so a descending sweep finalizes them first
  for (std::size_t k = n; k-- > 0;) {
    const auto& f = net[static_cast<FeatureIndex>(k)];
    double v = out_weight_norm(f, norm);
    for (auto p : f.parents) {
      if (p <= k) throw InvariantError("cycle or order violation in feature graph");
      v = std::max(v, fit[p]);
    }
    fit[k] = v;
  }
  return fit;
}

std::vector<std::size_t> depth_histogram(const FeatureNetwork& net) {
  std::vector<std::size_t> h;
  for (const auto& f : net.features()) {
    if (f.is_atomic()) continue;
    if (h.size() <= f.depth) h.resize(f.depth + 1, 0);
    ++h[f.depth];
  }
  return h;
}

}  // namespace adn
