#include "adn/population.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "adn/error.hpp"

namespace adn {

void PopulationConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(creation_prob, "creation_probability");
  prob(incorrect_bias, "incorrect_bias");
  prob(correct_bias, "correct_bias");
  prob(atomic_extra_prob, "atomic_creation_probability");
  prob(sparse_link_prob, "sparse_link_probability");
  if (max_children < 2) throw ConfigError("maximum_children must be at least 2");
  if (removal_interval == 0) throw ConfigError("removal_instances must be positive");
}

std::optional<FeatureIndex> FeatureFactory::create_atom(FeatureNetwork& net, const Instance& inst, Rng& rng,
                                                        std::uint64_t step) const {
  const auto& schema = net.schema();
  const auto attr = static_cast<std::uint32_t>(uniform_index(rng, schema.num_attributes()));
  Predicate p;
  p.attribute = attr;
  p.boundary = inst.values.at(attr);
  if (schema.attributes[attr].kind == AttributeKind::Nominal)
    p.kind = PredicateKind::Equals;
  else
    p.kind = bernoulli(rng, 0.5) ? PredicateKind::Geq : PredicateKind::Leq;
  if (net.find_atom(p)) return std::nullopt;
  return net.add_atom(p, step);
}

std::optional<FeatureIndex> FeatureFactory::create_composite(FeatureNetwork& net,
                                                             const std::vector<FeatureIndex>& children,
                                                             const ActivationState&, Rng&, std::uint64_t step) const {
  return net.add_composite(children, step);
}

bool is_duplicate(const FeatureNetwork& net, std::span<const FeatureIndex> children) {
  return net.find_composite(children).has_value();
}

CreationOutcome maybe_create(FeatureNetwork& net, const ActivationState& state, const Instance& inst, bool was_correct,
                             Rng& rng, std::uint64_t step, const PopulationConfig& cfg, const FeatureFactory& factory,
                             const ChildChooser& chooser) {
  CreationOutcome out;
  const double p = cfg.creation_prob * (was_correct ? cfg.correct_bias : cfg.incorrect_bias);
  if (bernoulli(rng, p)) {
    out.composite_triggered = true;
    if (state.active.size() >= cfg.max_children) {
      auto children = chooser ? chooser(state.active, cfg.max_children, rng)
                              : sample_distinct(rng, state.active, cfg.max_children);
      if (children.size() == cfg.max_children && !is_duplicate(net, children)) {
        if (auto idx = factory.create_composite(net, children, state, rng, step)) out.created.push_back(*idx);
      }
    }
  }
  if (bernoulli(rng, cfg.atomic_extra_prob)) {
    out.atomic_triggered = true;
    if (auto idx = factory.create_atom(net, inst, rng, step)) out.created.push_back(*idx);
  }
  return out;
}

std::vector<FeatureId> trim_population(FeatureNetwork& net, const std::vector<double>& fitness,
                                       const PopulationConfig& cfg, std::uint64_t interval_start,
                                       std::uint64_t now) {
  const std::size_t n = net.size();
  if (fitness.size() != n) throw InvariantError("fitness vector does not match the network");
  std::size_t atoms = net.atomic_count();
  std::size_t composites = n - atoms;
  if (atoms <= cfg.max_atomic && composites <= cfg.max_composite) return {};

  std::vector<bool> marked(n, false);
  std::vector<FeatureIndex> stack;
  auto mark = [&](FeatureIndex root) {
    stack.assign(1, root);
    while (!stack.empty()) {
      auto i = stack.back();
      stack.pop_back();
      if (marked[i]) continue;
      marked[i] = true;
      (net[i].is_atomic() ? atoms : composites) -= 1;
      for (auto p : net[i].parents) stack.push_back(p);
    }
  };
  auto exempt = [&](const Feature& f) { return f.creation_step >= interval_start || f.protected_until > now; };
  auto by_value = [&](FeatureIndex a, FeatureIndex b) {
    return std::tie(fitness[a], net[a].creation_step, net[a].id) < std::tie(fitness[b], net[b].creation_step, net[b].id);
  };

  auto shrink = [&](bool atomic, std::size_t& count, std::size_t cap) {
    for (bool allow_exempt : {false, true}) {
      if (count <= cap) return;
      std::vector<FeatureIndex> candidates;
      for (FeatureIndex i = 0; i < n; ++i) {
        const auto& f = net[i];
        if (marked[i] || f.is_atomic() != atomic || exempt(f) != allow_exempt) continue;
        candidates.push_back(i);
      }
      std::sort(candidates.begin(), candidates.end(), by_value);
      for (auto i : candidates) {
        if (count <= cap) break;
        if (!marked[i]) mark(i);
      }
    }
  };
  shrink(true, atoms, cfg.max_atomic);
  shrink(false, composites, cfg.max_composite);
  return net.remove(marked);
}

std::size_t sparse_link_step(FeatureNetwork& net, const ActivationState& state, std::span<const double> deltas,
                             Rng& rng, std::uint64_t step, const PopulationConfig& cfg) {
  if (cfg.sparse_out_limit == 0) return 0;
  const bool below = net.link_count() < cfg.sparse_out_limit;
  if (!below && !bernoulli(rng, cfg.sparse_link_prob)) return 0;

  std::vector<FeatureIndex> eligible;
  for (auto i : state.active)
    if (net[i].depth >= cfg.min_out_depth) eligible.push_back(i);
  if (eligible.empty()) return 0;
  const auto feature = eligible[uniform_index(rng, eligible.size())];

  std::uint32_t output = 0;
  if (deltas.size() > 1) {
    std::vector<double> w(deltas.size());
    for (std::size_t c = 0; c < deltas.size(); ++c) w[c] = std::abs(deltas[c]);
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) std::fill(w.begin(), w.end(), 1.0);
    output = static_cast<std::uint32_t>(std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng));
  }
  return net.add_link(feature, output, step) ? 1 : 0;
}

std::size_t sparse_link_trim(FeatureNetwork& net, const PopulationConfig& cfg) {
  if (cfg.sparse_out_limit == 0) return 0;
  const std::size_t total = net.link_count();
  if (total <= cfg.sparse_out_limit) return 0;

  struct Ref {
    double magnitude;
    std::uint64_t created;
    FeatureId id;
    std::uint32_t output;
    FeatureIndex feature;
  };
  std::vector<Ref> refs;
  refs.reserve(total);
  for (FeatureIndex i = 0; i < net.size(); ++i)
    for (const auto& l : net[i].out) refs.push_back({std::abs(l.weight), l.created, net[i].id, l.output, i});
  const std::size_t excess = total - cfg.sparse_out_limit;
  std::partial_sort(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(excess), refs.end(),
                    [](const Ref& a, const Ref& b) {
                      return std::tie(a.magnitude, a.created, a.id, a.output) <
                             std::tie(b.magnitude, b.created, b.id, b.output);
                    });
  for (std::size_t r = 0; r < excess; ++r) {
    auto& out = net[refs[r].feature].out;
    const auto o = refs[r].output;
    out.erase(std::remove_if(out.begin(), out.end(), [o](const OutLink& l) { return l.output == o; }), out.end());
  }
  return excess;
}

}  // namespace adn
