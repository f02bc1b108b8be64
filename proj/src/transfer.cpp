#include "adn/transfer.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "adn/error.hpp"
#include "adn/model_io.hpp"

namespace adn {

nlohmann::json KeptSet::to_json() const {
  nlohmann::json j;
  j["format"] = "adn-kept";
  j["schema_version"] = kModelSchemaVersion;
  j["schema"] = schema_to_json(source_schema);
  if (source_problem) j["source"] = {{"k", source_problem->k}, {"parity_group", source_problem->parity_group}};
  auto arr = nlohmann::json::array();
  for (const auto& r : features) {
    auto f = r.feature;
    f["fitness"] = r.fitness;
    arr.push_back(f);
  }
  j["features"] = arr;
  return j;
}

KeptSet KeptSet::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "adn-kept") throw ConfigError("not a kept-feature document");
  KeptSet k;
  k.source_schema = schema_from_json(j.at("schema"));
  if (j.contains("source"))
    k.source_problem = MultiplexerSpec{j["source"].at("k").get<unsigned>(), j["source"].at("parity_group").get<unsigned>()};
  for (auto f : j.at("features")) {
    double fit = f.value("fitness", 0.0);
    f.erase("fitness");
    k.features.push_back({f, fit});
  }
  if (k.features.empty()) throw ConfigError("kept set is empty");
  return k;
}

void KeptSet::save(const std::filesystem::path& path) const { write_json(to_json(), path); }

KeptSet KeptSet::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

KeptSet extract_kept(const FeatureNetwork& net, const std::vector<double>& fitness, std::size_t top_m,
                     std::optional<MultiplexerSpec> source) {
  if (top_m == 0) throw ConfigError("top_m must be at least 1");
  if (net.empty()) throw ConfigError("cannot extract kept features from an empty population");
  if (fitness.size() != net.size()) throw InvariantError("fitness vector does not match the network");

  std::vector<FeatureIndex> composites;
  for (FeatureIndex i = 0; i < net.size(); ++i)
    if (!net[i].is_atomic()) composites.push_back(i);
  if (composites.empty()) throw ConfigError("population has no composite features to keep");
  std::sort(composites.begin(), composites.end(), [&](FeatureIndex a, FeatureIndex b) {
    return std::make_tuple(-fitness[a], net[a].creation_step, net[a].id) <
           std::make_tuple(-fitness[b], net[b].creation_step, net[b].id);
  });
  if (composites.size() > top_m) composites.resize(top_m);

  std::vector<bool> keep(net.size(), false);
  for (auto c : composites) keep[c] = true;
  for (std::size_t k = net.size(); k-- > 0;)
    if (keep[k])
      for (auto ch : net[static_cast<FeatureIndex>(k)].children) keep[ch] = true;

  KeptSet out;
  out.source_schema = net.schema();
  out.source_problem = source;
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    if (!keep[i]) continue;
    auto j = feature_to_json(net, i);
    j.erase("kept");
    j.erase("protected_until");
    out.features.push_back({j, fitness[i]});
  }
  return out;
}

std::vector<std::uint32_t> identity_attribute_map(std::size_t n) {
  std::vector<std::uint32_t> m(n);
  std::iota(m.begin(), m.end(), 0u);
  return m;
}

std::vector<FeatureIndex> inject_kept(FeatureNetwork& target, const KeptSet& kept,
                                      const std::vector<std::uint32_t>& attribute_map, std::uint64_t step,
                                      std::uint64_t protect_until) {
  auto map_attr = [&](std::uint32_t a) {
    if (a >= attribute_map.size()) throw ConfigError("kept feature uses unmapped attribute " + std::to_string(a));
    const auto t = attribute_map[a];
    if (t >= target.schema().num_attributes())
      throw ConfigError("attribute map sends " + std::to_string(a) + " outside the target schema");
    return t;
  };
  {
    auto sorted = attribute_map;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("attribute map must be injective");
  }

  std::vector<std::pair<FeatureId, FeatureIndex>> placed;  // source id -> target id (resolved later)
  std::vector<FeatureId> target_ids;
  auto resolve = [&](FeatureId src) -> FeatureIndex {
    for (std::size_t k = 0; k < placed.size(); ++k)
      if (placed[k].first == src) return *target.find(target_ids[k]);
    throw ConfigError("kept set is not child-closed");
  };

  for (const auto& rec : kept.features) {
    const auto& j = rec.feature;
    const auto src_id = j.at("id").get<FeatureId>();
    FeatureIndex idx;
    if (j.at("kind") == "atom") {
      if (j.contains("predicate")) {
        const auto& p = j["predicate"];
        Predicate pr;
        pr.attribute = map_attr(p.at("attribute").get<std::uint32_t>());
        const auto op = p.at("op").get<std::string>();
        pr.kind = op == ">=" ? PredicateKind::Geq : op == "<=" ? PredicateKind::Leq : PredicateKind::Equals;
        pr.boundary = p.at("boundary").get<double>();
        auto existing = target.find_atom(pr);
        idx = existing ? *existing : target.add_atom(pr, step);
      } else {
        std::vector<InputRef> inputs;
        for (const auto& in : j.at("inputs")) inputs.push_back({map_attr(in.at(0).get<std::uint32_t>()), in.at(1).get<std::int32_t>()});
        idx = target.add_input_atom(std::move(inputs), step);
      }
    } else {
      std::vector<FeatureIndex> children;
      for (const auto& c : j.at("children")) children.push_back(resolve(c.get<FeatureId>()));
      auto existing = target.find_composite(children);
      idx = existing ? *existing : target.add_composite(children, step);
    }
    auto& f = target[idx];
    if (target.continuous() && j.contains("weights") && f.creation_step == step) {
      f.weights = j["weights"].get<std::vector<double>>();
      f.bias = j.value("bias", 0.0);
    }
    f.kept = true;
    f.protected_until = std::max(f.protected_until, protect_until);
    placed.emplace_back(src_id, idx);
    target_ids.push_back(f.id);
  }

  std::vector<FeatureIndex> out;
  for (auto id : target_ids) out.push_back(*target.find(id));
  return out;
}

BiasedChoice biased_child_choice(const FeatureNetwork& net, const std::vector<FeatureIndex>& active,
                                 std::size_t count, Rng& rng, double kept_prob) {
  BiasedChoice out;
  std::vector<FeatureIndex> all = active;
  std::vector<FeatureIndex> kept;
  for (auto i : active)
    if (net[i].kept) kept.push_back(i);

  auto take = [&](std::vector<FeatureIndex>& pool) {
    const auto k = uniform_index(rng, pool.size());
    const auto chosen = pool[k];
    out.children.push_back(chosen);
    auto drop = [chosen](std::vector<FeatureIndex>& v) { v.erase(std::remove(v.begin(), v.end(), chosen), v.end()); };
    drop(all);
    drop(kept);
  };
  for (std::size_t slot = 0; slot < count; ++slot) {
    if (all.empty()) break;
    const bool want_kept = bernoulli(rng, kept_prob);
    if (want_kept && !kept.empty()) {
      ++out.from_kept_pool;
      take(kept);
    } else {
      take(all);
    }
  }
  return out;
}

}  // namespace adn
