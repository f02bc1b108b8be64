#include "adn/model_io.hpp"

#include <fstream>

#include "adn/error.hpp"

namespace adn {

namespace {

const char* op_name(PredicateKind k) {
  switch (k) {
    case PredicateKind::Geq: return ">=";
    case PredicateKind::Leq: return "<=";
    case PredicateKind::Equals: return "==";
  }
  return "?";
}

PredicateKind op_from(const std::string& s) {
  if (s == ">=") return PredicateKind::Geq;
  if (s == "<=") return PredicateKind::Leq;
  if (s == "==") return PredicateKind::Equals;
  throw ConfigError("unknown predicate operator '" + s + "'");
}

}  // namespace

nlohmann::json feature_to_json(const FeatureNetwork& net, FeatureIndex i) {
  const auto& f = net[i];
  nlohmann::json j;
  j["id"] = f.id;
  j["creation_step"] = f.creation_step;
  if (f.is_atomic()) {
    j["kind"] = "atom";
    if (f.predicate)
      j["predicate"] = {{"attribute", f.predicate->attribute},
                        {"op", op_name(f.predicate->kind)},
                        {"boundary", f.predicate->boundary}};
    if (!f.inputs.empty()) {
      auto inputs = nlohmann::json::array();
      for (const auto& in : f.inputs) inputs.push_back({in.attribute, in.category});
      j["inputs"] = inputs;
    }
  } else {
    j["kind"] = "composite";
    auto ids = nlohmann::json::array();
    for (auto c : f.children) ids.push_back(net[c].id);
    j["children"] = ids;
  }
  if (net.continuous()) {
    j["weights"] = f.weights;
    j["bias"] = f.bias;
  }
  if (f.kept) j["kept"] = true;
  if (f.protected_until) j["protected_until"] = f.protected_until;
  return j;
}

Feature feature_from_json(const nlohmann::json& j, const FeatureNetwork& net) {
  Feature f;
  f.id = j.at("id").get<FeatureId>();
  f.creation_step = j.value("creation_step", std::uint64_t{0});
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "atom") {
    if (j.contains("predicate")) {
      const auto& p = j["predicate"];
      f.predicate = Predicate{p.at("attribute").get<std::uint32_t>(), op_from(p.at("op").get<std::string>()),
                              p.at("boundary").get<double>()};
    }
    if (j.contains("inputs"))
      for (const auto& in : j["inputs"]) f.inputs.push_back({in.at(0).get<std::uint32_t>(), in.at(1).get<std::int32_t>()});
    if (!f.predicate && f.inputs.empty()) throw ConfigError("atom record without predicate or inputs");
  } else if (kind == "composite") {
    for (const auto& c : j.at("children")) {
      auto idx = net.find(c.get<FeatureId>());
      if (!idx) throw ConfigError("composite " + std::to_string(f.id) + " references unknown feature");
      f.children.push_back(*idx);
    }
  } else {
    throw ConfigError("unknown feature kind '" + kind + "'");
  }
  if (j.contains("weights"))
    f.weights = j["weights"].get<std::vector<double>>();
  else
    f.weights.assign(f.is_atomic() ? f.inputs.size() : f.children.size(), 0.0);
  if (j.contains("bias")) f.bias = j["bias"].get<double>();
  f.kept = j.value("kept", false);
  f.protected_until = j.value("protected_until", std::uint64_t{0});
  return f;
}

nlohmann::json network_to_json(const FeatureNetwork& net) {
  nlohmann::json j;
  j["schema"] = schema_to_json(net.schema());
  j["output_function"] = net.output_function() == OutputFunction::Logistic ? "logistic" : "softmax";
  j["continuous"] = net.continuous();
  j["activation_function"] = to_string(net.activation_fn());
  j["match_threshold"] = net.match_threshold();
  j["sparse_outputs"] = net.sparse_outputs();
  j["min_out_depth"] = net.min_out_depth();
  j["next_id"] = net.next_id();
  auto features = nlohmann::json::array();
  auto links = nlohmann::json::array();
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    features.push_back(feature_to_json(net, i));
    for (const auto& l : net[i].out) links.push_back({net[i].id, l.output, l.weight, l.created});
  }
  j["features"] = features;
  j["output_weights"] = links;
  j["biases"] = net.biases();
  return j;
}

FeatureNetwork network_from_json(const nlohmann::json& j) {
  try {
    auto schema = schema_from_json(j.at("schema"));
    auto output = j.at("output_function").get<std::string>() == "logistic" ? OutputFunction::Logistic
                                                                           : OutputFunction::Softmax;
    FeatureNetwork net(std::move(schema), output);
    net.set_continuous(j.value("continuous", false));
    net.set_activation_fn(parse_activation(j.value("activation_function", std::string("tanh"))));
    net.set_match_threshold(j.value("match_threshold", 0.5));
    // links come from the triplet list, so restore with sparse semantics
    net.set_sparse_outputs(true);
    net.set_min_out_depth(j.value("min_out_depth", 0u));
    for (const auto& fj : j.at("features")) net.restore(feature_from_json(fj, net));
    for (const auto& l : j.at("output_weights")) {
      auto idx = net.find(l.at(0).get<FeatureId>());
      if (!idx) throw ConfigError("output weight references unknown feature");
      const auto output = l.at(1).get<std::uint32_t>();
      if (output >= net.num_outputs()) throw ConfigError("output weight references unknown output");
      net[*idx].out.push_back({output, l.at(2).get<double>(), l.at(3).get<std::uint64_t>()});
    }
    net.set_sparse_outputs(j.value("sparse_outputs", false));
    net.reserve_ids(j.value("next_id", std::uint64_t{1}));
    auto biases = j.at("biases").get<std::vector<double>>();
    if (biases.size() != net.num_outputs()) throw ConfigError("bias count does not match the output layer");
    net.biases() = biases;
    net.check_invariants();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model: ") + e.what());
  } catch (const InvariantError& e) {
    throw ConfigError(std::string("inconsistent model: ") + e.what());
  }
}

nlohmann::json model_to_json(const TabularModel& model) {
  nlohmann::json j;
  j["format"] = "adn-model";
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "tabular";
  j["network"] = network_to_json(model.network);
  if (model.normalization) j["normalization"] = model.normalization->to_json();
  return j;
}

std::string model_kind(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "adn-model") throw ConfigError("not a model document");
  if (j.value("schema_version", 0) != kModelSchemaVersion) throw ConfigError("unsupported model schema version");
  auto kind = j.value("kind", std::string());
  if (kind != "tabular" && kind != "conv") throw ConfigError("unknown model kind '" + kind + "'");
  return kind;
}

TabularModel model_from_json(const nlohmann::json& j) {
  if (model_kind(j) != "tabular") throw ConfigError("not a tabular model");
  TabularModel m{network_from_json(j.at("network")), std::nullopt};
  if (j.contains("normalization")) m.normalization = NormalizationStats::from_json(j["normalization"]);
  return m;
}

nlohmann::json conv_network_to_json(const ConvNetwork& net) {
  nlohmann::json j;
  j["width"] = net.width();
  j["height"] = net.height();
  j["classes"] = net.num_classes();
  j["activation_function"] = to_string(net.activation_fn());
  j["next_id"] = net.next_id();
  auto features = nlohmann::json::array();
  for (const auto& f : net.features()) {
    nlohmann::json fj;
    fj["id"] = f.id;
    fj["creation_step"] = f.creation_step;
    if (f.is_atomic()) {
      fj["kind"] = "atom";
      fj["patch"] = {f.patch_w, f.patch_h};
    } else {
      fj["kind"] = "composite";
      auto kids = nlohmann::json::array();
      for (const auto& c : f.children) kids.push_back({net[c.index].id, c.dx, c.dy});
      fj["children"] = kids;
      fj["out"] = f.out;
    }
    fj["weights"] = f.weights;
    fj["bias"] = f.bias;
    fj["fitness"] = f.fitness;
    features.push_back(fj);
  }
  j["features"] = features;
  j["biases"] = net.biases();
  return j;
}

ConvNetwork conv_network_from_json(const nlohmann::json& j) {
  try {
    ConvNetwork net(j.at("width").get<int>(), j.at("height").get<int>(), j.at("classes").get<std::size_t>(),
                    parse_activation(j.at("activation_function").get<std::string>()));
    for (const auto& fj : j.at("features")) {
      ConvFeature f;
      f.id = fj.at("id").get<FeatureId>();
      f.creation_step = fj.at("creation_step").get<std::uint64_t>();
      const auto kind = fj.at("kind").get<std::string>();
      if (kind == "atom") {
        f.patch_w = fj.at("patch").at(0).get<int>();
        f.patch_h = fj.at("patch").at(1).get<int>();
      } else if (kind == "composite") {
        for (const auto& c : fj.at("children")) {
          auto idx = net.find(c.at(0).get<FeatureId>());
          if (!idx) throw ConfigError("child references unknown feature");
          f.children.push_back({*idx, c.at(1).get<int>(), c.at(2).get<int>()});
        }
        f.out = fj.at("out").get<std::vector<double>>();
      } else {
        throw ConfigError("unknown feature kind '" + kind + "'");
      }
      f.weights = fj.at("weights").get<std::vector<double>>();
      f.bias = fj.at("bias").get<double>();
      f.fitness = fj.value("fitness", 0.0);
      net.restore(std::move(f));
    }
    net.reserve_ids(j.value("next_id", std::uint64_t{1}));
    auto biases = j.at("biases").get<std::vector<double>>();
    if (biases.size() != net.num_classes()) throw ConfigError("bias count does not match the classes");
    net.biases() = biases;
    net.check_invariants();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model: ") + e.what());
  } catch (const InvariantError& e) {
    throw ConfigError(std::string("inconsistent model: ") + e.what());
  }
}

nlohmann::json model_to_json(const ConvModel& model) {
  nlohmann::json j;
  j["format"] = "adn-model";
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "conv";
  j["network"] = conv_network_to_json(model.network);
  j["scaling"] = model.scaling.to_json();
  return j;
}

ConvModel conv_model_from_json(const nlohmann::json& j) {
  if (model_kind(j) != "conv") throw ConfigError("not a convolutional model");
  try {
    return {conv_network_from_json(j.at("network")), PixelScaling::from_json(j.at("scaling"))};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model: ") + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace adn
