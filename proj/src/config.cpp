#include "adn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "adn/error.hpp"

namespace adn {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, e] : names)
    if (n == v) return e;
  std::string all;
  for (const auto& [n, e] : names) all += (all.empty() ? "" : ", ") + n;
  throw ConfigError(key + ": expected one of " + all + ", got '" + v + "'");
}

template <typename E>
std::string from_enum(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, x] : names)
    if (x == e) return n;
  return {};
}

const std::vector<std::pair<std::string, DataSource>> kSources{
    {"file", DataSource::File}, {"mux", DataSource::Multiplexer}, {"shapes", DataSource::Shapes},
    {"idx", DataSource::Idx},   {"pixels", DataSource::PixelCsv}};
const std::vector<std::pair<std::string, TrainingModeKind>> kModes{
    {"discrete", TrainingModeKind::Discrete},
    {"continuous", TrainingModeKind::ContinuousFull},
    {"staged", TrainingModeKind::Staged}};
const std::vector<std::pair<std::string, ContinuousInit>> kInits{{"soft_logic", ContinuousInit::SoftLogic},
                                                                 {"random", ContinuousInit::Random}};
const std::vector<std::pair<std::string, OutputFunction>> kOutputs{{"softmax", OutputFunction::Softmax},
                                                                   {"logistic", OutputFunction::Logistic}};
const std::vector<std::pair<std::string, WeightNorm>> kNorms{{"l1", WeightNorm::L1}, {"l2", WeightNorm::L2}};
const std::vector<std::pair<std::string, Topology>> kTopologies{{"guided", Topology::Guided},
                                                                {"random", Topology::Random}};
const std::vector<std::pair<std::string, ConvSelection>> kSelections{
    {"reinforcement", ConvSelection::Reinforcement}, {"output_weight", ConvSelection::OutputWeight}};

struct Entry {
  ConfigKey key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string num(double v) { return format_real(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

#define ADN_REAL(NAME, FIELD, HELP)                                                            \
  Entry {                                                                                      \
    {NAME, HELP}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_real(NAME, v); }, \
        [](const ExperimentConfig& c) { return num(static_cast<double>(c.FIELD)); }            \
  }
#define ADN_COUNT(NAME, FIELD, HELP)                                                                    \
  Entry {                                                                                               \
    {NAME, HELP},                                                                                       \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = static_cast<decltype(c.FIELD)>(to_count(NAME, v)); }, \
        [](const ExperimentConfig& c) { return num(static_cast<std::uint64_t>(c.FIELD)); }              \
  }
#define ADN_TEXT(NAME, FIELD, HELP)                                                       \
  Entry {                                                                                 \
    {NAME, HELP}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = v; },         \
        [](const ExperimentConfig& c) { return c.FIELD; }                                 \
  }
#define ADN_ENUM(NAME, FIELD, TABLE, HELP)                                                         \
  Entry {                                                                                          \
    {NAME, HELP}, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_enum(NAME, v, TABLE); }, \
        [](const ExperimentConfig& c) { return from_enum(c.FIELD, TABLE); }                        \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      // main hyper-parameters
      ADN_COUNT("atomic_features", trainer.population.max_atomic, "max size of the atomic population (500)"),
      ADN_COUNT("composite_features", trainer.population.max_composite, "max size of the composite population (1000)"),
      ADN_REAL("learning_rate", trainer.learning_rate, "output-layer and gradient step size (0.01)"),
      ADN_REAL("creation_probability", trainer.population.creation_prob, "per-instance composite creation (0.1)"),
      ADN_COUNT("removal_instances", trainer.population.removal_interval, "instances between trims (100)"),
      ADN_COUNT("maximum_children", trainer.population.max_children, "children per new composite (2)"),
      // optional methods
      ADN_COUNT("mini_batch_size", trainer.minibatch, "instances averaged per update (1)"),
      ADN_COUNT("sparse_out_weight_limit", trainer.population.sparse_out_limit, "max feature-class links, 0 = dense"),
      ADN_COUNT("min_out_weight_depth", trainer.population.min_out_depth, "min depth for feature-class links (0)"),
      // gradient descent
      ADN_REAL("match_threshold", trainer.match_threshold, "activation counted as matching (0.5)"),
      ADN_ENUM("activation_function", trainer.activation,
               (std::vector<std::pair<std::string, ActivationFn>>{{"tanh", ActivationFn::Tanh}, {"relu", ActivationFn::Relu}}),
               "tanh or relu (tanh)"),
      ADN_REAL("activation_buffer", trainer.activation_buffer, "soft-logic margin around a boundary (0.1)"),
      // population details
      ADN_REAL("incorrect_bias", trainer.population.incorrect_bias, "creation multiplier after a miss (0.75)"),
      ADN_REAL("correct_bias", trainer.population.correct_bias, "creation multiplier after a hit (0.25)"),
      ADN_REAL("atomic_creation_probability", trainer.population.atomic_extra_prob, "extra atom creation (0.1)"),
      ADN_REAL("sparse_link_probability", trainer.population.sparse_link_prob, "link creation at the cap (0.1)"),
      // training modes
      ADN_ENUM("training_mode", trainer.mode.kind, kModes, "discrete, continuous or staged (discrete)"),
      ADN_COUNT("discrete_instances", trainer.mode.discrete_instances, "staged: discrete phase length"),
      ADN_COUNT("finetune_instances", trainer.mode.finetune_instances, "staged: continuous phase length"),
      Entry{{"population_in_finetune", "staged: keep creating and trimming while fine-tuning (false)"},
            [](ExperimentConfig& c, const std::string& v) {
              c.trainer.mode.population_in_finetune = to_bool("population_in_finetune", v);
            },
            [](const ExperimentConfig& c) { return std::string(c.trainer.mode.population_in_finetune ? "true" : "false"); }},
      Entry{{"internal_learning_rate", "gradient step for internal weights, default follows learning_rate"},
            [](ExperimentConfig& c, const std::string& v) {
              c.trainer.internal_learning_rate = v == "follow" ? -1.0 : to_real("internal_learning_rate", v);
            },
            [](const ExperimentConfig& c) {
              return c.trainer.internal_learning_rate < 0 ? std::string("follow") : num(c.trainer.internal_learning_rate);
            }},
      ADN_ENUM("continuous_init", trainer.continuous_init, kInits, "soft_logic or random (soft_logic)"),
      ADN_REAL("random_init_stddev", trainer.random_init.init_stddev, "random init weight spread (0.1)"),
      ADN_COUNT("random_init_steps", trainer.random_init.max_steps, "max ascent steps for random init (1000)"),
      ADN_REAL("random_init_rate", trainer.random_init.rate, "ascent step size for random init (0.1)"),
      ADN_COUNT("random_atom_inputs", trainer.random_atom_inputs, "inputs per random-init atom (1)"),
      ADN_ENUM("output_function", trainer.output, kOutputs, "softmax or logistic (softmax)"),
      ADN_ENUM("fitness_norm", trainer.fitness_norm, kNorms, "l1 or l2 norm of output weights (l1)"),
      // schedule and budget
      ADN_TEXT("schedule", schedule, "constant, constant:<rate> or exp:<initial>:<factor>"),
      ADN_COUNT("epochs", epochs, "max epochs (100)"),
      ADN_COUNT("epoch_instances", epoch_instances, "instances per epoch, 0 = natural size"),
      ADN_COUNT("max_instances", max_instances, "training budget, 0 = epochs only"),
      Entry{{"stop_accuracy", "stop once test accuracy reaches this, 'none' to disable"},
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "none")
                c.stop_accuracy.reset();
              else
                c.stop_accuracy = to_real("stop_accuracy", v);
            },
            [](const ExperimentConfig& c) { return c.stop_accuracy ? num(*c.stop_accuracy) : std::string("none"); }},
      Entry{{"seed", "run seed (required)"},
            [](ExperimentConfig& c, const std::string& v) { c.seed = to_count("seed", v); },
            [](const ExperimentConfig& c) { return c.seed ? num(*c.seed) : std::string(); }},
      ADN_COUNT("folds", folds, "cross-validation folds (10)"),
      ADN_COUNT("threads", threads, "parallel folds, 0 = all cores"),
      ADN_COUNT("top_m", top_m, "transfer: composites kept from the source (20)"),
      ADN_REAL("kept_probability", trainer.kept_prob, "transfer: per-slot chance of a kept child (0.5)"),
      // data
      ADN_ENUM("source", source, kSources, "file, mux, shapes, idx or pixels (file)"),
      ADN_TEXT("data", data, "training CSV, IDX images or pixel CSV"),
      ADN_TEXT("labels", labels, "IDX training labels"),
      ADN_TEXT("schema", schema, "schema JSON for CSV data"),
      ADN_TEXT("test_data", test_data, "held-out CSV, IDX images or pixel CSV"),
      ADN_TEXT("test_labels", test_labels, "IDX test labels"),
      ADN_TEXT("normalization", normalization, "minmax, zscore or none (minmax)"),
      ADN_COUNT("mux_k", mux_k, "multiplexer address bits (2)"),
      ADN_COUNT("parity_group", parity_group, "raw bits per multiplexer line, odd (1)"),
      ADN_COUNT("test_samples", test_samples, "generator test size, 0 = enumerate up to 20 bits else 10000"),
      ADN_COUNT("image_limit", image_limit, "keep only the first n images, 0 = all"),
      ADN_COUNT("shapes_train", shapes_train, "synthetic shapes training images (4000)"),
      ADN_COUNT("shapes_test", shapes_test, "synthetic shapes test images (1000)"),
      ADN_REAL("shapes_noise", shapes_noise, "synthetic shapes pixel noise (0.1)"),
      // convolutional mode
      ADN_REAL("conv_norm_k", conv.create.norm_k, "sum of squared weights at creation (1.0)"),
      ADN_REAL("conv_epsilon", conv.create.epsilon, "composite bias margin (0.1)"),
      ADN_REAL("conv_alpha", conv.alpha, "reinforcement rate (0.1)"),
      ADN_REAL("conv_initial_fitness", conv.initial_fitness, "fitness of a new feature (0)"),
      Entry{{"conv_patch_sizes", "comma-separated square patch sizes (3,5,7)"},
            [](ExperimentConfig& c, const std::string& v) {
              c.conv.create.patch_sizes.clear();
              std::stringstream ss(v);
              for (std::string p; std::getline(ss, p, ',');)
                c.conv.create.patch_sizes.push_back(static_cast<int>(to_count("conv_patch_sizes", trim(p))));
            },
            [](const ExperimentConfig& c) {
              std::string s;
              for (int p : c.conv.create.patch_sizes) s += (s.empty() ? "" : ",") + std::to_string(p);
              return s;
            }},
      ADN_ENUM("conv_topology", conv.topology, kTopologies, "guided or random (guided)"),
      ADN_ENUM("conv_selection", conv.selection, kSelections, "reinforcement or output_weight (reinforcement)"),
      ADN_COUNT("coarse_instances", conv.coarse_instances, "conv: topology growth phase, 0 = whole run"),
  };
  return table;
}

#undef ADN_REAL
#undef ADN_COUNT
#undef ADN_TEXT
#undef ADN_ENUM

const Entry& entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key.name == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw ConfigError("seed is required");
  return *seed;
}

void ExperimentConfig::validate() const {
  require_seed();
  if (normalization != "minmax" && normalization != "zscore" && normalization != "none")
    throw ConfigError("normalization must be minmax, zscore or none");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (stop_accuracy && !(*stop_accuracy > 0.0 && *stop_accuracy <= 1.0))
    throw ConfigError("stop_accuracy must lie in (0, 1]");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (top_m == 0) throw ConfigError("top_m must be at least 1");
  if (source == DataSource::Multiplexer) MultiplexerSpec{mux_k, parity_group}.validate();
  Schedule::parse(schedule, trainer.learning_rate);
  if (images()) {
    conv.validate();
  } else {
    trainer.validate();
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  entry(key).set(cfg, trim(value));
  // The conv engine shares the population keys.
  const auto& p = cfg.trainer.population;
  cfg.conv.population = p;
  cfg.conv.learning_rate = cfg.trainer.learning_rate;
  cfg.conv.internal_learning_rate = cfg.trainer.internal_learning_rate;
  cfg.conv.create.threshold = cfg.trainer.match_threshold;
  if (key == "activation_function") cfg.conv.activation = cfg.trainer.activation;
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) { return entry(key).get(cfg); }

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    try {
      entry(key);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!out.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return out;
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& values) {
  // Keys are applied in table order so derived fields settle the same way
  // regardless of how the values were collected.
  for (const auto& e : entries())
    if (auto it = values.find(e.key.name); it != values.end()) set_config_value(cfg, it->first, it->second);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  apply_config(cfg, parse_config_text(ss.str()));
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : entries()) j[e.key.name] = e.get(cfg);
  return j;
}

}  // namespace adn
