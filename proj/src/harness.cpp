#include "adn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "adn/error.hpp"
#include "adn/model_io.hpp"
#include "adn/transfer.hpp"

namespace adn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Seeds for data that is not drawn by the trainer itself.
std::uint64_t data_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ splitmix64(salt)); }
constexpr std::uint64_t kTestSalt = 0x74657374;
constexpr std::uint64_t kTrainSalt = 0x747261696e;

struct TabularData {
  Schema schema;
  std::optional<MultiplexerSpec> spec;
  Dataset train;  // empty for generators
  Dataset test;
  std::string test_source;
  std::optional<NormalizationStats> normalization;
};

Normalization normalization_kind(const std::string& s) {
  return s == "zscore" ? Normalization::ZScore : Normalization::MinMax01;
}

Dataset generator_test_set(const MultiplexerSpec& spec, const ExperimentConfig& cfg, std::string* source) {
  if (cfg.test_samples == 0 && spec.parity_group == 1 && spec.logical_bits() <= 20) {
    if (source) *source = "enumeration";
    return enumerate_multiplexer(spec);
  }
  Rng rng(data_seed(cfg.require_seed(), kTestSalt));
  const std::size_t n = cfg.test_samples ? cfg.test_samples : 10000;
  if (source) *source = "samples:" + std::to_string(n);
  return sample_multiplexer(spec, rng, n);
}

TabularData prepare_tabular(const ExperimentConfig& cfg) {
  TabularData d;
  if (cfg.source == DataSource::Multiplexer) {
    d.spec = MultiplexerSpec{cfg.mux_k, cfg.parity_group};
    d.spec->validate();
    d.schema = multiplexer_schema(*d.spec);
    d.test = generator_test_set(*d.spec, cfg, &d.test_source);
    return d;
  }
  if (cfg.source != DataSource::File) throw ConfigError("image sources need the convolutional trainer");
  if (cfg.data.empty() || cfg.schema.empty()) throw ConfigError("file data needs both data and schema");
  d.schema = load_schema(cfg.schema);
  d.train = load_csv(cfg.data, d.schema);
  if (!cfg.test_data.empty()) {
    d.test = load_csv(cfg.test_data, d.schema);
    d.test_source = "test_data";
  } else {
    d.test = d.train;
    d.test_source = "training data";
  }
  if (cfg.normalization != "none") {
    d.normalization = fit_normalization(d.train, normalization_kind(cfg.normalization));
    d.normalization->apply(d.train);
    d.normalization->apply(d.test);
  }
  return d;
}

struct Budget {
  Schedule schedule;
  RunOptions options;
};

Budget make_budget(const ExperimentConfig& cfg, std::size_t natural_epoch) {
  Budget b;
  b.schedule = Schedule::parse(cfg.schedule, cfg.trainer.learning_rate);
  b.options.epochs = cfg.epochs;
  b.options.epoch_instances = cfg.epoch_instances ? cfg.epoch_instances : (natural_epoch ? natural_epoch : 10000);
  b.options.schedule = b.schedule;
  b.options.stop_accuracy = cfg.stop_accuracy;
  b.options.max_instances = cfg.max_instances;
  return b;
}

nlohmann::json histogram_json(const std::vector<std::size_t>& h) {
  auto j = nlohmann::json::object();
  for (std::size_t d = 0; d < h.size(); ++d)
    if (h[d]) j[std::to_string(d)] = h[d];
  return j;
}

struct TabularRun {
  FeatureNetwork net;
  RunResult result;
  Evaluation final_eval;
  double seconds = 0.0;
};

TabularRun run_tabular(const ExperimentConfig& cfg, TabularData& data, std::uint64_t seed,
                       const KeptSet* kept = nullptr) {
  const auto t0 = Clock::now();
  auto tc = cfg.trainer;
  const auto budget = make_budget(cfg, data.spec ? 0 : data.train.size());
  tc.learning_rate = budget.schedule.initial;

  TabularRun run{make_network(data.schema, tc), {}, {}, 0.0};
  if (kept) {
    if (kept->source_schema.num_attributes() > data.schema.num_attributes())
      throw ConfigError("source problem has more attributes than the target");
    for (std::size_t a = 0; a < kept->source_schema.num_attributes(); ++a)
      if (!(kept->source_schema.attributes[a].kind == data.schema.attributes[a].kind &&
            kept->source_schema.attributes[a].categories == data.schema.attributes[a].categories))
        throw ConfigError("source attribute " + kept->source_schema.attributes[a].name +
                          " is incompatible with the target");
    inject_kept(run.net, *kept, identity_attribute_map(kept->source_schema.num_attributes()), 0,
                tc.population.removal_interval);
  }
  Trainer trainer(run.net, tc, seed);
  trainer.enable_kept_bias(kept != nullptr);

  std::unique_ptr<InstanceStream> stream;
  if (data.spec)
    stream = std::make_unique<MultiplexerStream>(*data.spec);
  else
    stream = std::make_unique<DatasetStream>(data.train);
  run.result = run_training(trainer, *stream, budget.options,
                            [&](const FeatureNetwork& n) { return evaluate(n, data.test).accuracy; });
  run.final_eval = evaluate(run.net, data.test);
  run.seconds = seconds_since(t0);
  return run;
}

nlohmann::json tabular_report(const std::string& command, const ExperimentConfig& cfg, const TabularData& data,
                              const TabularRun& run) {
  nlohmann::json r;
  r["command"] = command;
  r["config"] = config_to_json(cfg);
  nlohmann::json fin;
  fin["test_accuracy"] = run.final_eval.accuracy;
  fin["train_accuracy"] = run.result.curve.empty() ? 0.0 : run.result.curve.back().train_acc;
  fin["instances"] = run.result.instances;
  fin["epochs"] = run.result.curve.size();
  fin["solved_at"] = run.result.solved_at ? nlohmann::json(*run.result.solved_at) : nlohmann::json(nullptr);
  fin["test_source"] = data.test_source;
  fin["test_size"] = data.test.size();
  r["final"] = fin;
  r["confusion"] = run.final_eval.confusion;
  r["classes"] = data.schema.classes;
  r["depth_histogram"] = histogram_json(depth_histogram(run.net));
  r["population"] = {{"atomic", run.net.atomic_count()},
                     {"composite", run.net.composite_count()},
                     {"output_links", run.net.link_count()}};
  r["wall_clock_seconds"] = run.seconds;
  return r;
}

// --- convolutional runs -----------------------------------------------------

struct ImageData {
  ImageSet train, test;
  std::string test_source;
  PixelScaling scaling;
};

ImageSet load_images(const ExperimentConfig& cfg, const std::string& data, const std::string& labels) {
  if (cfg.source == DataSource::Idx) {
    if (data.empty() || labels.empty()) throw ConfigError("IDX data needs images and labels files");
    return load_idx(data, labels, cfg.image_limit);
  }
  if (data.empty()) throw ConfigError("pixel data needs a file");
  auto set = load_pixel_csv(data);
  if (cfg.image_limit && set.images.size() > cfg.image_limit) set.images.resize(cfg.image_limit);
  return set;
}

ImageData prepare_images(const ExperimentConfig& cfg) {
  ImageData d;
  const auto seed = cfg.require_seed();
  if (cfg.source == DataSource::Shapes) {
    d.train = make_shapes(cfg.shapes_train, data_seed(seed, kTrainSalt), cfg.shapes_noise);
    d.test = make_shapes(cfg.shapes_test, data_seed(seed, kTestSalt), cfg.shapes_noise);
    d.test_source = "shapes";
  } else {
    d.train = load_images(cfg, cfg.data, cfg.labels);
    if (!cfg.test_data.empty()) {
      d.test = load_images(cfg, cfg.test_data, cfg.test_labels);
      d.test_source = "test_data";
    } else {
      d.test = d.train;
      d.test_source = "training data";
    }
  }
  if (d.train.images.empty()) throw ConfigError("no training images");
  if (d.test.width != d.train.width || d.test.height != d.train.height)
    throw DimensionError("training and test images differ in size");
  d.test.num_classes = d.train.num_classes = std::max(d.train.num_classes, d.test.num_classes);
  d.scaling = fit_pixel_scaling(d.train);
  d.scaling.apply(d.train);
  d.scaling.apply(d.test);
  return d;
}

std::vector<std::vector<std::size_t>> conv_confusion(const ConvNetwork& net, const ImageSet& set) {
  std::vector<std::vector<std::size_t>> m(net.num_classes(), std::vector<std::size_t>(net.num_classes(), 0));
  ConvForward fwd;
  for (const auto& im : set.images) {
    conv_forward(net, im, fwd);
    ++m.at(static_cast<std::size_t>(im.label)).at(static_cast<std::size_t>(fwd.predicted));
  }
  return m;
}

double accuracy_of(const std::vector<std::vector<std::size_t>>& m) {
  std::size_t hit = 0, all = 0;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t p = 0; p < m[a].size(); ++p) {
      all += m[a][p];
      if (a == p) hit += m[a][p];
    }
  return all ? static_cast<double>(hit) / static_cast<double>(all) : 0.0;
}

TrainArtifacts train_conv(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto seed = cfg.require_seed();
  auto data = prepare_images(cfg);
  auto cc = cfg.conv;
  const auto budget = make_budget(cfg, data.train.size());
  cc.learning_rate = budget.schedule.initial;

  ConvNetwork net(data.train.width, data.train.height, data.train.num_classes, cc.activation);
  ConvTrainer trainer(net, cc, seed);
  std::vector<std::size_t> order(data.train.size());
  std::size_t pos = 0;
  std::vector<CurvePoint> curve;
  std::optional<std::uint64_t> solved_at;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const double lr = budget.schedule.rate_at(e);
    trainer.set_learning_rate(lr);
    std::size_t seen = 0, correct = 0;
    for (std::size_t i = 0; i < budget.options.epoch_instances; ++i) {
      if (cfg.max_instances && trainer.instances_seen() >= cfg.max_instances) break;
      if (pos == 0) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), trainer.rng().data);
      }
      const auto& im = data.train.images[order[pos]];
      pos = (pos + 1) % order.size();
      if (trainer.step(im).correct) ++correct;
      ++seen;
    }
    if (seen == 0) break;
    CurvePoint pt{e, trainer.instances_seen(), double(correct) / double(seen), conv_accuracy(net, data.test), lr};
    curve.push_back(pt);
    if (cfg.stop_accuracy && pt.test_acc >= *cfg.stop_accuracy) {
      solved_at = pt.instances;
      break;
    }
    if (cfg.max_instances && trainer.instances_seen() >= cfg.max_instances) break;
  }

  const auto confusion = conv_confusion(net, data.test);
  std::vector<std::size_t> hist;
  for (const auto& f : net.features())
    if (!f.is_atomic()) {
      if (hist.size() <= f.depth) hist.resize(f.depth + 1, 0);
      ++hist[f.depth];
    }

  TrainArtifacts out;
  auto& r = out.report;
  r["command"] = "train";
  r["config"] = config_to_json(cfg);
  r["final"] = {{"test_accuracy", accuracy_of(confusion)},
                {"train_accuracy", curve.empty() ? 0.0 : curve.back().train_acc},
                {"instances", trainer.instances_seen()},
                {"epochs", curve.size()},
                {"solved_at", solved_at ? nlohmann::json(*solved_at) : nlohmann::json(nullptr)},
                {"test_source", data.test_source},
                {"test_size", data.test.size()}};
  r["confusion"] = confusion;
  r["depth_histogram"] = histogram_json(hist);
  r["population"] = {{"atomic", net.atomic_count()}, {"composite", net.composite_count()}};
  r["wall_clock_seconds"] = seconds_since(t0);
  out.curve_csv = curve_to_csv(curve);
  out.model = model_to_json(ConvModel{std::move(net), data.scaling});
  return out;
}

std::optional<MultiplexerSpec> multiplexer_of(const Schema& schema) {
  for (unsigned k = 1; k <= 10; ++k) {
    MultiplexerSpec s{k, 1};
    if (s.logical_bits() > schema.num_attributes()) break;
    if (multiplexer_schema(s) == schema) return s;
  }
  return std::nullopt;
}

}  // namespace

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << kCurveHeader << '\n';
  for (const auto& p : curve)
    out << p.epoch << ',' << p.instances << ',' << format_real(p.train_acc) << ',' << format_real(p.test_acc) << ','
        << format_real(p.lr) << '\n';
  return out.str();
}

std::string confusion_to_csv(const std::vector<std::vector<std::size_t>>& confusion) {
  std::ostringstream out;
  out << "actual";
  for (std::size_t p = 0; p < confusion.size(); ++p) out << ",pred_" << p;
  out << '\n';
  for (std::size_t a = 0; a < confusion.size(); ++a) {
    out << a;
    for (auto v : confusion[a]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

TrainArtifacts train_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.images()) return train_conv(cfg);
  auto data = prepare_tabular(cfg);
  auto run = run_tabular(cfg, data, cfg.require_seed());
  TrainArtifacts out;
  out.report = tabular_report("train", cfg, data, run);
  out.curve_csv = curve_to_csv(run.result.curve);
  out.model = model_to_json(TabularModel{std::move(run.net), data.normalization});
  return out;
}

TrainArtifacts transfer_experiment(const ExperimentConfig& cfg, const nlohmann::json& source_model) {
  cfg.validate();
  if (cfg.images()) throw ConfigError("transfer is defined for tabular problems only");
  const auto source = model_from_json(source_model);
  if (source.network.continuous()) throw ConfigError("transfer needs a discrete source model");
  const auto fit = compute_fitness(source.network, cfg.trainer.fitness_norm);
  const auto kept = extract_kept(source.network, fit, cfg.top_m, multiplexer_of(source.network.schema()));

  auto data = prepare_tabular(cfg);
  if (source.network.schema().classes != data.schema.classes)
    throw ConfigError("source and target class labels differ");
  auto run = run_tabular(cfg, data, cfg.require_seed(), &kept);
  std::size_t survivors = 0;
  for (const auto& f : run.net.features())
    if (f.kept) ++survivors;

  TrainArtifacts out;
  out.report = tabular_report("transfer", cfg, data, run);
  out.report["kept"] = {{"injected", kept.features.size()}, {"survivors", survivors}, {"top_m", cfg.top_m}};
  out.curve_csv = curve_to_csv(run.result.curve);
  out.model = model_to_json(TabularModel{std::move(run.net), data.normalization});
  out.kept = kept.to_json();
  return out;
}

EvalResult eval_model(const nlohmann::json& model, const ExperimentConfig& cfg) {
  EvalResult r;
  if (model_kind(model) == "conv") {
    const auto m = conv_model_from_json(model);
    ImageSet set;
    if (cfg.source == DataSource::Shapes)
      set = make_shapes(cfg.shapes_test, data_seed(cfg.require_seed(), kTestSalt), cfg.shapes_noise);
    else if (cfg.source == DataSource::Idx || cfg.source == DataSource::PixelCsv)
      set = load_images(cfg, cfg.data, cfg.labels);
    else
      throw ConfigError("a convolutional model needs image data");
    if (set.width != m.network.width() || set.height != m.network.height())
      throw SchemaMismatch("image size does not match the model");
    for (const auto& im : set.images)
      if (static_cast<std::size_t>(im.label) >= m.network.num_classes())
        throw SchemaMismatch("image label outside the model's classes");
    m.scaling.apply(set);
    r.confusion = conv_confusion(m.network, set);
    r.accuracy = accuracy_of(r.confusion);
    r.instances = set.size();
    return r;
  }
  const auto m = model_from_json(model);
  Dataset data;
  if (cfg.source == DataSource::Multiplexer) {
    MultiplexerSpec spec{cfg.mux_k, cfg.parity_group};
    spec.validate();
    if (!(multiplexer_schema(spec) == m.network.schema()))
      throw SchemaMismatch("generator schema does not match the model");
    data = generator_test_set(spec, cfg, nullptr);
  } else if (cfg.source == DataSource::File) {
    if (cfg.data.empty()) throw ConfigError("eval needs a data file");
    data = load_csv(cfg.data, m.network.schema());
    if (m.normalization) m.normalization->apply(data);
  } else {
    throw ConfigError("a tabular model needs tabular data");
  }
  const auto ev = evaluate(m.network, data);
  r.accuracy = ev.accuracy;
  r.confusion = ev.confusion;
  r.instances = data.size();
  return r;
}

nlohmann::json crossval_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.source != DataSource::File) throw ConfigError("cross-validation needs file data");
  const auto t0 = Clock::now();
  const auto seed = cfg.require_seed();
  const auto schema = load_schema(cfg.schema);
  const auto all = load_csv(cfg.data, schema);
  const auto plan = kfold_split(all, cfg.folds, seed);

  std::vector<nlohmann::json> reports(plan.k());
  std::vector<double> acc(plan.k(), 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t f; (f = next++) < plan.k();) {
      try {
        TabularData d;
        d.schema = schema;
        d.train = subset(all, plan.train_indices(f));
        d.test = subset(all, plan.test_indices(f));
        d.test_source = "fold " + std::to_string(f);
        if (cfg.normalization != "none") {
          d.normalization = fit_normalization(d.train, normalization_kind(cfg.normalization));
          d.normalization->apply(d.train);
          d.normalization->apply(d.test);
        }
        auto run = run_tabular(cfg, d, splitmix64(seed + f + 1));
        acc[f] = run.final_eval.accuracy;
        reports[f] = {{"fold", f},
                      {"train_size", d.train.size()},
                      {"test_size", d.test.size()},
                      {"test_accuracy", run.final_eval.accuracy},
                      {"instances", run.result.instances},
                      {"curve", curve_to_csv(run.result.curve)},
                      {"confusion", run.final_eval.confusion},
                      {"depth_histogram", histogram_json(depth_histogram(run.net))}};
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, plan.k());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  nlohmann::json r;
  r["command"] = "crossval";
  r["config"] = config_to_json(cfg);
  r["folds"] = reports;
  r["warnings"] = plan.warnings;
  r["aggregate"] = {{"mean_accuracy", mean},
                    {"stddev_accuracy", acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0}};
  r["wall_clock_seconds"] = seconds_since(t0);
  return r;
}

std::string dump_rules(const nlohmann::json& model) {
  if (model_kind(model) == "conv") throw ConfigError("convolutional features have no rule form");
  const auto m = model_from_json(model);
  const auto& net = m.network;
  if (net.continuous())
    throw ConfigError("refusing to dump rules: internal weights of a continuous model are tuned, so its features "
                      "are no longer exact conjunctions");
  const auto& schema = net.schema();
  auto weights_text = [&](const std::vector<double>& w) {
    std::string s = "{";
    for (std::size_t o = 0; o < w.size(); ++o) {
      if (o) s += ", ";
      s += (net.num_outputs() == 1 ? std::string("logit") : schema.classes[o]) + ": " + format_real(w[o]);
    }
    return s + "}";
  };

  std::ostringstream out;
  out << "# " << net.size() << " features, " << net.composite_count() << " composite\n";
  if (m.normalization) out << "# real thresholds are in normalized units\n";
  out << "DEFAULT class weights " << weights_text(net.biases()) << '\n';
  std::vector<std::set<FeatureIndex>> leaves(net.size());
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    const auto& f = net[i];
    if (f.is_atomic())
      leaves[i] = {i};
    else
      for (auto c : f.children) leaves[i].insert(leaves[c].begin(), leaves[c].end());
    if (f.out.empty()) continue;
    std::vector<double> w(net.num_outputs(), 0.0);
    for (const auto& l : f.out) w[l.output] = l.weight;
    out << "IF ";
    bool first = true;
    std::set<std::string> seen;
    for (auto a : leaves[i]) {
      const auto text = net[a].predicate ? describe(*net[a].predicate, schema) : "feature#" + std::to_string(net[a].id);
      if (!seen.insert(text).second) continue;
      out << (first ? "" : " AND ") << text;
      first = false;
    }
    out << " THEN class weights " << weights_text(w) << '\n';
  }
  return out.str();
}

void generate_dataset(const ExperimentConfig& cfg, std::size_t samples, bool enumerate,
                      const std::filesystem::path& out) {
  const auto seed = cfg.require_seed();
  if (cfg.source == DataSource::Shapes) {
    write_pixel_csv(make_shapes(samples ? samples : cfg.shapes_train, data_seed(seed, kTrainSalt), cfg.shapes_noise),
                    out);
    return;
  }
  if (cfg.source != DataSource::Multiplexer) throw ConfigError("gen needs a generator source (mux or shapes)");
  MultiplexerSpec spec{cfg.mux_k, cfg.parity_group};
  spec.validate();
  Dataset d;
  if (enumerate) {
    d = enumerate_multiplexer(spec);
  } else {
    if (samples == 0) throw ConfigError("gen needs a sample count or enumeration");
    Rng rng(data_seed(seed, kTrainSalt));
    d = sample_multiplexer(spec, rng, samples);
  }
  write_csv(d, out);
  auto schema_path = out;
  schema_path.replace_extension(".schema.json");
  save_schema(d.schema, schema_path);
}

}  // namespace adn
