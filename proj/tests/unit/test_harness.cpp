#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adn/conv.hpp"
#include "adn/data.hpp"
#include "adn/error.hpp"
#include "adn/harness.hpp"
#include "adn/model_io.hpp"
#include "adn/multiplexer.hpp"
#include "helpers.hpp"

using namespace adn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig mux_config(unsigned k, std::uint64_t seed, std::size_t epochs = 6) {
  ExperimentConfig cfg;
  cfg.source = DataSource::Multiplexer;
  cfg.mux_k = k;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.epoch_instances = 1000;
  return cfg;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("adn_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("harness: train report and curve") {
  auto art = train_experiment(mux_config(2, 3));
  const auto& r = art.report;
  CHECK(r["command"] == "train");
  const double acc = r["final"]["test_accuracy"];
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(r["final"]["test_size"] == 64);
  CHECK(r.contains("depth_histogram"));
  CHECK(r.contains("confusion"));
  CHECK(art.curve_csv.rfind(kCurveHeader, 0) == 0);
  std::size_t lines = 0;
  std::istringstream ss(art.curve_csv);
  for (std::string l; std::getline(ss, l);) ++lines;
  CHECK(lines >= 2);
  CHECK(model_kind(art.model) == "tabular");
}

TEST_CASE("harness: same seed, same curve and model") {
  auto a = train_experiment(mux_config(2, 21));
  auto b = train_experiment(mux_config(2, 21));
  CHECK(a.curve_csv == b.curve_csv);
  CHECK(a.model.dump() == b.model.dump());
  auto c = train_experiment(mux_config(2, 22));
  CHECK(c.model.dump() != a.model.dump());
}

TEST_CASE("harness: eval reproduces the reported accuracy and is pure") {
  const auto cfg = mux_config(2, 5);
  auto art = train_experiment(cfg);
  const auto before = art.model.dump();
  auto e1 = eval_model(art.model, cfg);
  auto e2 = eval_model(art.model, cfg);
  CHECK(e1.accuracy == art.report["final"]["test_accuracy"].get<double>());
  CHECK(e1.instances == 64);
  CHECK(e1.confusion == e2.confusion);
  CHECK(art.model.dump() == before);
  std::size_t total = 0;
  for (const auto& row : e1.confusion)
    for (auto n : row) total += n;
  CHECK(total == 64);

  auto wrong = mux_config(3, 5);
  CHECK_THROWS_AS(eval_model(art.model, wrong), SchemaMismatch);
}

TEST_CASE("harness: empty network predicts the bias class") {
  const auto cfg = mux_config(2, 1);
  TabularModel m{FeatureNetwork(multiplexer_schema({2, 1})), std::nullopt};
  m.network.biases() = {0.0, 1.0};
  auto e = eval_model(model_to_json(m), cfg);
  const auto truth = enumerate_multiplexer({2, 1});
  double ones = 0.0;
  for (const auto& i : truth.instances) ones += i.label == 1;
  CHECK(e.accuracy == doctest::Approx(ones / 64.0));
  CHECK(e.confusion[0][1] + e.confusion[1][1] == 64);
}

TEST_CASE("harness: confusion csv") {
  CHECK(confusion_to_csv({{3, 1}, {0, 4}}) == "actual,pred_0,pred_1\n0,3,1\n1,0,4\n");
}

TEST_CASE("harness: crossval aggregates folds, independent of threads") {
  const auto dir = scratch("cv");
  Rng rng(8);
  Dataset d;
  d.schema = testutil::mixed_schema(2, 1, 2);
  for (int i = 0; i < 10; ++i) {
    auto inst = testutil::random_instance(d.schema, rng);
    inst.label = i % 2;
    d.instances.push_back(inst);
  }
  write_csv(d, dir / "d.csv");
  save_schema(d.schema, dir / "d.schema.json");
  ExperimentConfig cfg;
  cfg.data = (dir / "d.csv").string();
  cfg.schema = (dir / "d.schema.json").string();
  cfg.seed = 2;
  cfg.folds = 2;
  cfg.epochs = 3;
  cfg.threads = 1;
  auto serial = crossval_experiment(cfg);
  cfg.threads = 2;
  auto parallel = crossval_experiment(cfg);
  REQUIRE(serial["folds"].size() == 2);
  double sum = 0.0;
  std::size_t tested = 0;
  for (const auto& f : serial["folds"]) {
    sum += f["test_accuracy"].get<double>();
    tested += f["test_size"].get<std::size_t>();
  }
  CHECK(tested == 10);
  CHECK(serial["aggregate"]["mean_accuracy"].get<double>() == doctest::Approx(sum / 2.0));
  CHECK(serial["folds"] == parallel["folds"]);
  CHECK(serial["aggregate"] == parallel["aggregate"]);
  fs::remove_all(dir);
}

TEST_CASE("harness: dump-rules flattens conjunctions once") {
  const auto schema = multiplexer_schema({2, 1});
  FeatureNetwork net(schema);
  const auto a = net.add_atom({0, PredicateKind::Equals, 1.0}, 0);
  const auto b = net.add_atom({1, PredicateKind::Equals, 0.0}, 0);
  const auto ab = net.add_composite({a, b}, 0);
  const auto top = net.add_composite({ab, a}, 0);  // a reached twice
  for (auto& l : net[top].out) l.weight = l.output == 1 ? 2.5 : -2.5;
  const auto text = dump_rules(model_to_json(TabularModel{net, std::nullopt}));
  CHECK(text.rfind("# 4 features, 2 composite\n", 0) == 0);
  CHECK(text.find("DEFAULT class weights {0: 0, 1: 0}") != std::string::npos);
  CHECK(text.find("IF b0 == 1 THEN") != std::string::npos);
  CHECK(text.find("IF b0 == 1 AND b1 == 0 THEN class weights {0: -2.5, 1: 2.5}") != std::string::npos);
  std::size_t rules = 0;
  std::istringstream ss(text);
  for (std::string l; std::getline(ss, l);)
    if (l.rfind("IF ", 0) == 0) {
      ++rules;
      CHECK(l.find("b0 == 1 AND b0 == 1") == std::string::npos);
    }
  CHECK(rules == 4);
}

TEST_CASE("harness: dump-rules refuses tuned and convolutional models") {
  FeatureNetwork net(multiplexer_schema({2, 1}));
  net.set_continuous(true);
  CHECK_THROWS_AS(dump_rules(model_to_json(TabularModel{net, std::nullopt})), ConfigError);
  ConvModel cm{ConvNetwork(8, 8, 4), {}};
  CHECK_THROWS_AS(dump_rules(model_to_json(cm)), ConfigError);
}

TEST_CASE("harness: transfer injects the kept set") {
  auto src = train_experiment(mux_config(2, 4, 8));
  auto cfg = mux_config(3, 4, 2);
  cfg.test_samples = 500;
  auto art = transfer_experiment(cfg, src.model);
  CHECK(art.report["kept"]["top_m"] == 20);
  CHECK(art.report["kept"]["injected"].get<std::size_t>() > 0);
  CHECK(art.kept.contains("features"));
  CHECK(model_kind(art.model) == "tabular");

  ConvModel cm{ConvNetwork(8, 8, 4), {}};
  CHECK_THROWS(transfer_experiment(cfg, model_to_json(cm)));
}

TEST_CASE("harness: gen writes data and schema") {
  const auto dir = scratch("gen");
  auto cfg = mux_config(2, 1);
  generate_dataset(cfg, 0, true, dir / "mux6.csv");
  REQUIRE(fs::exists(dir / "mux6.schema.json"));
  auto d = load_csv(dir / "mux6.csv", load_schema(dir / "mux6.schema.json"));
  CHECK(d.size() == 64);
  for (const auto& i : d.instances) {
    std::vector<int> bits;
    for (double v : i.values) bits.push_back(static_cast<int>(v));
    CHECK(multiplexer_label(2, bits) == i.label);
  }
  generate_dataset(cfg, 100, false, dir / "s.csv");
  CHECK(load_csv(dir / "s.csv", load_schema(dir / "s.schema.json")).size() == 100);

  cfg.source = DataSource::Shapes;
  generate_dataset(cfg, 20, false, dir / "shapes.csv");
  CHECK(load_pixel_csv(dir / "shapes.csv").size() == 20);
  fs::remove_all(dir);
}
