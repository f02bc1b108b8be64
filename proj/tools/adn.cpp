// adn: train, evaluate and inspect feature networks from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adn/config.hpp"
#include "adn/error.hpp"
#include "adn/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kSchema = 3, kLoad = 4, kRefused = 5 };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // --<key> value
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--set", c.sets, "override as key=value (repeatable)");
  cmd->add_option("--out", c.out, "output directory");
  for (const auto& k : adn::config_keys()) cmd->add_option("--" + k.name, c.flags[k.name], k.help);
  cmd->add_option("--gen", c.flags["source"], "alias of --source");
  cmd->add_option("--k", c.flags["mux_k"], "alias of --mux_k");
  cmd->add_option("--mode", c.flags["training_mode"], "alias of --training_mode");
}

// Later layers win: file, then --set, then named flags.
adn::ExperimentConfig build_config(CLI::App* cmd, const Common& c) {
  adn::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = adn::load_config(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw adn::ConfigError("--set expects key=value, got " + kv);
    adn::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto given = [&](const std::string& flag) { return cmd->count("--" + flag) > 0; };
  for (const auto& k : adn::config_keys())
    if (given(k.name)) adn::set_config_value(cfg, k.name, c.flags.at(k.name));
  if (given("gen")) adn::set_config_value(cfg, "source", c.flags.at("source"));
  if (given("k")) adn::set_config_value(cfg, "mux_k", c.flags.at("mux_k"));
  if (given("mode")) adn::set_config_value(cfg, "training_mode", c.flags.at("training_mode"));
  return cfg;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw adn::ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw adn::LoadError(1, path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw adn::ConfigError("cannot write " + path.string());
  out << text;
}

void write_artifacts(const adn::TrainArtifacts& a, const fs::path& dir) {
  write_text(dir / "report.json", a.report.dump(2) + "\n");
  write_text(dir / "curve.csv", a.curve_csv);
  write_text(dir / "model.json", a.model.dump(2) + "\n");
  if (!a.kept.is_null()) write_text(dir / "kept.json", a.kept.dump(2) + "\n");
  const auto& f = a.report["final"];
  std::cout << "test_accuracy " << f["test_accuracy"] << " instances " << f["instances"];
  if (!f["solved_at"].is_null()) std::cout << " solved_at " << f["solved_at"];
  std::cout << "\nwrote " << (dir / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abstract deep network experiments"};
  app.require_subcommand(1);
  std::string model_path, source_model, confusion_path, output;
  std::size_t samples = 0;
  bool enumerate = false;

  Common train_c, eval_c, cv_c, tr_c, gen_c;
  auto* train = app.add_subcommand("train", "train one network and write report, curve and model");
  add_common(train, train_c);

  auto* eval = app.add_subcommand("eval", "score a saved model; accuracy to stdout, confusion to a file");
  add_common(eval, eval_c);
  eval->add_option("--model", model_path, "model JSON")->required();
  eval->add_option("--confusion", confusion_path, "confusion CSV path (default OUT/confusion.csv)");

  auto* cv = app.add_subcommand("crossval", "k-fold cross-validation over file data");
  add_common(cv, cv_c);

  auto* tr = app.add_subcommand("transfer", "seed a run with kept features from a source model");
  add_common(tr, tr_c);
  tr->add_option("--source-model", source_model, "source model JSON")->required();

  auto* dump = app.add_subcommand("dump-rules", "print a discrete model as conjunctive rules");
  dump->add_option("--model", model_path, "model JSON")->required();
  dump->add_option("--output", output, "write to a file instead of stdout");

  auto* gen = app.add_subcommand("gen", "emit a generated dataset");
  add_common(gen, gen_c);
  gen->add_option("--samples", samples, "number of instances");
  gen->add_flag("--enumerate", enumerate, "all inputs (multiplexer only)");
  gen->add_option("--output", output, "dataset path")->required();

  auto* keys = app.add_subcommand("keys", "list config keys with their defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*train) {
      write_artifacts(adn::train_experiment(build_config(train, train_c)), train_c.out);
    } else if (*tr) {
      auto cfg = build_config(tr, tr_c);
      write_artifacts(adn::transfer_experiment(cfg, read_json(source_model)), tr_c.out);
    } else if (*eval) {
      const auto r = adn::eval_model(read_json(model_path), build_config(eval, eval_c));
      const auto path = confusion_path.empty() ? fs::path(eval_c.out) / "confusion.csv" : fs::path(confusion_path);
      write_text(path, adn::confusion_to_csv(r.confusion));
      std::cout << "accuracy " << adn::format_real(r.accuracy) << " instances " << r.instances << "\n";
    } else if (*cv) {
      const auto r = adn::crossval_experiment(build_config(cv, cv_c));
      write_text(fs::path(cv_c.out) / "crossval.json", r.dump(2) + "\n");
      std::cout << "mean_accuracy " << r["aggregate"]["mean_accuracy"] << " stddev "
                << r["aggregate"]["stddev_accuracy"] << "\n";
    } else if (*dump) {
      std::string rules;
      try {
        rules = adn::dump_rules(read_json(model_path));
      } catch (const adn::ConfigError& e) {
        std::cerr << "adn: " << e.what() << "\n";
        return kRefused;
      }
      if (output.empty())
        std::cout << rules;
      else
        write_text(output, rules);
    } else if (*gen) {
      adn::generate_dataset(build_config(gen, gen_c), samples, enumerate, output);
    } else if (*keys) {
      const adn::ExperimentConfig cfg;
      for (const auto& k : adn::config_keys())
        std::cout << k.name << " = " << adn::get_config_value(cfg, k.name) << "    # " << k.help << "\n";
    }
  } catch (const adn::ConfigError& e) {
    std::cerr << "adn: config: " << e.what() << "\n";
    return kConfig;
  } catch (const adn::SchemaMismatch& e) {
    std::cerr << "adn: schema mismatch: " << e.what() << "\n";
    return kSchema;
  } catch (const adn::LoadError& e) {
    std::cerr << "adn: load: " << e.what() << "\n";
    return kLoad;
  } catch (const std::exception& e) {
    std::cerr << "adn: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
