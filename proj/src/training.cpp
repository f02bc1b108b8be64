#include "adn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "adn/error.hpp"
#include "adn/soft_logic.hpp"
#include "adn/transfer.hpp"

namespace adn {

void TrainingMode::validate() const {
  if (kind == TrainingModeKind::Staged && discrete_instances == 0)
    throw ConfigError("staged training needs a positive discrete phase");
}

void TrainerConfig::validate() const {
  population.validate();
  mode.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (minibatch == 0) throw ConfigError("mini_batch_size must be at least 1");
  if (!(activation_buffer > 0.0)) throw ConfigError("activation_buffer must be positive");
  if (!(kept_prob >= 0.0 && kept_prob <= 1.0)) throw ConfigError("kept probability must lie in [0, 1]");
  const bool soft = mode.kind == TrainingModeKind::Staged ||
                    (mode.kind == TrainingModeKind::ContinuousFull && continuous_init == ContinuousInit::SoftLogic);
  if (soft) {
    if (activation != ActivationFn::Tanh) throw ConfigError("soft-logic features require tanh units");
    validate_soft_threshold(match_threshold);
  }
}

FeatureNetwork make_network(const Schema& schema, const TrainerConfig& cfg) {
  cfg.validate();
  FeatureNetwork net(schema, cfg.output);
  net.set_sparse_outputs(cfg.population.sparse_out_limit > 0);
  net.set_min_out_depth(cfg.population.min_out_depth);
  net.set_activation_fn(cfg.activation);
  net.set_match_threshold(cfg.match_threshold);
  net.set_continuous(cfg.mode.kind == TrainingModeKind::ContinuousFull);
  return net;
}

Trainer::Trainer(FeatureNetwork& net, TrainerConfig cfg, std::uint64_t seed)
    : net_(net), cfg_(std::move(cfg)), rng_(seed), rate_(cfg_.learning_rate), batch_(cfg_.minibatch) {
  cfg_.validate();
  if (cfg_.continuous_init == ContinuousInit::Random) {
    auto opt = cfg_.random_init;
    opt.threshold = cfg_.match_threshold;
    opt.fn = cfg_.activation;
    continuous_factory_ = std::make_unique<RandomInitFactory>(opt, cfg_.random_atom_inputs, &rng_.init);
  } else {
    continuous_factory_ = std::make_unique<SoftLogicFactory>(cfg_.match_threshold, cfg_.activation_buffer);
  }
  for (const auto& f : net_.features()) interval_start_ = std::max(interval_start_, f.creation_step);
  seen_ = interval_start_;
}

double Trainer::internal_learning_rate() const {
  if (cfg_.internal_learning_rate < 0.0) return rate_;
  return cfg_.internal_learning_rate * rate_ / cfg_.learning_rate;
}

bool Trainer::continuous_phase() const { return net_.continuous(); }

bool Trainer::population_active() const {
  return cfg_.mode.kind != TrainingModeKind::Staged || !net_.continuous() || cfg_.mode.population_in_finetune;
}

const FeatureFactory& Trainer::factory() const {
  return net_.continuous() ? *continuous_factory_ : discrete_factory_;
}

void Trainer::enter_continuous() {
  flush();
  convert_to_soft_logic(net_, cfg_.match_threshold, cfg_.activation_buffer);
}

void Trainer::flush() { batch_.flush(net_, rate_, internal_learning_rate()); }

TrainStep Trainer::step(const Instance& inst) {
  const auto& mode = cfg_.mode;
  if (mode.kind == TrainingModeKind::Staged && !net_.continuous() && mode.finetune_instances > 0 &&
      seen_ >= mode.discrete_instances)
    enter_continuous();

  Prediction pred;
  std::vector<double> deltas;
  if (!net_.continuous()) {
    activate_discrete(net_, inst, state_);
    pred = classify(net_, state_);
    deltas = output_layer_step(net_, state_, pred, inst.label, rate_, batch_);
  } else {
    auto r = backprop_full(net_, inst, inst.label, Rates{rate_, internal_learning_rate()}, batch_);
    state_ = std::move(r.state);
    pred = std::move(r.prediction);
    deltas = std::move(r.deltas);
  }

  TrainStep out;
  out.predicted = pred.argmax;
  out.correct = pred.argmax == inst.label;

  const auto& pop = cfg_.population;
  const bool dynamic = population_active();
  if (dynamic) {
    if (net_.sparse_outputs()) sparse_link_step(net_, state_, deltas, rng_.creation, seen_, pop);
    ChildChooser chooser;
    if (kept_bias_) {
      chooser = [this](const std::vector<FeatureIndex>& active, std::size_t count, Rng& rng) {
        return biased_child_choice(net_, active, count, rng, cfg_.kept_prob).children;
      };
    }
    out.created = maybe_create(net_, state_, inst, out.correct, rng_.creation, seen_, pop, factory(), chooser).created;
  }
  ++seen_;
  if (dynamic && seen_ % pop.removal_interval == 0) {
    const auto fit = compute_fitness(net_, cfg_.fitness_norm);
    out.removed = trim_population(net_, fit, pop, interval_start_, seen_);
    sparse_link_trim(net_, pop);
    interval_start_ = seen_;
  }
  return out;
}

// --- schedules -------------------------------------------------------------

double Schedule::rate_at(std::size_t epoch) const {
  if (kind == ScheduleKind::Constant || epoch <= 1) return initial;
  return initial * std::pow(factor, static_cast<double>(epoch - 1));
}

Schedule Schedule::parse(const std::string& text, double constant_rate) {
  Schedule s;
  s.initial = constant_rate;
  if (text.empty() || text == "constant") return s;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  try {
    if (parts[0] == "constant" && parts.size() == 2) {
      s.initial = std::stod(parts[1]);
    } else if (parts[0] == "exp" && parts.size() == 3) {
      s.kind = ScheduleKind::ExpDecay;
      s.initial = std::stod(parts[1]);
      s.factor = std::stod(parts[2]);
    } else {
      throw ConfigError("");
    }
  } catch (const std::exception&) {
    throw ConfigError("schedule must be 'constant', 'constant:<rate>' or 'exp:<initial>:<factor>', got '" + text + "'");
  }
  if (!(s.initial > 0.0)) throw ConfigError("schedule rate must be positive");
  if (s.kind == ScheduleKind::ExpDecay && !(s.factor > 0.0 && s.factor < 1.0))
    throw ConfigError("schedule decay factor must lie in (0, 1)");
  return s;
}

std::string Schedule::to_string() const {
  if (kind == ScheduleKind::Constant) return "constant:" + format_real(initial);
  return "exp:" + format_real(initial) + ":" + format_real(factor);
}

// --- streams and runs ------------------------------------------------------

Instance DatasetStream::next(Rng& rng) {
  if (data_.instances.empty()) throw ConfigError("cannot train on an empty dataset");
  if (pos_ == 0) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng);
  }
  const auto& inst = data_.instances[order_[pos_]];
  pos_ = (pos_ + 1) % order_.size();
  return inst;
}

RunResult run_training(Trainer& trainer, InstanceStream& stream, const RunOptions& opt, const Evaluator& evaluate) {
  const std::size_t epoch_size = opt.epoch_instances ? opt.epoch_instances : stream.natural_epoch();
  if (epoch_size == 0) throw ConfigError("epoch size must be given for generated data");
  RunResult res;
  for (std::size_t e = 1; e <= opt.epochs; ++e) {
    const double lr = opt.schedule.rate_at(e);
    trainer.set_learning_rate(lr);
    std::size_t seen = 0, correct = 0;
    bool budget_hit = false;
    for (std::size_t i = 0; i < epoch_size; ++i) {
      if (opt.max_instances && trainer.instances_seen() >= opt.max_instances) {
        budget_hit = true;
        break;
      }
      auto inst = stream.next(trainer.rng().data);
      if (trainer.step(inst).correct) ++correct;
      ++seen;
    }
    if (seen == 0) break;
    CurvePoint pt;
    pt.epoch = e;
    pt.instances = trainer.instances_seen();
    pt.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    pt.test_acc = evaluate ? evaluate(trainer.network_view()) : 0.0;
    pt.lr = lr;
    res.curve.push_back(pt);
    if (opt.stop_accuracy && pt.test_acc >= *opt.stop_accuracy) {
      res.solved_at = pt.instances;
      break;
    }
    if (budget_hit || (opt.max_instances && trainer.instances_seen() >= opt.max_instances)) break;
  }
  trainer.flush();
  res.instances = trainer.instances_seen();
  return res;
}

Prediction predict(const FeatureNetwork& net, const Instance& inst) {
  return classify(net, net.continuous() ? forward_continuous(net, inst) : activate_discrete(net, inst));
}

Evaluation evaluate(const FeatureNetwork& net, const Dataset& data) {
  if (!(data.schema == net.schema())) throw SchemaMismatch("dataset schema does not match the model");
  const auto c = net.num_classes();
  Evaluation ev;
  ev.confusion.assign(c, std::vector<std::size_t>(c, 0));
  ActivationState st;
  std::size_t correct = 0;
  for (const auto& inst : data.instances) {
    int p;
    if (net.continuous()) {
      p = classify(net, forward_continuous(net, inst)).argmax;
    } else {
      activate_discrete(net, inst, st);
      p = classify(net, st).argmax;
    }
    ++ev.confusion.at(static_cast<std::size_t>(inst.label)).at(static_cast<std::size_t>(p));
    if (p == inst.label) ++correct;
  }
  ev.accuracy = data.instances.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

}  // namespace adn
