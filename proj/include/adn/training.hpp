#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adn/continuous.hpp"
#include "adn/data.hpp"
#include "adn/multiplexer.hpp"
#include "adn/network.hpp"
#include "adn/population.hpp"
#include "adn/rng.hpp"

namespace adn {

enum class TrainingModeKind { Discrete, ContinuousFull, Staged };

struct TrainingMode {
  TrainingModeKind kind = TrainingModeKind::Discrete;
  std::uint64_t discrete_instances = 0;  // staged only
  std::uint64_t finetune_instances = 0;  // staged only
  bool population_in_finetune = false;

  void validate() const;
};

enum class ContinuousInit { SoftLogic, Random };

struct TrainerConfig {
  PopulationConfig population;
  TrainingMode mode;
  OutputFunction output = OutputFunction::Softmax;
  double learning_rate = 0.01;
  /// Negative: follow learning_rate (including its schedule).
  double internal_learning_rate = -1.0;
  std::size_t minibatch = 1;
  WeightNorm fitness_norm = WeightNorm::L1;
  double match_threshold = 0.5;
  double activation_buffer = 0.1;
  ActivationFn activation = ActivationFn::Tanh;
  ContinuousInit continuous_init = ContinuousInit::SoftLogic;
  RandomInitOptions random_init;
  std::size_t random_atom_inputs = 1;
  double kept_prob = 0.5;

  void validate() const;
};

/// Prepares an empty network for the configured mode.
FeatureNetwork make_network(const Schema& schema, const TrainerConfig& cfg);

struct TrainStep {
  int predicted = 0;
  bool correct = false;
  std::vector<FeatureIndex> created;
  std::vector<FeatureId> removed;
};

/// Online training loop over one network: activation, output-layer (or
/// full) gradient step, population creation, and interval trimming.
class Trainer {
 public:
  Trainer(FeatureNetwork& net, TrainerConfig cfg, std::uint64_t seed);

  TrainStep step(const Instance& inst);

  /// Scales both rates; used by the learning-rate schedule.
  void set_learning_rate(double rate) { rate_ = rate; }
  double learning_rate() const { return rate_; }
  double internal_learning_rate() const;

  std::uint64_t instances_seen() const { return seen_; }
  bool continuous_phase() const;
  bool population_active() const;
  RngStreams& rng() { return rng_; }
  const FeatureNetwork& network_view() const { return net_; }
  FeatureNetwork& network() { return net_; }
  const TrainerConfig& config() const { return cfg_; }

  /// Protects kept features and enables the biased child choice.
  void enable_kept_bias(bool on) { kept_bias_ = on; }

  /// Applies any pending mini-batch updates.
  void flush();

 private:
  void enter_continuous();
  const FeatureFactory& factory() const;

  FeatureNetwork& net_;
  TrainerConfig cfg_;
  RngStreams rng_;
  double rate_;
  std::uint64_t seen_ = 0;
  std::uint64_t interval_start_ = 0;
  bool kept_bias_ = false;
  Minibatch batch_;
  ActivationState state_;
  FeatureFactory discrete_factory_;
  std::unique_ptr<FeatureFactory> continuous_factory_;
};

enum class ScheduleKind { Constant, ExpDecay };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double initial = 0.01;
  double factor = 1.0;

  /// Rate during 1-based epoch `e`: initial * factor^(e-1).
  double rate_at(std::size_t epoch) const;
  static Schedule parse(const std::string& text, double constant_rate);
  std::string to_string() const;
};

/// Source of training instances.
class InstanceStream {
 public:
  virtual ~InstanceStream() = default;
  virtual const Schema& schema() const = 0;
  virtual Instance next(Rng& rng) = 0;
  /// Instances per epoch when the stream has a natural epoch, else 0.
  virtual std::size_t natural_epoch() const { return 0; }
};

/// Cycles through a dataset, reshuffled at the start of every pass.
class DatasetStream : public InstanceStream {
 public:
  explicit DatasetStream(const Dataset& data) : data_(data), order_(data.size()) {}
  const Schema& schema() const override { return data_.schema; }
  Instance next(Rng& rng) override;
  std::size_t natural_epoch() const override { return data_.size(); }

 private:
  const Dataset& data_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Fresh uniformly random multiplexer inputs.
class MultiplexerStream : public InstanceStream {
 public:
  explicit MultiplexerStream(MultiplexerSpec spec) : spec_(spec), schema_(multiplexer_schema(spec)) {}
  const Schema& schema() const override { return schema_; }
  Instance next(Rng& rng) override { return sample_multiplexer(spec_, rng); }

 private:
  MultiplexerSpec spec_;
  Schema schema_;
};

struct CurvePoint {
  std::size_t epoch = 0;
  std::uint64_t instances = 0;
  double train_acc = 0.0;  // online accuracy during the epoch
  double test_acc = 0.0;
  double lr = 0.0;
};

struct RunOptions {
  std::size_t epochs = 10;
  std::size_t epoch_instances = 0;  // 0: the stream's natural epoch
  Schedule schedule;
  std::optional<double> stop_accuracy;
  std::uint64_t max_instances = 0;  // 0: unlimited
};

struct RunResult {
  std::vector<CurvePoint> curve;
  std::uint64_t instances = 0;
  std::optional<std::uint64_t> solved_at;  // first epoch end at or above stop_accuracy
};

using Evaluator = std::function<double(const FeatureNetwork&)>;

/// Drives a Trainer over a stream for the configured budget, evaluating on
/// the test side at every epoch boundary.
RunResult run_training(Trainer& trainer, InstanceStream& stream, const RunOptions& opt, const Evaluator& evaluate);

/// Predicts with the pass the network is configured for: selective for
/// symbolic networks, full for continuous ones.
Prediction predict(const FeatureNetwork& net, const Instance& inst);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
};

Evaluation evaluate(const FeatureNetwork& net, const Dataset& data);

}  // namespace adn
