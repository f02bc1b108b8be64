#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adn/data.hpp"

namespace adn {

using FeatureId = std::uint64_t;
using FeatureIndex = std::uint32_t;

enum class PredicateKind { Geq, Leq, Equals };

/// Atomic test on a single attribute: `>= v`, `<= v` on reals, `== category`
/// on nominals.
struct Predicate {
  std::uint32_t attribute = 0;
  PredicateKind kind = PredicateKind::Geq;
  double boundary = 0.0;

  bool holds(double value) const {
    switch (kind) {
      case PredicateKind::Geq: return value >= boundary;
      case PredicateKind::Leq: return value <= boundary;
      case PredicateKind::Equals: return value == boundary;
    }
    return false;
  }

  bool operator==(const Predicate&) const = default;
};

/// Human readable form, e.g. `attr3 >= 0.42` or `colour == red`.
std::string describe(const Predicate& p, const Schema& schema);

enum class ActivationFn { Tanh, Relu, Identity };

double apply_activation(ActivationFn fn, double pre);
/// d out / d pre, given both values.
double activation_derivative(ActivationFn fn, double pre, double out);
ActivationFn parse_activation(const std::string& name);
std::string to_string(ActivationFn fn);

/// Encoded continuous input: the raw value of a real attribute, or the
/// one-hot indicator `attribute == category` of a nominal one.
struct InputRef {
  std::uint32_t attribute = 0;
  std::int32_t category = -1;

  double read(const Instance& inst) const {
    double v = inst.values[attribute];
    return category < 0 ? v : (v == static_cast<double>(category) ? 1.0 : 0.0);
  }
  bool operator==(const InputRef&) const = default;
};

/// Connection from a feature to one output unit.
struct OutLink {
  std::uint32_t output = 0;
  double weight = 0.0;
  std::uint64_t created = 0;
};

struct Feature {
  FeatureId id = 0;
  std::uint64_t creation_step = 0;

  std::optional<Predicate> predicate;  // symbolic atoms
  std::vector<InputRef> inputs;        // atoms in continuous mode
  std::vector<FeatureIndex> children;  // composites; always lower indices
  std::vector<FeatureIndex> parents;

  std::vector<OutLink> out;

  // Continuous parameters, aligned with `inputs` (atoms) or `children`.
  std::vector<double> weights;
  double bias = 0.0;

  unsigned depth = 0;  // longest child chain down to an atom
  bool kept = false;
  std::uint64_t protected_until = 0;

  bool is_atomic() const { return children.empty(); }
};

enum class OutputFunction { Softmax, Logistic };
enum class WeightNorm { L1, L2 };

/// The feature DAG plus the output layer.
///
/// Features live in a vector ordered by creation, so every child sits at a
/// lower index than its parents and the vector order is a topological order.
/// Indices are stable until the next call to remove(); ids are stable forever.
class FeatureNetwork {
 public:
  FeatureNetwork() = default;
  explicit FeatureNetwork(Schema schema, OutputFunction output = OutputFunction::Softmax);

  const Schema& schema() const { return schema_; }
  OutputFunction output_function() const { return output_; }
  std::size_t num_classes() const { return schema_.num_classes(); }
  /// 1 for a single logistic unit, otherwise one unit per class.
  std::size_t num_outputs() const { return output_ == OutputFunction::Logistic ? 1 : num_classes(); }

  std::size_t size() const { return features_.size(); }
  bool empty() const { return features_.empty(); }
  const Feature& operator[](FeatureIndex i) const { return features_[i]; }
  Feature& operator[](FeatureIndex i) { return features_[i]; }
  std::span<const Feature> features() const { return features_; }
  std::optional<FeatureIndex> find(FeatureId id) const;

  FeatureIndex add_atom(const Predicate& p, std::uint64_t step);
  FeatureIndex add_input_atom(std::vector<InputRef> inputs, std::uint64_t step);
  FeatureIndex add_composite(std::vector<FeatureIndex> children, std::uint64_t step);

  std::optional<FeatureIndex> find_atom(const Predicate& p) const;
  /// Existing composite with the same child multiset. Only the parents of
  /// the given children are scanned; any duplicate must be one of them.
  std::optional<FeatureIndex> find_composite(std::span<const FeatureIndex> children) const;

  /// Removes the marked features and every composite that transitively
  /// depends on one of them. Returns the removed ids.
  std::vector<FeatureId> remove(const std::vector<bool>& marked);

  std::vector<double>& biases() { return biases_; }
  const std::vector<double>& biases() const { return biases_; }

  /// Sparse mode: features start without output links; links are created and
  /// trimmed by the population dynamics.
  bool sparse_outputs() const { return sparse_; }
  void set_sparse_outputs(bool sparse) { sparse_ = sparse; }
  unsigned min_out_depth() const { return min_out_depth_; }
  void set_min_out_depth(unsigned d) { min_out_depth_ = d; }
  bool add_link(FeatureIndex f, std::uint32_t output, std::uint64_t step);

  bool continuous() const { return continuous_; }
  void set_continuous(bool c) { continuous_ = c; }
  ActivationFn activation_fn() const { return activation_; }
  void set_activation_fn(ActivationFn fn) { activation_ = fn; }
  double match_threshold() const { return threshold_; }
  void set_match_threshold(double t) { threshold_ = t; }

  std::size_t atomic_count() const;
  std::size_t composite_count() const { return size() - atomic_count(); }
  std::size_t link_count() const;
  std::uint64_t next_id() const { return next_id_; }
  void reserve_ids(std::uint64_t next) { next_id_ = std::max(next_id_, next); }

  /// Appends a fully-formed feature (deserialization). Children must already
  /// be present; parents and depth are recomputed.
  FeatureIndex restore(Feature f);

  /// Throws InvariantError on dangling references, order violations, or
  /// duplicate composites.
  void check_invariants() const;

 private:
  FeatureIndex append(Feature f);

  Schema schema_;
  OutputFunction output_ = OutputFunction::Softmax;
  std::vector<Feature> features_;
  std::vector<double> biases_;
  bool sparse_ = false;
  unsigned min_out_depth_ = 0;
  bool continuous_ = false;
  ActivationFn activation_ = ActivationFn::Tanh;
  double threshold_ = 0.5;
  std::uint64_t next_id_ = 1;
};

/// Per-instance activation record.
struct ActivationState {
  bool continuous = false;
  std::vector<FeatureIndex> active;  // matching features, ascending
  std::vector<char> matched;         // 1 for every feature in `active`
  std::vector<double> values;        // activation per feature (0/1 when discrete)
  std::vector<double> pre;           // pre-activation per feature (continuous)
  std::vector<std::uint32_t> fired_children;  // scratch for the selective pass

  bool is_active(FeatureIndex i) const { return matched[i] != 0; }
};

/// Selective bottom-up pass: atoms are tested, and a composite is only
/// reached once all of its children have fired.
ActivationState activate_discrete(const FeatureNetwork& net, const Instance& inst);
void activate_discrete(const FeatureNetwork& net, const Instance& inst, ActivationState& state);

/// Full pass in topological order using each feature's continuous parameters.
ActivationState forward_continuous(const FeatureNetwork& net, const Instance& inst);

struct Prediction {
  std::vector<double> logits;        // one per output unit
  std::vector<double> class_scores;  // one per class, sums to 1
  int argmax = 0;
};

Prediction classify(const FeatureNetwork& net, const ActivationState& state);

/// dLoss/dlogit for the cross-entropy loss, one per output unit.
std::vector<double> output_deltas(const FeatureNetwork& net, const Prediction& p, int target);
double cross_entropy(const Prediction& p, int target);

/// Accumulates updates over `size` instances and applies their average.
class Minibatch {
 public:
  explicit Minibatch(std::size_t size = 1) : size_(size == 0 ? 1 : size) {}
  std::size_t size() const { return size_; }
  std::size_t pending() const { return count_; }

  void add_out(FeatureId id, std::uint32_t output, double g) { out_[{id, output}] += g; }
  void add_weight(FeatureId id, std::uint32_t slot, double g) { internal_[{id, slot}] += g; }
  void add_bias(std::size_t output, double g);

  /// Counts one instance; applies and clears once `size` instances are in.
  bool finish_instance(FeatureNetwork& net, double out_rate, double internal_rate);
  void flush(FeatureNetwork& net, double out_rate, double internal_rate);

  static constexpr std::uint32_t kBiasSlot = 0xffffffffu;

 private:
  std::size_t size_;
  std::size_t count_ = 0;
  std::map<std::pair<FeatureId, std::uint32_t>, double> out_;
  std::map<std::pair<FeatureId, std::uint32_t>, double> internal_;
  std::vector<double> bias_;
};

/// Cross-entropy gradient step on the output layer. Discrete states update
/// the links of active features only; continuous states update all links.
/// Returns the per-output deltas.
std::vector<double> output_layer_step(FeatureNetwork& net, const ActivationState& state, const Prediction& pred,
                                      int target, double learning_rate, Minibatch& batch);

double out_weight_norm(const Feature& f, WeightNorm norm = WeightNorm::L1);

/// Selection value per feature: f_n = max(|W_n|, max over parents f_p).
/// Indexed like the network.
std::vector<double> compute_fitness(const FeatureNetwork& net, WeightNorm norm = WeightNorm::L1);

/// Histogram of composite depths; entry d counts composites of depth d.
std::vector<std::size_t> depth_histogram(const FeatureNetwork& net);

}  // namespace adn
