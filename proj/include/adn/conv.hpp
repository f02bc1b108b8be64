#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adn/images.hpp"
#include "adn/network.hpp"
#include "adn/population.hpp"
#include "adn/rng.hpp"

namespace adn {

/// Axis-aligned block of anchor positions. An atom's anchor is the top-left
/// pixel of its patch; a composite's anchor is shared by its children after
/// each child's offset is added.
struct Rect {
  int x0 = 0, y0 = 0, w = 0, h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int x, int y) const { return x >= x0 && y >= y0 && x < x0 + w && y < y0 + h; }
  std::size_t area() const { return empty() ? 0 : static_cast<std::size_t>(w) * static_cast<std::size_t>(h); }
  bool operator==(const Rect&) const = default;
};

struct ActivationMap {
  Rect region;
  std::vector<double> values;  // row-major over `region`

  double at(int x, int y) const { return values[index(x, y)]; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>((y - region.y0) * region.w + (x - region.x0));
  }
  /// First position of the maximum in row-major order.
  std::size_t argmax() const;
  int x_of(std::size_t i) const { return region.x0 + static_cast<int>(i) % region.w; }
  int y_of(std::size_t i) const { return region.y0 + static_cast<int>(i) / region.w; }
};

struct ConvChild {
  FeatureIndex index = 0;
  int dx = 0;
  int dy = 0;
  bool operator==(const ConvChild&) const = default;
};

struct ConvFeature {
  FeatureId id = 0;
  std::uint64_t creation_step = 0;
  int patch_w = 0, patch_h = 0;     // atoms
  std::vector<ConvChild> children;  // composites; sorted by index, first offset (0,0)
  std::vector<FeatureIndex> parents;
  std::vector<double> weights;  // patch cells row-major, or one per child
  double bias = 0.0;
  Rect region;
  std::vector<double> out;  // composites: weight per class
  double fitness = 0.0;
  unsigned depth = 0;

  bool is_atomic() const { return children.empty(); }
};

/// Convolutional feature DAG. Same ordering rules as FeatureNetwork: children
/// precede parents, ids are permanent, indices shift on remove().
class ConvNetwork {
 public:
  ConvNetwork() = default;
  ConvNetwork(int width, int height, std::size_t classes, ActivationFn fn = ActivationFn::Relu);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t num_classes() const { return classes_; }
  ActivationFn activation_fn() const { return fn_; }
  void set_activation_fn(ActivationFn fn) { fn_ = fn; }

  std::size_t size() const { return features_.size(); }
  const ConvFeature& operator[](FeatureIndex i) const { return features_[i]; }
  ConvFeature& operator[](FeatureIndex i) { return features_[i]; }
  std::span<const ConvFeature> features() const { return features_; }
  std::optional<FeatureIndex> find(FeatureId id) const;

  FeatureIndex add_atom(int patch_w, int patch_h, std::vector<double> weights, double bias, std::uint64_t step);
  /// Children are put in canonical form (sorted, first offset zero) with
  /// their weights permuted alongside.
  FeatureIndex add_composite(std::vector<ConvChild> children, std::vector<double> weights, double bias,
                             std::uint64_t step);
  std::optional<FeatureIndex> find_composite(std::vector<ConvChild> children) const;

  std::vector<FeatureId> remove(const std::vector<bool>& marked);

  std::vector<double>& biases() { return biases_; }
  const std::vector<double>& biases() const { return biases_; }

  std::size_t atomic_count() const;
  std::size_t composite_count() const { return size() - atomic_count(); }
  std::uint64_t next_id() const { return next_id_; }
  void reserve_ids(std::uint64_t next) { next_id_ = std::max(next_id_, next); }
  /// Appends a deserialized feature; `id` and geometry are kept, parents,
  /// depth and region are recomputed.
  FeatureIndex restore(ConvFeature f);

  void check_invariants() const;

 private:
  FeatureIndex append(ConvFeature f);

  int width_ = 0, height_ = 0;
  std::size_t classes_ = 0;
  ActivationFn fn_ = ActivationFn::Relu;
  std::vector<ConvFeature> features_;
  std::vector<double> biases_;
  std::uint64_t next_id_ = 1;
};

/// Canonical child order: sorted by index, offsets relative to the first.
void canonicalize(std::vector<ConvChild>& children, std::vector<double>* weights = nullptr);

ActivationMap conv_activate_atomic(const ConvFeature& f, ActivationFn fn, const Image& img,
                                   std::vector<double>* pre = nullptr);
ActivationMap conv_activate_composite(const ConvFeature& f, ActivationFn fn,
                                      std::span<const ActivationMap* const> child_maps,
                                      std::vector<double>* pre = nullptr);

/// Full forward pass plus classification.
struct ConvForward {
  std::vector<ActivationMap> maps;
  std::vector<std::vector<double>> pre;
  std::vector<double> maxima;
  std::vector<std::size_t> argmax;  // into maps[f].values
  std::vector<double> logits;
  std::vector<double> scores;
  int predicted = 0;
};

void conv_forward(const ConvNetwork& net, const Image& img, ConvForward& fwd);
ConvForward conv_forward(const ConvNetwork& net, const Image& img);
double conv_loss(const ConvForward& fwd, int target);

struct ConvGradients {
  std::vector<std::vector<double>> out;      // [feature][class]
  std::vector<std::vector<double>> weights;  // [feature][weight]
  std::vector<double> bias;
  std::vector<double> class_bias;
};

/// Loss gradients with respect to every parameter. Errors reach each
/// composite only at its recorded argmax position and travel to children at
/// the offset-shifted position.
ConvGradients conv_gradients(const ConvNetwork& net, const Image& img, const ConvForward& fwd, int target);

/// Gradient step; `internal_rate` 0 leaves the feature parameters untouched.
void conv_backprop(ConvNetwork& net, const Image& img, const ConvForward& fwd, int target, double out_rate,
                   double internal_rate);

/// Composite with the largest w[f][predicted] * max_f, if any.
std::optional<FeatureIndex> conv_winner(const ConvNetwork& net, const ConvForward& fwd);

/// f += alpha (r - f) on `winner` and every feature below it, once each.
void reinforce_fitness(ConvNetwork& net, FeatureIndex winner, double reward, double alpha);

/// Output-weight fitness (the tabular subtree rule) as an alternative to reinforcement.
std::vector<double> conv_weight_fitness(const ConvNetwork& net);

struct ConvCreateOptions {
  double norm_k = 1.0;
  double epsilon = 0.1;
  double threshold = 0.5;
  std::vector<int> patch_sizes{3, 5, 7};
  /// Reject composites whose creation-time activation is not above threshold.
  bool require_match = true;
};

/// New atom from a square patch of the image at a random position, weights
/// rescaled so their squares sum to norm_k. nullopt on a zero patch.
std::optional<FeatureIndex> conv_create_atom(ConvNetwork& net, const Image& img, Rng& rng, std::uint64_t step,
                                             const ConvCreateOptions& opt);

/// New composite over `children` bound at their argmax displacements.
/// nullopt for duplicates or, with require_match, a non-matching result.
std::optional<FeatureIndex> conv_create_composite(ConvNetwork& net, const ConvForward& fwd,
                                                  std::span<const FeatureIndex> children, std::uint64_t step,
                                                  const ConvCreateOptions& opt);

enum class Topology { Guided, Random };
enum class ConvSelection { Reinforcement, OutputWeight };

struct ConvConfig {
  PopulationConfig population;  // caps, triggers, removal interval, child count
  double learning_rate = 0.01;
  double internal_learning_rate = -1.0;  // negative: follow learning_rate
  ConvCreateOptions create;
  double alpha = 0.1;
  double initial_fitness = 0.0;
  ActivationFn activation = ActivationFn::Relu;
  Topology topology = Topology::Guided;
  ConvSelection selection = ConvSelection::Reinforcement;
  /// Instances of topology growth; afterwards only gradients. 0: never stop.
  std::uint64_t coarse_instances = 0;

  void validate() const;
};

struct ConvStep {
  int predicted = 0;
  bool correct = false;
  std::size_t created = 0;
  std::size_t removed = 0;
};

class ConvTrainer {
 public:
  ConvTrainer(ConvNetwork& net, ConvConfig cfg, std::uint64_t seed);

  ConvStep step(const Image& img);
  void set_learning_rate(double r) { rate_ = r; }
  double learning_rate() const { return rate_; }
  std::uint64_t instances_seen() const { return seen_; }
  bool growing() const { return cfg_.coarse_instances == 0 || seen_ < cfg_.coarse_instances; }
  RngStreams& rng() { return rng_; }
  const ConvConfig& config() const { return cfg_; }

 private:
  std::size_t trim();

  ConvNetwork& net_;
  ConvConfig cfg_;
  RngStreams rng_;
  double rate_;
  std::uint64_t seen_ = 0;
  std::uint64_t interval_start_ = 0;
  ConvForward fwd_;
};

int conv_predict(const ConvNetwork& net, const Image& img);
double conv_accuracy(const ConvNetwork& net, const ImageSet& set);

}  // namespace adn
