#include "adn/conv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "adn/error.hpp"

namespace adn {

std::size_t ActivationMap::argmax() const {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

void canonicalize(std::vector<ConvChild>& children, std::vector<double>* weights) {
  std::vector<std::size_t> order(children.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(children[a].index, children[a].dx, children[a].dy) <
           std::tie(children[b].index, children[b].dx, children[b].dy);
  });
  std::vector<ConvChild> c;
  std::vector<double> w;
  for (auto i : order) {
    c.push_back(children[i]);
    if (weights) w.push_back((*weights)[i]);
  }
  if (!c.empty()) {
    const int ox = c[0].dx, oy = c[0].dy;
    for (auto& ch : c) {
      ch.dx -= ox;
      ch.dy -= oy;
    }
  }
  children = std::move(c);
  if (weights) *weights = std::move(w);
}

// --- ConvNetwork ------------------------------------------------------------

ConvNetwork::ConvNetwork(int width, int height, std::size_t classes, ActivationFn fn)
    : width_(width), height_(height), classes_(classes), fn_(fn), biases_(classes, 0.0) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  if (classes < 2) throw ConfigError("at least two classes are required");
}

std::optional<FeatureIndex> ConvNetwork::find(FeatureId id) const {
  auto it = std::lower_bound(features_.begin(), features_.end(), id,
                             [](const ConvFeature& f, FeatureId v) { return f.id < v; });
  if (it == features_.end() || it->id != id) return std::nullopt;
  return static_cast<FeatureIndex>(it - features_.begin());
}

FeatureIndex ConvNetwork::append(ConvFeature f) {
  if (f.is_atomic()) {
    if (f.patch_w <= 0 || f.patch_h <= 0) throw DimensionError("patch extent must be positive");
    if (f.weights.size() != static_cast<std::size_t>(f.patch_w * f.patch_h))
      throw DimensionError("patch weight count does not match its extent");
    f.region = {0, 0, width_ - f.patch_w + 1, height_ - f.patch_h + 1};
    if (f.region.empty()) throw DimensionError("patch larger than image");
    f.depth = 0;
    f.out.clear();
  } else {
    if (f.children.size() < 2) throw InvariantError("a composite needs at least two children");
    if (f.weights.size() != f.children.size()) throw InvariantError("one weight per child is required");
    int x0 = -1 << 20, y0 = -1 << 20, x1 = 1 << 20, y1 = 1 << 20;
    unsigned depth = 0;
    for (std::size_t k = 0; k < f.children.size(); ++k) {
      const auto& ch = f.children[k];
      if (ch.index >= features_.size()) throw InvariantError("child does not exist");
      if (k && f.children[k - 1].index == ch.index) throw InvariantError("children must be distinct");
      const auto& r = features_[ch.index].region;
      x0 = std::max(x0, r.x0 - ch.dx);
      y0 = std::max(y0, r.y0 - ch.dy);
      x1 = std::min(x1, r.x0 + r.w - ch.dx);
      y1 = std::min(y1, r.y0 + r.h - ch.dy);
      depth = std::max(depth, features_[ch.index].depth + 1);
    }
    f.region = {x0, y0, x1 - x0, y1 - y0};
    if (f.region.empty()) throw DimensionError("children offsets leave no valid position");
    f.depth = depth;
    f.out.resize(classes_, 0.0);
  }
  if (f.id == 0) f.id = next_id_++;
  next_id_ = std::max(next_id_, f.id + 1);
  f.parents.clear();
  const auto idx = static_cast<FeatureIndex>(features_.size());
  for (const auto& ch : f.children) features_[ch.index].parents.push_back(idx);
  features_.push_back(std::move(f));
  return idx;
}

FeatureIndex ConvNetwork::add_atom(int patch_w, int patch_h, std::vector<double> weights, double bias,
                                   std::uint64_t step) {
  ConvFeature f;
  f.creation_step = step;
  f.patch_w = patch_w;
  f.patch_h = patch_h;
  f.weights = std::move(weights);
  f.bias = bias;
  return append(std::move(f));
}

FeatureIndex ConvNetwork::add_composite(std::vector<ConvChild> children, std::vector<double> weights, double bias,
                                        std::uint64_t step) {
  if (weights.size() != children.size()) throw InvariantError("one weight per child is required");
  canonicalize(children, &weights);
  ConvFeature f;
  f.creation_step = step;
  f.children = std::move(children);
  f.weights = std::move(weights);
  f.bias = bias;
  return append(std::move(f));
}

FeatureIndex ConvNetwork::restore(ConvFeature f) {
  if (f.id == 0 || (!features_.empty() && f.id <= features_.back().id))
    throw InvariantError("restored features must have increasing ids");
  auto out = std::move(f.out);
  const auto idx = append(std::move(f));
  if (!features_[idx].is_atomic()) {
    if (out.size() != classes_) throw InvariantError("output weight count does not match the classes");
    features_[idx].out = std::move(out);
  }
  return idx;
}

std::optional<FeatureIndex> ConvNetwork::find_composite(std::vector<ConvChild> children) const {
  if (children.empty()) return std::nullopt;
  canonicalize(children);
  if (children[0].index >= features_.size()) return std::nullopt;
  for (auto p : features_[children[0].index].parents)
    if (features_[p].children == children) return p;
  return std::nullopt;
}

std::size_t ConvNetwork::atomic_count() const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [](const ConvFeature& f) { return f.is_atomic(); }));
}

std::vector<FeatureId> ConvNetwork::remove(const std::vector<bool>& marked_in) {
  const auto n = features_.size();
  if (marked_in.size() != n) throw InvariantError("removal mask does not match the network");
  std::vector<bool> marked = marked_in;
  for (std::size_t i = 0; i < n; ++i)
    if (!marked[i])
      for (const auto& ch : features_[i].children)
        if (marked[ch.index]) {
          marked[i] = true;
          break;
        }
  std::vector<FeatureIndex> remap(n, 0);
  std::vector<FeatureId> removed;
  std::vector<ConvFeature> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (marked[i]) {
      removed.push_back(features_[i].id);
      continue;
    }
    remap[i] = static_cast<FeatureIndex>(kept.size());
    kept.push_back(std::move(features_[i]));
  }
  for (auto& f : kept) {
    for (auto& ch : f.children) ch.index = remap[ch.index];
    std::vector<FeatureIndex> parents;
    for (auto p : f.parents)
      if (!marked[p]) parents.push_back(remap[p]);
    f.parents = std::move(parents);
  }
  features_ = std::move(kept);
  return removed;
}

void ConvNetwork::check_invariants() const {
  std::set<std::vector<std::tuple<FeatureIndex, int, int>>> seen;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (i && f.id <= features_[i - 1].id) throw InvariantError("feature ids out of order");
    if (f.id >= next_id_) throw InvariantError("feature id beyond the id counter");
    if (f.region.empty()) throw InvariantError("feature with an empty region");
    for (auto p : f.parents) {
      if (p <= i || p >= features_.size()) throw InvariantError("parent link out of order");
      const auto& pc = features_[p].children;
      if (std::none_of(pc.begin(), pc.end(), [&](const ConvChild& c) { return c.index == i; }))
        throw InvariantError("parent link without matching child");
    }
    if (f.is_atomic()) {
      if (f.weights.size() != static_cast<std::size_t>(f.patch_w * f.patch_h) || f.depth != 0)
        throw InvariantError("malformed atom");
      continue;
    }
    if (f.out.size() != classes_ || f.weights.size() != f.children.size())
      throw InvariantError("malformed composite");
    if (f.children[0].dx != 0 || f.children[0].dy != 0) throw InvariantError("composite not in canonical form");
    unsigned depth = 0;
    std::vector<std::tuple<FeatureIndex, int, int>> key;
    for (std::size_t k = 0; k < f.children.size(); ++k) {
      const auto& ch = f.children[k];
      if (ch.index >= i) throw InvariantError("child does not precede its parent");
      if (k && f.children[k - 1].index >= ch.index) throw InvariantError("children not sorted");
      const auto& cp = features_[ch.index].parents;
      if (std::find(cp.begin(), cp.end(), static_cast<FeatureIndex>(i)) == cp.end())
        throw InvariantError("child missing back-link");
      depth = std::max(depth, features_[ch.index].depth + 1);
      key.emplace_back(ch.index, ch.dx, ch.dy);
    }
    if (depth != f.depth) throw InvariantError("stale depth");
    if (!seen.insert(key).second) throw InvariantError("duplicate composite");
  }
}

// --- activation -------------------------------------------------------------

ActivationMap conv_activate_atomic(const ConvFeature& f, ActivationFn fn, const Image& img, std::vector<double>* pre) {
  if (!f.is_atomic()) throw InvariantError("not an atomic feature");
  if (f.patch_w > img.width || f.patch_h > img.height) throw DimensionError("patch larger than image");
  ActivationMap m;
  m.region = {0, 0, img.width - f.patch_w + 1, img.height - f.patch_h + 1};
  m.values.resize(m.region.area());
  if (pre) pre->resize(m.values.size());
  std::size_t o = 0;
  for (int y = 0; y < m.region.h; ++y)
    for (int x = 0; x < m.region.w; ++x, ++o) {
      double s = f.bias;
      const double* w = f.weights.data();
      for (int v = 0; v < f.patch_h; ++v) {
        const double* row = &img.pixels[static_cast<std::size_t>((y + v) * img.width + x)];
        for (int u = 0; u < f.patch_w; ++u) s += *w++ * row[u];
      }
      if (pre) (*pre)[o] = s;
      m.values[o] = apply_activation(fn, s);
    }
  return m;
}

ActivationMap conv_activate_composite(const ConvFeature& f, ActivationFn fn,
                                      std::span<const ActivationMap* const> child_maps, std::vector<double>* pre) {
  if (child_maps.size() != f.children.size() || f.weights.size() != f.children.size())
    throw InvariantError("child map count does not match the composite");
  int x0 = -1 << 20, y0 = -1 << 20, x1 = 1 << 20, y1 = 1 << 20;
  for (std::size_t k = 0; k < f.children.size(); ++k) {
    const auto& r = child_maps[k]->region;
    x0 = std::max(x0, r.x0 - f.children[k].dx);
    y0 = std::max(y0, r.y0 - f.children[k].dy);
    x1 = std::min(x1, r.x0 + r.w - f.children[k].dx);
    y1 = std::min(y1, r.y0 + r.h - f.children[k].dy);
  }
  ActivationMap m;
  m.region = {x0, y0, x1 - x0, y1 - y0};
  if (m.region.empty()) throw DimensionError("composite has no valid position");
  m.values.resize(m.region.area());
  if (pre) pre->resize(m.values.size());
  std::size_t o = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x, ++o) {
      double s = f.bias;
      for (std::size_t k = 0; k < f.children.size(); ++k)
        s += f.weights[k] * child_maps[k]->at(x + f.children[k].dx, y + f.children[k].dy);
      if (pre) (*pre)[o] = s;
      m.values[o] = apply_activation(fn, s);
    }
  return m;
}

void conv_forward(const ConvNetwork& net, const Image& img, ConvForward& fwd) {
  if (img.width != net.width() || img.height != net.height())
    throw DimensionError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         ", network expects " + std::to_string(net.width()) + "x" + std::to_string(net.height()));
  const auto n = net.size();
  fwd.maps.resize(n);
  fwd.pre.resize(n);
  fwd.maxima.assign(n, 0.0);
  fwd.argmax.assign(n, 0);
  std::vector<const ActivationMap*> kids;
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    if (f.is_atomic()) {
      fwd.maps[i] = conv_activate_atomic(f, net.activation_fn(), img, &fwd.pre[i]);
    } else {
      kids.clear();
      for (const auto& ch : f.children) kids.push_back(&fwd.maps[ch.index]);
      fwd.maps[i] = conv_activate_composite(f, net.activation_fn(), kids, &fwd.pre[i]);
    }
    fwd.argmax[i] = fwd.maps[i].argmax();
    fwd.maxima[i] = fwd.maps[i].values[fwd.argmax[i]];
  }
  const auto c = net.num_classes();
  fwd.logits = net.biases();
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    if (f.is_atomic()) continue;
    for (std::size_t k = 0; k < c; ++k) fwd.logits[k] += f.out[k] * fwd.maxima[i];
  }
  const double top = *std::max_element(fwd.logits.begin(), fwd.logits.end());
  fwd.scores.resize(c);
  double z = 0.0;
  for (std::size_t k = 0; k < c; ++k) z += fwd.scores[k] = std::exp(fwd.logits[k] - top);
  for (auto& s : fwd.scores) s /= z;
  fwd.predicted = static_cast<int>(std::max_element(fwd.logits.begin(), fwd.logits.end()) - fwd.logits.begin());
}

ConvForward conv_forward(const ConvNetwork& net, const Image& img) {
  ConvForward fwd;
  conv_forward(net, img, fwd);
  return fwd;
}

double conv_loss(const ConvForward& fwd, int target) {
  return -std::log(std::max(fwd.scores.at(static_cast<std::size_t>(target)), 1e-300));
}

ConvGradients conv_gradients(const ConvNetwork& net, const Image& img, const ConvForward& fwd, int target) {
  const auto n = net.size();
  const auto c = net.num_classes();
  if (fwd.maps.size() != n) throw InvariantError("forward pass does not match the network");
  ConvGradients g;
  g.out.resize(n);
  g.weights.resize(n);
  g.bias.assign(n, 0.0);
  g.class_bias = fwd.scores;
  g.class_bias.at(static_cast<std::size_t>(target)) -= 1.0;
  const auto& delta = g.class_bias;

  // Error arriving at (position, amount) per feature.
  std::vector<std::vector<std::pair<std::size_t, double>>> incoming(n);
  for (FeatureIndex i = 0; i < n; ++i) {
    const auto& f = net[i];
    g.weights[i].assign(f.weights.size(), 0.0);
    if (f.is_atomic()) continue;
    g.out[i].resize(c);
    double e = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      g.out[i][k] = delta[k] * fwd.maxima[i];
      e += f.out[k] * delta[k];
    }
    if (e != 0.0) incoming[i].emplace_back(fwd.argmax[i], e);
  }
  for (FeatureIndex i = static_cast<FeatureIndex>(n); i-- > 0;) {
    const auto& f = net[i];
    const auto& map = fwd.maps[i];
    for (auto [pos, e] : incoming[i]) {
      const double d = e * activation_derivative(net.activation_fn(), fwd.pre[i][pos], map.values[pos]);
      if (d == 0.0) continue;
      g.bias[i] += d;
      const int x = map.x_of(pos), y = map.y_of(pos);
      if (f.is_atomic()) {
        std::size_t j = 0;
        for (int v = 0; v < f.patch_h; ++v)
          for (int u = 0; u < f.patch_w; ++u) g.weights[i][j++] += d * img.at(x + u, y + v);
        continue;
      }
      for (std::size_t k = 0; k < f.children.size(); ++k) {
        const auto& ch = f.children[k];
        const auto& cm = fwd.maps[ch.index];
        const auto cpos = cm.index(x + ch.dx, y + ch.dy);
        g.weights[i][k] += d * cm.values[cpos];
        incoming[ch.index].emplace_back(cpos, d * f.weights[k]);
      }
    }
  }
  return g;
}

void conv_backprop(ConvNetwork& net, const Image& img, const ConvForward& fwd, int target, double out_rate,
                   double internal_rate) {
  const auto g = conv_gradients(net, img, fwd, target);
  auto& b = net.biases();
  for (std::size_t k = 0; k < b.size(); ++k) b[k] -= out_rate * g.class_bias[k];
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    auto& f = net[i];
    for (std::size_t k = 0; k < f.out.size(); ++k) f.out[k] -= out_rate * g.out[i][k];
    if (internal_rate == 0.0) continue;
    for (std::size_t j = 0; j < f.weights.size(); ++j) f.weights[j] -= internal_rate * g.weights[i][j];
    f.bias -= internal_rate * g.bias[i];
  }
}

std::optional<FeatureIndex> conv_winner(const ConvNetwork& net, const ConvForward& fwd) {
  std::optional<FeatureIndex> best;
  double top = 0.0;
  const auto c = static_cast<std::size_t>(fwd.predicted);
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    if (net[i].is_atomic()) continue;
    const double v = net[i].out[c] * fwd.maxima[i];
    if (!best || v > top) {
      best = i;
      top = v;
    }
  }
  return best;
}

void reinforce_fitness(ConvNetwork& net, FeatureIndex winner, double reward, double alpha) {
  std::vector<char> done(net.size(), 0);
  std::vector<FeatureIndex> stack{winner};
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    if (done[i]) continue;
    done[i] = 1;
    net[i].fitness += alpha * (reward - net[i].fitness);
    for (const auto& ch : net[i].children) stack.push_back(ch.index);
  }
}

std::vector<double> conv_weight_fitness(const ConvNetwork& net) {
  std::vector<double> f(net.size(), 0.0);
  for (FeatureIndex i = static_cast<FeatureIndex>(net.size()); i-- > 0;) {
    double v = 0.0;
    for (double w : net[i].out) v += std::abs(w);
    for (auto p : net[i].parents) v = std::max(v, f[p]);
    f[i] = v;
  }
  return f;
}

// --- creation ---------------------------------------------------------------

std::optional<FeatureIndex> conv_create_atom(ConvNetwork& net, const Image& img, Rng& rng, std::uint64_t step,
                                             const ConvCreateOptions& opt) {
  std::vector<int> sizes;
  for (int s : opt.patch_sizes)
    if (s > 0 && s <= img.width && s <= img.height) sizes.push_back(s);
  if (sizes.empty()) return std::nullopt;
  const int s = sizes[uniform_index(rng, sizes.size())];
  const int x = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(img.width - s + 1)));
  const int y = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(img.height - s + 1)));
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(s * s));
  double sq = 0.0;
  for (int v = 0; v < s; ++v)
    for (int u = 0; u < s; ++u) {
      w.push_back(img.at(x + u, y + v));
      sq += w.back() * w.back();
    }
  if (!(sq > 0.0)) return std::nullopt;
  const double scale = std::sqrt(opt.norm_k / sq);
  for (auto& v : w) v *= scale;
  return net.add_atom(s, s, std::move(w), 0.0, step);
}

std::optional<FeatureIndex> conv_create_composite(ConvNetwork& net, const ConvForward& fwd,
                                                  std::span<const FeatureIndex> children, std::uint64_t step,
                                                  const ConvCreateOptions& opt) {
  if (children.size() < 2) return std::nullopt;
  const auto& anchor = fwd.maps.at(children[0]);
  const int ax = anchor.x_of(fwd.argmax[children[0]]);
  const int ay = anchor.y_of(fwd.argmax[children[0]]);
  std::vector<ConvChild> kids;
  std::vector<double> w;
  double sq = 0.0;
  for (auto c : children) {
    const auto& m = fwd.maps.at(c);
    kids.push_back({c, m.x_of(fwd.argmax[c]) - ax, m.y_of(fwd.argmax[c]) - ay});
    w.push_back(fwd.maxima[c]);
    sq += w.back() * w.back();
  }
  if (!(sq > 0.0)) return std::nullopt;
  if (net.find_composite(kids)) return std::nullopt;
  const double scale = std::sqrt(opt.norm_k / sq);
  double pre = -(opt.norm_k - opt.epsilon);
  for (std::size_t k = 0; k < w.size(); ++k) {
    pre += w[k] * w[k] * scale;
    w[k] *= scale;
  }
  if (opt.require_match && !(apply_activation(net.activation_fn(), pre) > opt.threshold)) return std::nullopt;
  return net.add_composite(std::move(kids), std::move(w), -(opt.norm_k - opt.epsilon), step);
}

// --- training ---------------------------------------------------------------

void ConvConfig::validate() const {
  population.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(create.norm_k > 0.0)) throw ConfigError("conv_norm_k must be positive");
  if (!(create.epsilon > 0.0 && create.epsilon < create.norm_k))
    throw ConfigError("conv_epsilon must lie in (0, conv_norm_k)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("conv_alpha must lie in [0, 1]");
  if (create.patch_sizes.empty()) throw ConfigError("conv_patch_sizes must not be empty");
  for (int s : create.patch_sizes)
    if (s <= 0) throw ConfigError("conv_patch_sizes must be positive");
}

ConvTrainer::ConvTrainer(ConvNetwork& net, ConvConfig cfg, std::uint64_t seed)
    : net_(net), cfg_(std::move(cfg)), rng_(seed), rate_(cfg_.learning_rate) {
  cfg_.validate();
  net_.set_activation_fn(cfg_.activation);
  if (cfg_.topology == Topology::Random) cfg_.create.require_match = false;
}

ConvStep ConvTrainer::step(const Image& img) {
  conv_forward(net_, img, fwd_);
  ConvStep out;
  out.predicted = fwd_.predicted;
  out.correct = fwd_.predicted == img.label;

  const bool grow = growing();
  if (grow && cfg_.selection == ConvSelection::Reinforcement)
    if (auto w = conv_winner(net_, fwd_)) reinforce_fitness(net_, *w, out.correct ? 1.0 : 0.0, cfg_.alpha);

  const double internal =
      cfg_.internal_learning_rate < 0.0 ? rate_ : cfg_.internal_learning_rate * rate_ / cfg_.learning_rate;
  conv_backprop(net_, img, fwd_, img.label, rate_, internal);

  if (grow) {
    const auto& pop = cfg_.population;
    const bool capped = cfg_.topology == Topology::Random;
    const double p = pop.creation_prob * (out.correct ? pop.correct_bias : pop.incorrect_bias);
    if (bernoulli(rng_.creation, p) && !(capped && net_.composite_count() >= pop.max_composite)) {
      // fwd_ only covers features that existed before this step.
      std::vector<FeatureIndex> pool;
      for (FeatureIndex i = 0; i < fwd_.maps.size(); ++i)
        if (capped || fwd_.maxima[i] > cfg_.create.threshold) pool.push_back(i);
      if (pool.size() >= pop.max_children) {
        auto kids = sample_distinct(rng_.creation, pool, pop.max_children);
        if (auto idx = conv_create_composite(net_, fwd_, kids, seen_, cfg_.create)) {
          net_[*idx].fitness = cfg_.initial_fitness;
          ++out.created;
        }
      }
    }
    if (bernoulli(rng_.creation, pop.atomic_extra_prob) && !(capped && net_.atomic_count() >= pop.max_atomic)) {
      if (auto idx = conv_create_atom(net_, img, rng_.creation, seen_, cfg_.create)) {
        net_[*idx].fitness = cfg_.initial_fitness;
        ++out.created;
      }
    }
  }
  ++seen_;
  if (grow && cfg_.topology == Topology::Guided && seen_ % cfg_.population.removal_interval == 0) {
    out.removed = trim();
    interval_start_ = seen_;
  }
  return out;
}

std::size_t ConvTrainer::trim() {
  const auto& pop = cfg_.population;
  const auto n = net_.size();
  std::size_t atoms = net_.atomic_count();
  std::size_t composites = n - atoms;
  if (atoms <= pop.max_atomic && composites <= pop.max_composite) return 0;

  std::vector<double> fit(n);
  if (cfg_.selection == ConvSelection::OutputWeight) {
    fit = conv_weight_fitness(net_);
  } else {
    for (FeatureIndex i = 0; i < n; ++i) fit[i] = net_[i].fitness;
  }
  std::vector<bool> marked(n, false);
  auto mark = [&](FeatureIndex root) {
    std::vector<FeatureIndex> stack{root};
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      if (marked[i]) continue;
      marked[i] = true;
      (net_[i].is_atomic() ? atoms : composites) -= 1;
      for (auto p : net_[i].parents) stack.push_back(p);
    }
  };
  auto shrink = [&](bool atomic, std::size_t& count, std::size_t cap) {
    for (bool allow_new : {false, true}) {
      if (count <= cap) return;
      std::vector<FeatureIndex> cand;
      for (FeatureIndex i = 0; i < n; ++i)
        if (!marked[i] && net_[i].is_atomic() == atomic && (net_[i].creation_step >= interval_start_) == allow_new)
          cand.push_back(i);
      std::sort(cand.begin(), cand.end(), [&](FeatureIndex a, FeatureIndex b) {
        return std::tie(fit[a], net_[a].creation_step, net_[a].id) < std::tie(fit[b], net_[b].creation_step, net_[b].id);
      });
      for (auto i : cand) {
        if (count <= cap) break;
        if (!marked[i]) mark(i);
      }
    }
  };
  shrink(true, atoms, pop.max_atomic);
  shrink(false, composites, pop.max_composite);
  return net_.remove(marked).size();
}

int conv_predict(const ConvNetwork& net, const Image& img) { return conv_forward(net, img).predicted; }

double conv_accuracy(const ConvNetwork& net, const ImageSet& set) {
  if (set.images.empty()) return 0.0;
  ConvForward fwd;
  std::size_t correct = 0;
  for (const auto& im : set.images) {
    conv_forward(net, im, fwd);
    if (fwd.predicted == im.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace adn
