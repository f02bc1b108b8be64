#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adn/conv.hpp"
#include "adn/error.hpp"
#include "adn/model_io.hpp"
#include "helpers.hpp"

using namespace adn;

namespace {

Image noise_image(int w, int h, Rng& rng, int label = 0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Image im{w, h, {}, label};
  for (int i = 0; i < w * h; ++i) im.pixels.push_back(n(rng));
  return im;
}

std::vector<double> normals(std::size_t n, Rng& rng, double sd) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Atoms of side 2..3 then composites over 2..3 earlier features with small
// random offsets; every output weight random.
ConvNetwork random_conv(int w, int h, std::size_t classes, std::size_t atoms, std::size_t total, Rng& rng,
                        ActivationFn fn) {
  ConvNetwork net(w, h, classes, fn);
  while (net.size() < atoms) {
    const int s = 2 + static_cast<int>(uniform_index(rng, 2));
    net.add_atom(s, s, normals(static_cast<std::size_t>(s * s), rng, 0.5), normals(1, rng, 0.3)[0], 0);
  }
  int guard = 0;
  while (net.size() < total && ++guard < 10000) {
    const auto k = 2 + uniform_index(rng, 2);
    std::vector<FeatureIndex> pool(net.size());
    std::iota(pool.begin(), pool.end(), FeatureIndex{0});
    auto picked = sample_distinct(rng, pool, k);
    std::vector<ConvChild> ch;
    for (auto p : picked)
      ch.push_back({p, static_cast<int>(uniform_index(rng, 5)) - 2, static_cast<int>(uniform_index(rng, 5)) - 2});
    if (net.find_composite(ch)) continue;
    try {
      net.add_composite(ch, normals(k, rng, 0.6), normals(1, rng, 0.3)[0], 0);
    } catch (const DimensionError&) {
      continue;
    }
  }
  for (FeatureIndex i = 0; i < net.size(); ++i)
    for (auto& o : net[i].out) o = normals(1, rng, 0.5)[0];
  for (auto& b : net.biases()) b = normals(1, rng, 0.2)[0];
  return net;
}

double naive_atom(const ConvFeature& f, const Image& img, int x, int y) {
  double s = f.bias;
  for (int v = 0; v < f.patch_h; ++v)
    for (int u = 0; u < f.patch_w; ++u) s += f.weights[static_cast<std::size_t>(v * f.patch_w + u)] * img.at(x + u, y + v);
  return s;
}

}  // namespace

TEST_CASE("conv atom: 1x1 identity kernel reproduces the image") {
  Rng rng(3);
  auto img = noise_image(6, 5, rng);
  ConvNetwork net(6, 5, 2, ActivationFn::Identity);
  net.add_atom(1, 1, {1.0}, 0.0, 0);
  auto m = conv_activate_atomic(net[0], ActivationFn::Identity, img);
  CHECK(m.region == Rect{0, 0, 6, 5});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) CHECK(m.at(x, y) == img.at(x, y));
}

TEST_CASE("conv atom: zero image with negative bias under relu") {
  Image img{8, 8, std::vector<double>(64, 0.0), 0};
  ConvNetwork net(8, 8, 2);
  net.add_atom(3, 3, std::vector<double>(9, 0.4), -1.0, 0);
  auto m = conv_activate_atomic(net[0], ActivationFn::Relu, img);
  CHECK(m.values.size() == 36);
  for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("conv atom: matches a naive convolution") {
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    auto img = noise_image(12, 12, rng);
    ConvNetwork net(12, 12, 3, ActivationFn::Tanh);
    net.add_atom(5, 5, normals(25, rng, 1.0), 0.3, 0);
    std::vector<double> pre;
    auto m = conv_activate_atomic(net[0], ActivationFn::Tanh, img, &pre);
    REQUIRE(m.region == Rect{0, 0, 8, 8});
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double s = naive_atom(net[0], img, x, y);
        CHECK(std::abs(pre[m.index(x, y)] - s) <= 1e-12);
        CHECK(std::abs(m.at(x, y) - std::tanh(s)) <= 1e-12);
      }
  }
}

TEST_CASE("conv atom: patch larger than image") {
  ConvNetwork net(4, 4, 2);
  CHECK_THROWS_AS(net.add_atom(5, 5, std::vector<double>(25, 0.0), 0.0, 0), DimensionError);
  ConvFeature f;
  f.patch_w = 5;
  f.patch_h = 3;
  f.weights.assign(15, 0.1);
  Image img{4, 4, std::vector<double>(16, 1.0), 0};
  CHECK_THROWS_AS(conv_activate_atomic(f, ActivationFn::Relu, img), DimensionError);

  ConvNetwork other(10, 10, 2);
  other.add_atom(3, 3, std::vector<double>(9, 0.1), 0.0, 0);
  CHECK_THROWS_AS(conv_forward(other, img), DimensionError);
}

TEST_CASE("conv composite: single child at zero offset is the identity") {
  Rng rng(5);
  ActivationMap child;
  child.region = {1, 2, 4, 3};
  child.values = normals(12, rng, 1.0);
  for (auto& v : child.values) v = std::abs(v);
  ConvFeature f;
  f.children = {{0, 0, 0}};
  f.weights = {1.0};
  f.bias = 0.0;
  const ActivationMap* maps[] = {&child};
  auto m = conv_activate_composite(f, ActivationFn::Relu, maps);
  CHECK(m.region == child.region);
  CHECK(m.values == child.values);
}

TEST_CASE("conv composite: shifted sum oracle") {
  Rng rng(7);
  ActivationMap a, b;
  a.region = {0, 0, 6, 6};
  b.region = {0, 0, 6, 6};
  a.values = normals(36, rng, 1.0);
  b.values = normals(36, rng, 1.0);
  ConvFeature f;
  f.children = {{0, 1, 0}, {1, 0, 1}};
  f.weights = {0.7, -0.4};
  f.bias = 0.05;
  const ActivationMap* maps[] = {&a, &b};
  std::vector<double> pre;
  auto m = conv_activate_composite(f, ActivationFn::Identity, maps, &pre);
  // Position p reads a at p+(1,0) and b at p+(0,1): x < 5, y < 5.
  CHECK(m.region == Rect{0, 0, 5, 5});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const double want = 0.7 * a.at(x + 1, y) - 0.4 * b.at(x, y + 1) + 0.05;
      CHECK(std::abs(m.at(x, y) - want) <= 1e-12);
    }

  f.children = {{0, 6, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(conv_activate_composite(f, ActivationFn::Identity, maps), DimensionError);
}

TEST_CASE("conv network: composite regions and canonical children") {
  ConvNetwork net(10, 10, 2);
  net.add_atom(3, 3, std::vector<double>(9, 0.1), 0.0, 0);  // region 8x8
  net.add_atom(5, 5, std::vector<double>(25, 0.1), 0.0, 0);  // region 6x6
  const auto c = net.add_composite({{1, 2, 1}, {0, 3, 3}}, {0.2, 0.9}, -0.1, 0);
  const auto& f = net[c];
  // canonical: sorted by index, first offset zero, weights permuted along
  REQUIRE(f.children.size() == 2);
  CHECK(f.children[0] == ConvChild{0, 0, 0});
  CHECK(f.children[1] == ConvChild{1, -1, -2});
  CHECK(f.weights == std::vector<double>{0.9, 0.2});
  CHECK(f.region == Rect{1, 2, 6, 6});
  CHECK(net.find_composite({{0, 5, 5}, {1, 4, 3}}) == c);
  CHECK_FALSE(net.find_composite({{0, 0, 0}, {1, 1, 2}}));
  CHECK_THROWS_AS(net.add_composite({{0, 9, 0}, {1, 0, 0}}, {1, 1}, 0, 0), DimensionError);
  net.check_invariants();
}

TEST_CASE("conv classify: zero weights give uniform scores") {
  Rng rng(2);
  ConvNetwork net(8, 8, 4);
  net.add_atom(3, 3, normals(9, rng, 1.0), 0.0, 0);
  net.add_atom(2, 2, normals(4, rng, 1.0), 0.0, 0);
  net.add_composite({{0, 0, 0}, {1, 1, 1}}, {1.0, 1.0}, 0.0, 0);
  auto fwd = conv_forward(net, noise_image(8, 8, rng));
  for (double s : fwd.scores) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("conv classify: a single strong composite decides the class") {
  Image img{8, 8, std::vector<double>(64, 0.0), 0};
  img.pixels[4 * 8 + 3] = 1.0;  // (3,4)
  ConvNetwork net(8, 8, 10);
  net.add_atom(1, 1, {1.0}, 0.0, 0);
  net.add_atom(1, 1, {1.0}, 0.0, 0);
  const auto c = net.add_composite({{0, 0, 0}, {1, 0, 0}}, {0.5, 0.5}, 0.0, 0);
  net[c].out[7] = 10.0;
  auto fwd = conv_forward(net, img);
  CHECK(fwd.predicted == 7);
  CHECK(fwd.maxima[c] == doctest::Approx(1.0));
  const auto& m = fwd.maps[c];
  CHECK(m.x_of(fwd.argmax[c]) == 3);
  CHECK(m.y_of(fwd.argmax[c]) == 4);
  // logits from the maxima of composites only
  for (std::size_t k = 0; k < 10; ++k) CHECK(fwd.logits[k] == doctest::Approx(k == 7 ? 10.0 : 0.0));
  auto sm = testutil::softmax(fwd.logits);
  for (std::size_t k = 0; k < 10; ++k) CHECK(fwd.scores[k] == doctest::Approx(sm[k]).epsilon(1e-12));
}

TEST_CASE("conv forward: maxima and argmax agree with the maps") {
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    auto net = random_conv(10, 9, 3, 4, 12, rng, t % 2 ? ActivationFn::Tanh : ActivationFn::Relu);
    auto img = noise_image(10, 9, rng);
    auto fwd = conv_forward(net, img);
    std::vector<double> logits = net.biases();
    for (FeatureIndex i = 0; i < net.size(); ++i) {
      const auto& v = fwd.maps[i].values;
      const auto it = std::max_element(v.begin(), v.end());
      CHECK(fwd.maxima[i] == *it);
      CHECK(fwd.argmax[i] == static_cast<std::size_t>(it - v.begin()));
      CHECK(fwd.maps[i].region == net[i].region);
      if (!net[i].is_atomic())
        for (std::size_t k = 0; k < 3; ++k) logits[k] += net[i].out[k] * fwd.maxima[i];
    }
    for (std::size_t k = 0; k < 3; ++k) CHECK(fwd.logits[k] == doctest::Approx(logits[k]).epsilon(1e-12));
  }
}

TEST_CASE("conv forward: translation covariance of atom maps") {
  Rng rng(23);
  auto img = noise_image(12, 12, rng);
  Image shifted{12, 12, std::vector<double>(144, 0.0), 0};
  const int dx = 2, dy = 1;
  for (int y = 0; y + dy < 12; ++y)
    for (int x = 0; x + dx < 12; ++x) shifted.pixels[static_cast<std::size_t>((y + dy) * 12 + x + dx)] = img.at(x, y);
  ConvNetwork net(12, 12, 2, ActivationFn::Tanh);
  net.add_atom(3, 3, normals(9, rng, 1.0), 0.1, 0);
  auto a = conv_activate_atomic(net[0], ActivationFn::Tanh, img);
  auto b = conv_activate_atomic(net[0], ActivationFn::Tanh, shifted);
  for (int y = 0; y + dy < 10; ++y)
    for (int x = 0; x + dx < 10; ++x) CHECK(b.at(x + dx, y + dy) == a.at(x, y));
}

TEST_CASE("conv backprop: zero internal rate changes only the output layer") {
  Rng rng(29);
  auto net = random_conv(9, 9, 3, 4, 10, rng, ActivationFn::Relu);
  const auto before = net;
  auto img = noise_image(9, 9, rng);
  auto fwd = conv_forward(net, img);
  conv_backprop(net, img, fwd, 1, 0.1, 0.0);
  bool out_changed = false;
  for (FeatureIndex i = 0; i < net.size(); ++i) {
    CHECK(net[i].weights == before[i].weights);
    CHECK(net[i].bias == before[i].bias);
    if (net[i].out != before[i].out) out_changed = true;
  }
  CHECK(out_changed);
  CHECK(net.biases() != before.biases());
}

// Central differences against conv_gradients. A parameter is skipped when
// the perturbation moves some argmax or the one-sided slopes disagree (a
// relu kink); too many skips would fail the count check.
TEST_CASE("conv backprop: gradients match finite differences") {
  Rng rng(31);
  std::size_t checked = 0, skipped = 0;
  const double h = 1e-6;
  for (int t = 0; t < 30; ++t) {
    const auto fn = t % 2 ? ActivationFn::Tanh : ActivationFn::Relu;
    auto net = random_conv(9, 8, 3, 3, 3 + 2 + uniform_index(rng, 6), rng, fn);
    auto img = noise_image(9, 8, rng);
    const int target = static_cast<int>(uniform_index(rng, 3));
    const auto fwd = conv_forward(net, img);
    const auto g = conv_gradients(net, img, fwd, target);
    const double l0 = conv_loss(fwd, target);

    auto probe = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      auto fp = conv_forward(net, img);
      p = saved - h;
      auto fm = conv_forward(net, img);
      p = saved;
      const double lp = conv_loss(fp, target), lm = conv_loss(fm, target);
      const double right = (lp - l0) / h, left = (l0 - lm) / h;
      if (fp.argmax != fwd.argmax || fm.argmax != fwd.argmax ||
          std::abs(right - left) > 1e-4 * std::max(1.0, std::abs(right))) {
        ++skipped;
        return;
      }
      const double num = (lp - lm) / (2 * h);
      CHECK(std::abs(num - analytic) <= 1e-3 * std::max(1.0, std::abs(num)));
      ++checked;
    };

    for (std::size_t k = 0; k < net.biases().size(); ++k) probe(net.biases()[k], g.class_bias[k]);
    for (FeatureIndex i = 0; i < net.size(); ++i) {
      auto& f = net[i];
      for (std::size_t j = 0; j < f.weights.size(); ++j) probe(f.weights[j], g.weights[i][j]);
      probe(f.bias, g.bias[i]);
      for (std::size_t k = 0; k < f.out.size(); ++k) probe(f.out[k], g.out[i][k]);
    }
  }
  CHECK(checked > 10 * skipped);
  CHECK(checked > 1000);
}

TEST_CASE("conv backprop: a small step lowers the loss") {
  Rng rng(37);
  int lower = 0, runs = 0;
  for (int t = 0; t < 30; ++t) {
    auto net = random_conv(9, 9, 3, 3, 8, rng, ActivationFn::Tanh);
    auto img = noise_image(9, 9, rng);
    auto fwd = conv_forward(net, img);
    const double l0 = conv_loss(fwd, 2);
    conv_backprop(net, img, fwd, 2, 1e-3, 1e-3);
    ++runs;
    if (conv_loss(conv_forward(net, img), 2) < l0) ++lower;
  }
  CHECK(lower == runs);
}

TEST_CASE("conv creation: atoms are unit patches scaled to norm_k") {
  Rng rng(41);
  ConvCreateOptions opt;
  opt.norm_k = 2.5;
  for (int t = 0; t < 20; ++t) {
    auto img = noise_image(10, 10, rng);
    ConvNetwork net(10, 10, 2);
    auto i = conv_create_atom(net, img, rng, 3, opt);
    REQUIRE(i);
    const auto& f = net[*i];
    double sq = 0.0;
    for (double w : f.weights) sq += w * w;
    CHECK(sq == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(f.bias == 0.0);
    CHECK(f.patch_w == f.patch_h);
    CHECK(std::find(opt.patch_sizes.begin(), opt.patch_sizes.end(), f.patch_w) != opt.patch_sizes.end());
    CHECK(f.creation_step == 3);
    // its source patch is somewhere in the image, proportional to the weights
    bool found = false;
    for (int y = 0; y < f.region.h && !found; ++y)
      for (int x = 0; x < f.region.w && !found; ++x) {
        double pp = 0.0;
        for (int v = 0; v < f.patch_h; ++v)
          for (int u = 0; u < f.patch_w; ++u) pp += img.at(x + u, y + v) * img.at(x + u, y + v);
        const double s = std::sqrt(2.5 / pp);
        bool same = true;
        for (int v = 0; v < f.patch_h && same; ++v)
          for (int u = 0; u < f.patch_w && same; ++u)
            same = std::abs(f.weights[static_cast<std::size_t>(v * f.patch_w + u)] - s * img.at(x + u, y + v)) < 1e-12;
        if (same) {
          found = true;
          CHECK(naive_atom(f, img, x, y) == doctest::Approx(std::sqrt(2.5 * pp)).epsilon(1e-12));
        }
      }
    CHECK(found);
  }
}

TEST_CASE("conv creation: atom response equals norm_k on a normalized patch") {
  Rng rng(43);
  ConvCreateOptions opt;
  opt.norm_k = 1.7;
  opt.patch_sizes = {3};
  // constant image whose every 3x3 patch has squared norm norm_k
  Image img{7, 7, std::vector<double>(49, std::sqrt(1.7 / 9.0)), 0};
  ConvNetwork net(7, 7, 2, ActivationFn::Identity);
  auto i = conv_create_atom(net, img, rng, 0, opt);
  REQUIRE(i);
  auto m = conv_activate_atomic(net[*i], ActivationFn::Identity, img);
  for (double v : m.values) CHECK(v == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("conv creation: zero patch gives no atom") {
  Rng rng(1);
  Image img{6, 6, std::vector<double>(36, 0.0), 0};
  ConvNetwork net(6, 6, 2);
  CHECK_FALSE(conv_create_atom(net, img, rng, 0, {}));
  CHECK(net.size() == 0);
}

TEST_CASE("conv creation: composites bind children at their argmax and fire there") {
  Rng rng(47);
  ConvCreateOptions opt;
  opt.norm_k = 1.0;
  opt.epsilon = 0.1;
  opt.threshold = 0.5;
  int made = 0;
  for (int t = 0; t < 30; ++t) {
    auto img = noise_image(10, 10, rng);
    ConvNetwork net(10, 10, 3);
    for (int a = 0; a < 3; ++a) conv_create_atom(net, img, rng, 0, opt);
    REQUIRE(net.size() == 3);
    auto fwd = conv_forward(net, img);
    const FeatureIndex kids[] = {0, 2};
    auto c = conv_create_composite(net, fwd, kids, 1, opt);
    if (!c) continue;
    ++made;
    const auto& f = net[*c];
    double sq = 0.0;
    for (double w : f.weights) sq += w * w;
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.bias == doctest::Approx(-(1.0 - 0.1)));
    // the anchor where every child sits at its own argmax
    const auto& m0 = fwd.maps[0];
    const int x = m0.x_of(fwd.argmax[0]), y = m0.y_of(fwd.argmax[0]);
    for (const auto& ch : f.children) {
      const auto& cm = fwd.maps[ch.index];
      CHECK(cm.x_of(fwd.argmax[ch.index]) == x + ch.dx);
      CHECK(cm.y_of(fwd.argmax[ch.index]) == y + ch.dy);
    }
    auto after = conv_forward(net, img);
    CHECK(after.maps[*c].at(x, y) > opt.threshold);
    // the same binding again is a duplicate
    CHECK_FALSE(conv_create_composite(net, after, kids, 2, opt));
  }
  CHECK(made > 10);
}

TEST_CASE("conv reinforcement: update rule and reach") {
  ConvNetwork net(8, 8, 2);
  net.add_atom(2, 2, std::vector<double>(4, 0.5), 0, 0);
  net.add_atom(2, 2, std::vector<double>(4, -0.5), 0, 0);
  net.add_atom(3, 3, std::vector<double>(9, 0.1), 0, 0);
  const auto a = net.add_composite({{0, 0, 0}, {1, 1, 0}}, {1, 1}, 0, 0);
  const auto b = net.add_composite({{0, 0, 0}, {2, 0, 1}}, {1, 1}, 0, 0);
  const auto top = net.add_composite({{a, 0, 0}, {b, 0, 0}}, {1, 1}, 0, 0);

  reinforce_fitness(net, top, 1.0, 1.0);
  for (FeatureIndex i = 0; i < net.size(); ++i) CHECK(net[i].fitness == 1.0);  // diamond: atom 0 once

  const auto snapshot = net;
  reinforce_fitness(net, top, 0.0, 0.0);
  for (FeatureIndex i = 0; i < net.size(); ++i) CHECK(net[i].fitness == snapshot[i].fitness);

  for (FeatureIndex i = 0; i < net.size(); ++i) net[i].fitness = 0.0;
  reinforce_fitness(net, a, 1.0, 0.5);
  CHECK(net[a].fitness == 0.5);
  CHECK(net[0].fitness == 0.5);
  CHECK(net[1].fitness == 0.5);
  CHECK(net[2].fitness == 0.0);
  CHECK(net[b].fitness == 0.0);
  CHECK(net[top].fitness == 0.0);

  for (int s = 0; s < 200; ++s) reinforce_fitness(net, top, 0.7, 0.1);
  for (FeatureIndex i = 0; i < net.size(); ++i) CHECK(std::abs(net[i].fitness - 0.7) < 1e-6);

  // stays within the hull of the start value and the rewards
  Rng rng(53);
  for (FeatureIndex i = 0; i < net.size(); ++i) net[i].fitness = 0.3;
  for (int s = 0; s < 500; ++s) {
    reinforce_fitness(net, top, bernoulli(rng, 0.5) ? 1.0 : 0.0, uniform01(rng));
    for (FeatureIndex i = 0; i < net.size(); ++i) {
      CHECK(net[i].fitness >= 0.0);
      CHECK(net[i].fitness <= 1.0);
    }
  }
}

TEST_CASE("conv winner: largest predicted-class contribution") {
  Image img{6, 6, std::vector<double>(36, 1.0), 0};
  ConvNetwork net(6, 6, 2, ActivationFn::Identity);
  net.add_atom(1, 1, {1.0}, 0, 0);
  net.add_atom(1, 1, {1.0}, 0, 0);
  const auto a = net.add_composite({{0, 0, 0}, {1, 0, 0}}, {0.5, 0.5}, 0, 0);  // max 1
  const auto b = net.add_composite({{0, 0, 0}, {1, 1, 0}}, {1.0, 1.0}, 0, 0);  // max 2
  net[a].out = {3.0, 0.0};
  net[b].out = {1.0, 0.5};
  auto fwd = conv_forward(net, img);
  REQUIRE(fwd.predicted == 0);
  CHECK(conv_winner(net, fwd) == a);  // 3*1 > 1*2
  ConvNetwork empty(6, 6, 2);
  CHECK_FALSE(conv_winner(empty, conv_forward(empty, img)));
}

TEST_CASE("conv trainer: caps hold after trims and new features start normalized") {
  for (auto topo : {Topology::Guided, Topology::Random}) {
    auto set = make_shapes(300, 5);
    fit_pixel_scaling(set).apply(set);
    ConvNetwork net(set.width, set.height, set.num_classes);
    ConvConfig cfg;
    cfg.topology = topo;
    cfg.population.max_atomic = 12;
    cfg.population.max_composite = 20;
    cfg.population.removal_interval = 100;
    cfg.create.norm_k = 1.0;
    ConvTrainer tr(net, cfg, 9);
    for (const auto& im : set.images) {
      const auto id_before = net.next_id();
      tr.step(im);
      // random caps at creation; guided overshoots until the next trim
      if (topo == Topology::Random || tr.instances_seen() % 100 == 0) {
        CHECK(net.atomic_count() <= 12);
        CHECK(net.composite_count() <= 20);
      }
      for (FeatureIndex i = 0; i < net.size(); ++i)
        if (net[i].id >= id_before) {
          double sq = 0.0;
          for (double w : net[i].weights) sq += w * w;
          CHECK(sq == doctest::Approx(1.0).epsilon(1e-9));
          if (topo == Topology::Random && !net[i].is_atomic()) CHECK(net[i].bias == doctest::Approx(-0.9));
        }
      net.check_invariants();
    }
    CHECK(tr.instances_seen() == 300);
    CHECK(net.composite_count() > 0);
  }
}

TEST_CASE("conv trainer: same seed, same network") {
  auto set = make_shapes(150, 8);
  fit_pixel_scaling(set).apply(set);
  auto run = [&] {
    ConvNetwork net(set.width, set.height, set.num_classes);
    ConvConfig cfg;
    cfg.population.max_atomic = 10;
    cfg.population.max_composite = 15;
    ConvTrainer tr(net, cfg, 4);
    for (const auto& im : set.images) tr.step(im);
    return conv_network_to_json(net).dump();
  };
  CHECK(run() == run());
}

TEST_CASE("conv config: validation") {
  ConvConfig c;
  CHECK_NOTHROW(c.validate());
  c.create.epsilon = c.create.norm_k;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("conv model: json round trip") {
  Rng rng(59);
  auto net = random_conv(9, 9, 4, 4, 12, rng, ActivationFn::Tanh);
  for (FeatureIndex i = 0; i < net.size(); ++i) net[i].fitness = uniform01(rng);
  ConvModel m{net, {0.25, 1.75}};
  const auto j = model_to_json(m);
  auto back = conv_model_from_json(j);
  CHECK(model_to_json(back) == j);
  CHECK(back.scaling.mean == 0.25);
  CHECK(back.scaling.stddev == 1.75);
  REQUIRE(back.network.size() == net.size());
  for (int t = 0; t < 5; ++t) {
    auto img = noise_image(9, 9, rng);
    CHECK(conv_forward(back.network, img).logits == conv_forward(net, img).logits);
  }
}
