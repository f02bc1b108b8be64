#include <cmath>

#include "adn/error.hpp"
#include "adn/population.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace adn;
using namespace testutil;

namespace {

// Binomial count within three standard deviations of its mean.
bool within_3sigma(double count, double n, double p) {
  return std::abs(count - n * p) <= 3.0 * std::sqrt(n * p * (1 - p));
}

}  // namespace

TEST_CASE("zero probabilities never create anything") {
  Rng rng(1);
  auto schema = mixed_schema(3, 1, 2);
  auto net = random_symbolic(schema, 6, 10, rng);
  PopulationConfig cfg;
  cfg.creation_prob = 0;
  cfg.atomic_extra_prob = 0;
  for (int k = 0; k < 2000; ++k) {
    auto x = random_instance(schema, rng);
    auto out = maybe_create(net, activate_discrete(net, x), x, k % 2 == 0, rng, k, cfg);
    CHECK(out.created.empty());
  }
  CHECK(net.size() == 10);
}

TEST_CASE("covering atom matches the instance that made it") {
  Rng rng(2);
  auto schema = mixed_schema(4, 2, 2);
  PopulationConfig cfg;
  cfg.creation_prob = 0;
  cfg.atomic_extra_prob = 1;
  int geq = 0, leq = 0;
  FeatureNetwork net(schema);
  for (int k = 0; k < 400; ++k) {
    auto x = random_instance(schema, rng);
    auto out = maybe_create(net, activate_discrete(net, x), x, false, rng, k, cfg);
    for (auto i : out.created) {
      const auto& p = *net[i].predicate;
      CHECK(p.holds(x.values[p.attribute]));
      CHECK(p.boundary == x.values[p.attribute]);
      if (schema.attributes[p.attribute].kind == AttributeKind::Nominal) CHECK(p.kind == PredicateKind::Equals);
      geq += p.kind == PredicateKind::Geq;
      leq += p.kind == PredicateKind::Leq;
    }
  }
  CHECK(geq > 50);
  CHECK(leq > 50);

  FeatureNetwork one(mixed_schema(4, 0, 2));
  Instance x{{0.1, 0.2, 0.3, 0.42}, 0};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    FeatureNetwork n(mixed_schema(4, 0, 2));
    auto out = maybe_create(n, activate_discrete(n, x), x, false, r, 0, cfg);
    REQUIRE(out.created.size() == 1);
    const auto& p = *n[out.created[0]].predicate;
    if (p.attribute == 3) CHECK(p.boundary == 0.42);
  }
}

TEST_CASE("composite trigger rate follows the error bias") {
  Rng rng(3);
  auto schema = mixed_schema(2, 0, 2);
  FeatureNetwork net(schema);
  PopulationConfig cfg;
  cfg.atomic_extra_prob = 0;
  ActivationState st = activate_discrete(net, Instance{{0.5, 0.5}, 0});
  int wrong = 0, right = 0;
  for (int k = 0; k < 10000; ++k) {
    wrong += maybe_create(net, st, Instance{{0.5, 0.5}, 0}, false, rng, k, cfg).composite_triggered;
    right += maybe_create(net, st, Instance{{0.5, 0.5}, 0}, true, rng, k, cfg).composite_triggered;
  }
  CHECK(within_3sigma(wrong, 1e4, 0.075));
  CHECK(within_3sigma(right, 1e4, 0.025));
}

TEST_CASE("composite needs enough active features and uses distinct children") {
  Rng rng(4);
  auto schema = mixed_schema(3, 0, 2);
  FeatureNetwork net(schema);
  net.add_atom({0, PredicateKind::Geq, 0.0}, 0);
  PopulationConfig cfg;
  cfg.creation_prob = 1;
  cfg.incorrect_bias = 1;
  cfg.atomic_extra_prob = 0;
  Instance x{{0.5, 0.5, 0.5}, 0};
  CHECK(maybe_create(net, activate_discrete(net, x), x, false, rng, 1, cfg).created.empty());
  net.add_atom({1, PredicateKind::Geq, 0.0}, 1);
  net.add_atom({2, PredicateKind::Geq, 0.0}, 2);
  for (int k = 0; k < 20; ++k) maybe_create(net, activate_discrete(net, x), x, false, rng, 3 + k, cfg);
  CHECK(net.composite_count() >= 3);
  net.check_invariants();
  for (const auto& f : net.features())
    if (!f.is_atomic()) {
      CHECK(f.children.size() == 2);
      for (const auto& l : f.out) CHECK(l.weight == 0.0);
    }
}

TEST_CASE("duplicate check: empty, order-insensitive, agrees with a global scan") {
  FeatureNetwork net(mixed_schema(2, 0, 2));
  auto a = net.add_atom({0, PredicateKind::Geq, 0.5}, 0);
  auto b = net.add_atom({1, PredicateKind::Geq, 0.5}, 1);
  FeatureIndex ab[] = {a, b}, ba[] = {b, a};
  CHECK_FALSE(is_duplicate(net, ab));
  net.add_composite({a, b}, 2);
  CHECK(is_duplicate(net, ba));

  Rng rng(5);
  auto schema = mixed_schema(3, 2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    auto r = random_symbolic(schema, 10, 60, rng);
    for (int q = 0; q < 200; ++q) {
      std::vector<FeatureIndex> pool(r.size());
      for (FeatureIndex i = 0; i < pool.size(); ++i) pool[i] = i;
      auto kids = sample_distinct(rng, pool, 2 + uniform_index(rng, 2));
      std::multiset<FeatureIndex> want(kids.begin(), kids.end());
      bool scan = false;
      for (const auto& f : r.features())
        if (!f.is_atomic() && std::multiset<FeatureIndex>(f.children.begin(), f.children.end()) == want) scan = true;
      CHECK(is_duplicate(r, kids) == scan);
    }
    // and every existing composite finds itself
    for (const auto& f : r.features())
      if (!f.is_atomic()) CHECK(is_duplicate(r, f.children));
  }
}

TEST_CASE("trim leaves populations under their caps alone") {
  Rng rng(6);
  auto net = random_symbolic(mixed_schema(3, 0, 2), 5, 12, rng);
  PopulationConfig cfg;
  CHECK(trim_population(net, compute_fitness(net), cfg, 1000, 1000).empty());
  CHECK(net.size() == 12);
}

TEST_CASE("trim removes the lowest-valued composite") {
  FeatureNetwork net(mixed_schema(4, 0, 2));
  for (std::uint32_t a = 0; a < 4; ++a) net.add_atom({a, PredicateKind::Geq, 0.5}, a);
  auto c1 = net.add_composite({0, 1}, 4);
  auto c2 = net.add_composite({1, 2}, 5);
  auto c3 = net.add_composite({2, 3}, 6);
  const auto lost = net[c2].id;
  std::vector<double> f(net.size(), 1.0);
  f[c1] = 0.9;
  f[c2] = 0.1;
  f[c3] = 0.5;
  PopulationConfig cfg;
  cfg.max_composite = 2;
  auto removed = trim_population(net, f, cfg, 100, 100);
  CHECK(removed == std::vector<FeatureId>{lost});
  CHECK(net.composite_count() == 2);
}

TEST_CASE("trim ties go to the oldest, new features wait one interval") {
  FeatureNetwork net(mixed_schema(4, 0, 2));
  for (std::uint32_t a = 0; a < 4; ++a) net.add_atom({a, PredicateKind::Geq, 0.5}, 10 * a);
  std::vector<double> f(4, 0.0);
  PopulationConfig cfg;
  cfg.max_atomic = 3;
  auto removed = trim_population(net, f, cfg, 100, 100);
  CHECK(removed == std::vector<FeatureId>{1});

  // atoms created at or after the interval start are spared while anything older is left
  FeatureNetwork n2(mixed_schema(4, 0, 2));
  for (std::uint32_t a = 0; a < 4; ++a) n2.add_atom({a, PredicateKind::Geq, 0.5}, 10 * a);
  cfg.max_atomic = 2;
  std::vector<double> g{0.9, 0.8, 0.0, 0.0};
  removed = trim_population(n2, g, cfg, 20, 40);
  CHECK(std::set<FeatureId>(removed.begin(), removed.end()) == std::set<FeatureId>{1, 2});

  // protection until a later step works the same way
  FeatureNetwork n3(mixed_schema(4, 0, 2));
  for (std::uint32_t a = 0; a < 4; ++a) n3.add_atom({a, PredicateKind::Geq, 0.5}, 0);
  n3[0].protected_until = 500;
  cfg.max_atomic = 3;
  removed = trim_population(n3, std::vector<double>(4, 0.0), cfg, 100, 100);
  CHECK(removed == std::vector<FeatureId>{2});
}

TEST_CASE("trim cascades, keeps caps and never leaves dangling references") {
  Rng rng(7);
  auto schema = mixed_schema(5, 2, 3);
  for (int trial = 0; trial < 30; ++trial) {
    auto net = random_symbolic(schema, 30, 150, rng);
    randomize_outputs(net, rng);
    PopulationConfig cfg;
    cfg.max_atomic = 10 + uniform_index(rng, 20);
    cfg.max_composite = 20 + uniform_index(rng, 100);
    trim_population(net, compute_fitness(net), cfg, 10000, 10000);
    CHECK(net.atomic_count() <= cfg.max_atomic);
    CHECK(net.composite_count() <= cfg.max_composite);
    net.check_invariants();
  }
}

TEST_CASE("sparse link class choice") {
  FeatureNetwork net(mixed_schema(1, 0, 3));
  net.set_sparse_outputs(true);
  auto a = net.add_atom({0, PredicateKind::Geq, 0.0}, 0);
  auto st = activate_discrete(net, Instance{{0.5}, 0});
  PopulationConfig cfg;
  cfg.sparse_out_limit = 1;
  Rng rng(8);
  const double only2[] = {0.0, 0.0, -0.4};
  for (int k = 0; k < 50; ++k) {
    net[a].out.clear();
    CHECK(sparse_link_step(net, st, only2, rng, k, cfg) == 1);
    CHECK(net[a].out.at(0).output == 2);
    CHECK(net[a].out[0].weight == 0.0);
  }
  // at the limit with probability 0: nothing
  cfg.sparse_link_prob = 0;
  CHECK(sparse_link_step(net, st, only2, rng, 99, cfg) == 0);

  FeatureNetwork two(mixed_schema(1, 0, 2));
  two.set_sparse_outputs(true);
  auto b = two.add_atom({0, PredicateKind::Geq, 0.0}, 0);
  auto st2 = activate_discrete(two, Instance{{0.5}, 0});
  const double d[] = {0.1, 0.3};
  int ones = 0;
  for (int k = 0; k < 10000; ++k) {
    two[b].out.clear();
    sparse_link_step(two, st2, d, rng, k, cfg);
    ones += two[b].out.at(0).output == 1;
  }
  CHECK(within_3sigma(ones, 1e4, 0.75));
}

TEST_CASE("sparse links respect the minimum depth") {
  Rng rng(9);
  auto schema = mixed_schema(4, 0, 2);
  FeatureNetwork net(schema);
  net.set_sparse_outputs(true);
  for (std::uint32_t a = 0; a < 4; ++a) net.add_atom({a, PredicateKind::Geq, 0.0}, a);
  auto c = net.add_composite({0, 1}, 4);
  net.add_composite({c, 2}, 5);
  PopulationConfig cfg;
  cfg.sparse_out_limit = 100;
  cfg.min_out_depth = 1;
  auto st = activate_discrete(net, Instance{{0.5, 0.5, 0.5, 0.5}, 0});
  const double d[] = {0.5, -0.5};
  for (int k = 0; k < 200; ++k) sparse_link_step(net, st, d, rng, k, cfg);
  for (const auto& f : net.features())
    if (!f.out.empty()) CHECK(f.depth >= 1);
  CHECK(net.link_count() > 0);

  cfg.min_out_depth = 5;
  FeatureNetwork shallow(schema);
  shallow.set_sparse_outputs(true);
  shallow.add_atom({0, PredicateKind::Geq, 0.0}, 0);
  CHECK(sparse_link_step(shallow, activate_discrete(shallow, Instance{{0.5, 0.5, 0.5, 0.5}, 0}), d, rng, 0, cfg) == 0);
}

TEST_CASE("sparse trim drops the weakest links down to the limit") {
  FeatureNetwork net(mixed_schema(3, 0, 2));
  net.set_sparse_outputs(true);
  for (std::uint32_t a = 0; a < 3; ++a) net.add_atom({a, PredicateKind::Geq, 0.0}, a);
  const double w[] = {0.5, -0.01, 0.2};
  for (FeatureIndex i = 0; i < 3; ++i) {
    net.add_link(i, 0, i);
    net[i].out[0].weight = w[i];
  }
  PopulationConfig cfg;
  cfg.sparse_out_limit = 3;
  CHECK(sparse_link_trim(net, cfg) == 0);
  cfg.sparse_out_limit = 2;
  CHECK(sparse_link_trim(net, cfg) == 1);
  CHECK(net[1].out.empty());
  CHECK(net[0].out.size() == 1);

  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_symbolic(mixed_schema(3, 1, 3), 10, 40, rng);
    r.set_sparse_outputs(true);
    for (FeatureIndex i = 0; i < r.size(); ++i) {
      r[i].out.clear();
      for (std::uint32_t o = 0; o < 3; ++o)
        if (bernoulli(rng, 0.6)) {
          r.add_link(i, o, i);
          r[i].out.back().weight = uniform01(rng) - 0.5;
        }
    }
    PopulationConfig c;
    c.sparse_out_limit = 1 + uniform_index(rng, 30);
    const auto before = r.link_count();
    sparse_link_trim(r, c);
    CHECK(r.link_count() == std::min(before, c.sparse_out_limit));
  }
}

TEST_CASE("population config validation") {
  PopulationConfig cfg;
  cfg.validate();
  cfg.max_children = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.max_children = 2;
  cfg.creation_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
