#include "adn/multiplexer.hpp"

#include <string>

#include "adn/error.hpp"

namespace adn {

void MultiplexerSpec::validate() const {
  if (k < 1 || k > 10) throw ConfigError("multiplexer address bits must be in [1, 10]");
  if (parity_group < 1 || parity_group % 2 == 0) throw ConfigError("parity group must be odd and >= 1");
}

Schema multiplexer_schema(const MultiplexerSpec& spec) {
  spec.validate();
  Schema s;
  for (unsigned i = 0; i < spec.raw_bits(); ++i)
    s.attributes.push_back({"b" + std::to_string(i), AttributeKind::Nominal, {"0", "1"}});
  s.classes = {"0", "1"};
  return s;
}

int multiplexer_label(unsigned k, const std::vector<int>& bits) {
  unsigned address = 0;
  for (unsigned i = 0; i < k; ++i) address = (address << 1) | static_cast<unsigned>(bits.at(i) & 1);
  return bits.at(k + address) & 1;
}

int multiplexer_label(const MultiplexerSpec& spec, const Instance& raw) {
  const unsigned g = spec.parity_group;
  std::vector<int> logical(spec.logical_bits(), 0);
  for (unsigned i = 0; i < logical.size(); ++i) {
    int x = 0;
    for (unsigned j = 0; j < g; ++j) x ^= static_cast<int>(raw.values.at(i * g + j)) & 1;
    logical[i] = x;
  }
  return multiplexer_label(spec.k, logical);
}

Instance sample_multiplexer(const MultiplexerSpec& spec, Rng& rng) {
  Instance inst;
  inst.values.resize(spec.raw_bits());
  std::uint64_t word = 0;
  unsigned left = 0;
  for (auto& v : inst.values) {
    if (left == 0) {
      word = rng();
      left = 64;
    }
    v = static_cast<double>(word & 1u);
    word >>= 1;
    --left;
  }
  inst.label = multiplexer_label(spec, inst);
  return inst;
}

Dataset sample_multiplexer(const MultiplexerSpec& spec, Rng& rng, std::size_t count) {
  Dataset d;
  d.schema = multiplexer_schema(spec);
  d.instances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) d.instances.push_back(sample_multiplexer(spec, rng));
  return d;
}

Dataset enumerate_multiplexer(const MultiplexerSpec& spec) {
  spec.validate();
  if (spec.parity_group != 1) throw ConfigError("enumeration is only available for the plain multiplexer");
  const unsigned n = spec.logical_bits();
  if (n > 24) throw ConfigError("enumeration refused for n > 24 (" + std::to_string(n) + " bits)");
  Dataset d;
  d.schema = multiplexer_schema(spec);
  const std::uint64_t total = std::uint64_t{1} << n;
  d.instances.reserve(total);
  for (std::uint64_t x = 0; x < total; ++x) {
    Instance inst;
    inst.values.resize(n);
    for (unsigned i = 0; i < n; ++i) inst.values[i] = static_cast<double>((x >> (n - 1 - i)) & 1u);
    inst.label = multiplexer_label(spec, inst);
    d.instances.push_back(std::move(inst));
  }
  return d;
}

}  // namespace adn
