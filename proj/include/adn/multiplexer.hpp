#pragma once

#include <cstdint>
#include <vector>

#include "adn/data.hpp"
#include "adn/rng.hpp"

namespace adn {

/// Multiplexer family: k address bits select one of 2^k data bits. With
/// parity_group g > 1 every logical bit is the XOR of g raw bits.
struct MultiplexerSpec {
  unsigned k = 2;
  unsigned parity_group = 1;

  unsigned logical_bits() const { return k + (1u << k); }
  unsigned raw_bits() const { return parity_group * logical_bits(); }
  void validate() const;

  bool operator==(const MultiplexerSpec&) const = default;
};

/// Attributes are nominal {"0","1"} named b0..b{n-1}; classes "0","1".
Schema multiplexer_schema(const MultiplexerSpec& spec);

/// Label of a logical bit vector laid out as [address MSB first | d_0..d_{2^k-1}].
int multiplexer_label(unsigned k, const std::vector<int>& logical_bits);

/// Label of a raw instance (collapses parity groups first).
int multiplexer_label(const MultiplexerSpec& spec, const Instance& raw);

Instance sample_multiplexer(const MultiplexerSpec& spec, Rng& rng);
Dataset sample_multiplexer(const MultiplexerSpec& spec, Rng& rng, std::size_t count);

/// All 2^n inputs in counting order (bit 0 is the most significant).
/// Refused for parity groups or n > 24.
Dataset enumerate_multiplexer(const MultiplexerSpec& spec);

}  // namespace adn
