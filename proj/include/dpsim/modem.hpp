#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dpsim/common.hpp"

namespace dpsim {

/// An alpha-PSK alphabet: symbols[i] = exp(j*pi*(2*(i+1)+1)/alpha) for
/// i = 0..alpha-1. Unit modulus, zero sum, closed under rotation by 2*pi/alpha.
struct PskAlphabet {
    int order = 0;                 // alpha, power of two
    int bits_per_symbol = 0;       // M = log2(alpha)
    double symbol_power = 1.0;     // sigma_s^2, always 1 for PSK
    std::vector<cplx> symbols;
};

/// Bijection between M-bit words and symbol indices with the Gray property:
/// angularly adjacent symbols differ in exactly one bit.
struct GrayMap {
    std::vector<int> forward;   // word -> symbol index
    std::vector<int> inverse;   // symbol index -> word
};

/// Per bit position i and bit value b, the set of symbol indices whose Gray
/// word has bit i (MSB-first) equal to b. These are the S_0/S_1 sets of the
/// max-log minimizations.
struct BitPartition {
    int bits_per_symbol = 0;
    // set[i][b] = symbol indices with bit i == b
    std::vector<std::array<std::vector<int>, 2>> set;
};

PskAlphabet make_psk_alphabet(int order);

/// Fixed canonical labeling: reflected-binary Gray code assigned
/// counterclockwise starting from the symbol with smallest nonnegative angle.
GrayMap build_gray_map(const PskAlphabet& alphabet);

BitPartition bit_partitions(const PskAlphabet& alphabet, const GrayMap& gray);

/// Maps bits (MSB-first within each M-bit group) to symbol indices.
/// Bit count must be divisible by M.
std::vector<int> modulate(std::span<const std::uint8_t> bits,
                          const PskAlphabet& alphabet, const GrayMap& gray);

/// Inverse of modulate: symbol indices back to their Gray words, MSB-first.
std::vector<std::uint8_t> symbols_to_bits(std::span<const int> symbol_indices,
                                          const PskAlphabet& alphabet,
                                          const GrayMap& gray);

}  // namespace dpsim
