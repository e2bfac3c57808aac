#include "dpsim/modem.hpp"

#include <bit>
#include <cmath>

namespace dpsim {

PskAlphabet make_psk_alphabet(int order) {
    if (order < 2 || order > 64 || !std::has_single_bit(static_cast<unsigned>(order)))
        throw std::invalid_argument("PSK order must be a power of two in [2, 64]");
    PskAlphabet a;
    a.order = order;
    a.bits_per_symbol = std::countr_zero(static_cast<unsigned>(order));
    a.symbol_power = 1.0;
    a.symbols.reserve(order);
    for (int i = 0; i < order; ++i) {
        const double angle = kPi * (2.0 * (i + 1) + 1.0) / order;
        a.symbols.emplace_back(std::cos(angle), std::sin(angle));
    }
    return a;
}

GrayMap build_gray_map(const PskAlphabet& alphabet) {
    const int n = alphabet.order;
    GrayMap g;
    g.forward.assign(n, -1);
    g.inverse.assign(n, -1);
    // Symbol angles grow with index; index n-1 wraps to the smallest
    // nonnegative angle pi/alpha. Counterclockwise position t therefore
    // corresponds to symbol index (t + n - 1) mod n.
    for (int t = 0; t < n; ++t) {
        const int word = t ^ (t >> 1);           // reflected-binary Gray code
        const int sym = (t + n - 1) % n;
        g.forward[word] = sym;
        g.inverse[sym] = word;
    }
    return g;
}

BitPartition bit_partitions(const PskAlphabet& alphabet, const GrayMap& gray) {
    const int m = alphabet.bits_per_symbol;
    BitPartition p;
    p.bits_per_symbol = m;
    p.set.resize(m);
    for (int sym = 0; sym < alphabet.order; ++sym) {
        const int word = gray.inverse[sym];
        for (int i = 0; i < m; ++i) {
            const int b = (word >> (m - 1 - i)) & 1;  // bit i, MSB first
            p.set[i][b].push_back(sym);
        }
    }
    return p;
}

std::vector<int> modulate(std::span<const std::uint8_t> bits,
                          const PskAlphabet& alphabet, const GrayMap& gray) {
    const int m = alphabet.bits_per_symbol;
    if (bits.size() % static_cast<std::size_t>(m) != 0)
        throw std::invalid_argument("bit count not divisible by bits_per_symbol");
    std::vector<int> out;
    out.reserve(bits.size() / m);
    for (std::size_t i = 0; i < bits.size(); i += m) {
        int word = 0;
        for (int j = 0; j < m; ++j)
            word = (word << 1) | (bits[i + j] & 1);
        out.push_back(gray.forward[word]);
    }
    return out;
}

std::vector<std::uint8_t> symbols_to_bits(std::span<const int> symbol_indices,
                                          const PskAlphabet& alphabet,
                                          const GrayMap& gray) {
    const int m = alphabet.bits_per_symbol;
    std::vector<std::uint8_t> out;
    out.reserve(symbol_indices.size() * m);
    for (int sym : symbol_indices) {
        const int word = gray.inverse[sym];
        for (int j = m - 1; j >= 0; --j)
            out.push_back(static_cast<std::uint8_t>((word >> j) & 1));
    }
    return out;
}

}  // namespace dpsim
