#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dpsim {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Thrown when a channel draw cannot support the requested precoder
/// (e.g. rank-deficient H for zero-forcing). The harness redraws.
struct DegenerateChannelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed derivation: hash-combine the master seed with an
/// arbitrary list of stream coordinates (channel index, block index, ...).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> coords) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t c : coords)
        h = splitmix64(h ^ c);
    return h;
}

/// FNV-1a over raw bytes; used for channel fingerprints in table metadata.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace dpsim
