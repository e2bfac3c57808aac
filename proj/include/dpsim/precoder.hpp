#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpsim/channel.hpp"
#include "dpsim/common.hpp"
#include "dpsim/modem.hpp"

namespace dpsim {

enum class PrecoderVariant { zf_phase, mmse_exhaustive };

struct PrecoderSpec {
    PrecoderVariant variant = PrecoderVariant::mmse_exhaustive;
};

const char* precoder_name(PrecoderVariant v);
std::optional<PrecoderVariant> parse_precoder(const std::string& name);

/// The lookup table L: one transmit vector x(s) in X^B per symbol vector
/// s in S^K, stored as alphabet indices. Keys are the base-alpha_s encoding
/// of s with user 0 as the least significant digit.
struct LookupTable {
    int K = 0;
    int B = 0;
    int alpha_s = 0;
    int alpha_x = 0;
    PrecoderVariant precoder = PrecoderVariant::mmse_exhaustive;
    std::uint64_t channel_fingerprint = 0;
    std::vector<std::uint8_t> entries;  // size alpha_s^K * B, transmit alphabet indices

    std::size_t num_keys() const;
    std::span<const std::uint8_t> entry(std::size_t key) const {
        return {entries.data() + key * B, static_cast<std::size_t>(B)};
    }
    /// Symbol index of user k under table key.
    int user_symbol(std::size_t key, int user) const;
    /// Key of the symbol vector with the given per-user indices.
    static std::size_t key_of(std::span<const int> symbol_indices, int alpha_s);
};

/// Phase zero-forcing: u = H^H (H H^H)^{-1} s, each entry quantized to the
/// transmit alphabet element with minimum angular distance (ties toward the
/// lower index). Throws DegenerateChannelError when H H^H is singular.
std::vector<int> zf_phase_precode(const ChannelMatrix& H, std::span<const cplx> s,
                                  const PskAlphabet& X);

/// Unquantized ZF vector (test hook for the pseudo-inverse property).
std::vector<cplx> zf_unquantized(const ChannelMatrix& H, std::span<const cplx> s);

/// Exhaustive MMSE: argmax over x in X^B of |(Hx)^H s|^2 / ||Hx||^2,
/// equivalently argmin over x, gamma of ||s - gamma H x||^2. Candidates with
/// Hx = 0 score -inf. The objective cannot distinguish global constellation
/// rotations of x, so ties break by larger ||Hx||^2, then lexicographically
/// smallest index vector, and the winner is canonicalized by the global
/// rotation that best aligns (Hx)^H s with the positive real axis; this
/// makes the map rotation-equivariant in s. Requires alpha_x^B <= 2^24.
std::vector<int> mmse_exhaustive_precode(const ChannelMatrix& H, std::span<const cplx> s,
                                         const PskAlphabet& X);

/// Builds the full table (alpha_s^K keys). OpenMP-parallel over keys; the
/// result is a pure function of (H, spec, S, X) and identical to the serial
/// reference below.
LookupTable build_lookup_table(const ChannelMatrix& H, const PrecoderSpec& spec,
                               const PskAlphabet& S, const PskAlphabet& X);

/// Serial reference implementation: one independent per-key precoder call,
/// no shared candidate cache. Kept for tests and the benchmark target.
LookupTable build_lookup_table_serial(const ChannelMatrix& H, const PrecoderSpec& spec,
                                      const PskAlphabet& S, const PskAlphabet& X);

struct SymmetryReport {
    bool applicable = false;     // requires alpha_x == alpha_s
    double max_deviation = 0.0;
    std::size_t worst_key = 0;
    int worst_rotation = 0;      // m in phi = 2*pi*m/alpha_x
};

/// Checks x(s * e^{j phi}) == x(s) * e^{j phi} for every table key and every
/// rotation phi = 2*pi*m/alpha_x by index arithmetic; exact zero when the
/// indices line up.
SymmetryReport check_circular_symmetry(const LookupTable& L, const PskAlphabet& X);

/// Binary dump/load for caching tables across runs. Layout: magic "DPLT",
/// u32 version, u32 K, B, alpha_s, alpha_x, u32 precoder id, u64 channel
/// fingerprint, then alpha_s^K records of B uint8 alphabet indices.
void save_lookup_table(const LookupTable& L, std::ostream& out);
LookupTable load_lookup_table(std::istream& in);

}  // namespace dpsim
