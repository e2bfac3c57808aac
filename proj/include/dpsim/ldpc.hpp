#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dpsim/common.hpp"

namespace dpsim {

/// Regular Gallager-style LDPC code with precomputed systematic encoder.
/// Construction is deterministic in (n, rate, dv, seed).
class LdpcCode {
public:
    /// n * rate must be integral and dv * n / (n - k) must be an integral
    /// row degree. Resamples on rank deficiency (bounded retries, recorded
    /// in metadata).
    static LdpcCode build(int n, double rate, int dv, std::uint64_t seed);

    int n() const { return n_; }
    int k() const { return k_; }
    int dv() const { return dv_; }
    int dc() const { return dc_; }
    std::uint64_t seed() const { return seed_; }
    int construction_attempts() const { return attempts_; }
    int four_cycles() const { return four_cycles_; }

    /// Column indices of each parity-check row (sorted).
    const std::vector<std::vector<int>>& rows() const { return row_cols_; }
    /// Codeword positions carrying the message bits, in message order.
    const std::vector<int>& systematic_positions() const { return msg_pos_; }

    std::vector<std::uint8_t> encode(std::span<const std::uint8_t> message) const;

    /// Syndrome over GF(2); all-zero iff codeword is valid.
    bool syndrome_zero(std::span<const std::uint8_t> codeword) const;

    /// Sparse "alist" textual export (n m / degree lists / index lists,
    /// 1-based indices).
    void export_alist(std::ostream& out) const;

private:
    int n_ = 0, k_ = 0, dv_ = 0, dc_ = 0;
    std::uint64_t seed_ = 0;
    int attempts_ = 0;
    int four_cycles_ = 0;
    std::vector<std::vector<int>> row_cols_;   // m rows
    std::vector<int> msg_pos_;                 // k systematic positions
    std::vector<int> parity_pos_;              // m pivot positions
    // parity_solver_[i] = bitset row i of M^{-1} (m bits packed in u64 words)
    std::vector<std::uint64_t> parity_solver_;
    std::vector<std::uint64_t> col_bits_;      // column bitsets of H, m bits each
    std::size_t words_per_col_ = 0;
};

struct DecoderConfig {
    int max_iterations = 50;
    bool early_stop = true;
};

struct DecodeResult {
    std::vector<std::uint8_t> message;
    std::vector<std::uint8_t> codeword;  // final hard decision on all n bits
    int iterations = 0;
    bool converged = false;
};

/// Flooding-schedule sum-product decoding with tanh-rule check updates.
/// Input LLRs use the convention positive <=> bit 1.
DecodeResult spa_decode(const LdpcCode& code, std::span<const double> llrs,
                        const DecoderConfig& cfg);

}  // namespace dpsim
