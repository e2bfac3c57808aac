#pragma once

#include <span>
#include <vector>

#include "dpsim/common.hpp"
#include "dpsim/rng.hpp"

namespace dpsim {

/// K x B downlink channel, row-major. h[k][b] = g[k][b] * sqrt(beta[k]).
struct ChannelMatrix {
    int K = 0;
    int B = 0;
    std::vector<cplx> entries;  // row-major K*B

    cplx at(int k, int b) const { return entries[static_cast<std::size_t>(k) * B + b]; }
    std::span<const cplx> row(int k) const {
        return {entries.data() + static_cast<std::size_t>(k) * B, static_cast<std::size_t>(B)};
    }
    std::uint64_t fingerprint() const {
        return fnv1a64(entries.data(), entries.size() * sizeof(cplx));
    }
};

struct FadingConfig {
    int K = 0;
    int B = 0;
    std::vector<double> beta;  // large-scale coefficients, one per user
};

struct NoiseModel {
    double sigma_w_sq = 0.0;  // per-complex-sample variance; Re/Im each half
};

/// i.i.d. Rayleigh small-scale fading: g ~ CN(0, 1), scaled by sqrt(beta_k).
/// Deterministic for a given stream state. Rows with all-zero entries are
/// rejected (would make the user undetectable).
ChannelMatrix draw_channel(const FadingConfig& cfg, RandomStream& stream);

/// z = h_row . x + noise (no conjugation; matches the row-vector product).
cplx apply_channel(std::span<const cplx> h_row, std::span<const cplx> x, cplx noise);

/// SNR = ||x||^2 / N_0 with ||x||^2 = B for unit-modulus PSK transmit vectors,
/// so sigma_w^2 = B / 10^(snr_db/10).
NoiseModel snr_to_noise_variance(double snr_db, int B);

}  // namespace dpsim
