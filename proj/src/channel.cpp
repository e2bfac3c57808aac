#include "dpsim/channel.hpp"

#include <cmath>

namespace dpsim {

ChannelMatrix draw_channel(const FadingConfig& cfg, RandomStream& stream) {
    if (cfg.K < 1 || cfg.B < cfg.K)
        throw std::invalid_argument("require 1 <= K <= B");
    if (static_cast<int>(cfg.beta.size()) != cfg.K)
        throw std::invalid_argument("beta must have K entries");
    for (double b : cfg.beta)
        if (!(b > 0.0)) throw std::invalid_argument("beta_k must be positive");

    ChannelMatrix h;
    h.K = cfg.K;
    h.B = cfg.B;
    h.entries.resize(static_cast<std::size_t>(cfg.K) * cfg.B);
    for (int k = 0; k < cfg.K; ++k) {
        const double scale = std::sqrt(cfg.beta[k]);
        bool nonzero = false;
        for (int b = 0; b < cfg.B; ++b) {
            const cplx g = stream.complex_gaussian(1.0);
            h.entries[static_cast<std::size_t>(k) * cfg.B + b] = scale * g;
            nonzero = nonzero || (g != cplx{});
        }
        if (!nonzero)
            throw DegenerateChannelError("all-zero channel row");
    }
    return h;
}

cplx apply_channel(std::span<const cplx> h_row, std::span<const cplx> x, cplx noise) {
    if (h_row.size() != x.size())
        throw std::invalid_argument("dimension mismatch in apply_channel");
    cplx acc{};
    for (std::size_t b = 0; b < x.size(); ++b)
        acc += h_row[b] * x[b];
    return acc + noise;
}

NoiseModel snr_to_noise_variance(double snr_db, int B) {
    if (B < 1) throw std::invalid_argument("B must be >= 1");
    return {static_cast<double>(B) / std::pow(10.0, snr_db / 10.0)};
}

}  // namespace dpsim
