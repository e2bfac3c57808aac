#pragma once

#include <array>
#include <vector>

#include "dpsim/common.hpp"
#include "dpsim/modem.hpp"
#include "dpsim/precoder.hpp"
#include "dpsim/rng.hpp"

namespace dpsim {

/// LLR saturation bound; positive value <=> bit 1 more likely.
inline constexpr double kLlrMax = 64.0;

/// Conditional mean and 2x2 covariance of the stacked real receive signal
/// for one data symbol s, with the inverse and determinant cached.
struct SymbolStats {
    double mu_re = 0.0, mu_im = 0.0;
    double var_r = 0.0;   // sigma^2_{r|s}
    double var_i = 0.0;   // sigma^2_{i|s}
    double rho = 0.0;     // rho_{ri|s}
    double det = 0.0;
    double inv_rr = 0.0, inv_ii = 0.0, inv_ri = 0.0;

    void finalize();  // fills det and the cached inverse, checks PD
    /// Quadratic form (z - mu)^T C^{-1} (z - mu).
    double quad_form(cplx z) const;
};

/// Per-user General DPA statistics: one SymbolStats per data symbol.
struct GeneralDpaStats {
    double sigma_w_sq = 0.0;
    std::vector<SymbolStats> per_symbol;  // indexed by data symbol index
};

struct LinearModelParams {
    cplx h_eff{};
    double lambda_eps_sq = 0.0;
    double sigma_w_sq = 0.0;
    double sigma_eff_sq = 0.0;  // lambda_eps_sq + sigma_w_sq
};

/// E{x x^H}: B x B Hermitian, row-major; unit diagonal for PSK entries.
struct TransmitCovariance {
    int B = 0;
    std::vector<cplx> matrix;
    cplx at(int i, int j) const { return matrix[static_cast<std::size_t>(i) * B + j]; }
};

using LlrVector = std::vector<double>;  // M values per sample, MSB first

/// Exact conditional statistics by enumeration of the interferer set D
/// (all symbol vectors whose user entry equals s), in base-alpha_s counting
/// order. Variances carry the sigma_w^2/2 noise floor on the diagonal.
GeneralDpaStats compute_dpa_stats(std::span<const cplx> h_row, const LookupTable& L,
                                  const PskAlphabet& S, double sigma_w_sq,
                                  int user_index);

/// h_eff = (1/(alpha_s^K sigma_s^2)) * sum over S^K of s_k^* zeta(s).
cplx compute_h_eff(std::span<const cplx> h_row, const LookupTable& L,
                   const PskAlphabet& S, int user_index);

TransmitCovariance compute_lambda_xx(const LookupTable& L, const PskAlphabet& X);

/// lambda_eps^2 = h Lambda_x h^H - |h_eff|^2 sigma_s^2, clamped at zero
/// within -1e-9; values below that signal inconsistent inputs.
double compute_lambda_eps(std::span<const cplx> h_row, const TransmitCovariance& lambda_xx,
                          cplx h_eff, double sigma_s_sq);

LinearModelParams make_linear_model(std::span<const cplx> h_row, const LookupTable& L,
                                    const PskAlphabet& S, const PskAlphabet& X,
                                    double sigma_w_sq, int user_index);

/// Max-log LLR with full per-symbol Gaussian statistics:
/// L_i = 1/2 min_{S_0} Q(s) - 1/2 min_{S_1} Q(s), clamped to +-kLlrMax.
/// include_log_det adds the 1/2 ln det C_{z_r|s} term of the exact
/// symbol-dependent Gaussian likelihood (off by default).
LlrVector llr_general_dpa(cplx z, const GeneralDpaStats& stats, const BitPartition& parts,
                          bool include_log_det = false);

/// Linear-model LLR: L_i = (min_{S_0} |z - h_eff s|^2 - min_{S_1} ...) / sigma_eff^2.
LlrVector llr_dpa_lm(cplx z, const LinearModelParams& params, const PskAlphabet& S,
                     const BitPartition& parts);

/// Distortion-blind AWGN baseline: llr_dpa_lm with sigma_w^2 in place of
/// sigma_eff^2.
LlrVector llr_awgn_baseline(cplx z, cplx h_eff, double sigma_w_sq, const PskAlphabet& S,
                            const BitPartition& parts);

/// Nearest-symbol decision against h_eff * s; ties to the lower index.
int hard_detect(cplx z, cplx h_eff, const PskAlphabet& S);

/// |E{eps | s}| for each data symbol, by exact summation over the table
/// (zero-mean distortion diagnostic).
std::vector<double> verify_zero_mean_error(std::span<const cplx> h_row, const LookupTable& L,
                                           const PskAlphabet& S, int user_index);

/// Sampled counterpart of compute_dpa_stats, with standard errors of every
/// estimated entry. Test oracle; never on the production path.
struct SampledDpaStats {
    struct Entry {
        double mu_re = 0.0, mu_im = 0.0, var_r = 0.0, var_i = 0.0, rho = 0.0;
        double se_mu_re = 0.0, se_mu_im = 0.0, se_var_r = 0.0, se_var_i = 0.0, se_rho = 0.0;
    };
    std::vector<Entry> per_symbol;
    std::size_t n_samples = 0;
};

SampledDpaStats estimate_stats_monte_carlo(std::span<const cplx> h_row, const LookupTable& L,
                                           const PskAlphabet& S, double sigma_w_sq,
                                           int user_index, std::size_t n_samples,
                                           RandomStream& stream);

}  // namespace dpsim
