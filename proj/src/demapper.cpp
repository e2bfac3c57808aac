#include "dpsim/demapper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpsim {

namespace {

cplx table_zeta(std::span<const cplx> h_row, const LookupTable& L, const PskAlphabet& X,
                std::size_t key) {
    const auto x = L.entry(key);
    cplx acc{};
    for (int b = 0; b < L.B; ++b)
        acc += h_row[b] * X.symbols[x[b]];
    return acc;
}

double clamp_llr(double v) { return std::clamp(v, -kLlrMax, kLlrMax); }

void check_user_table(std::span<const cplx> h_row, const LookupTable& L,
                      const PskAlphabet& S, int user_index) {
    if (L.alpha_s != S.order)
        throw std::invalid_argument("table alphabet does not match S");
    if (static_cast<int>(h_row.size()) != L.B)
        throw std::invalid_argument("channel row length does not match table B");
    if (user_index < 0 || user_index >= L.K)
        throw std::invalid_argument("user index out of range");
}

}  // namespace

void SymbolStats::finalize() {
    det = var_r * var_i - rho * rho;
    if (!(det > 0.0) || !(var_r > 0.0) || !(var_i > 0.0))
        throw std::runtime_error("conditional covariance not positive definite");
    const double d = std::max(det, 1e-300);
    inv_rr = var_i / d;
    inv_ii = var_r / d;
    inv_ri = -rho / d;
}

double SymbolStats::quad_form(cplx z) const {
    const double dr = z.real() - mu_re;
    const double di = z.imag() - mu_im;
    return dr * dr * inv_rr + 2.0 * dr * di * inv_ri + di * di * inv_ii;
}

GeneralDpaStats compute_dpa_stats(std::span<const cplx> h_row, const LookupTable& L,
                                  const PskAlphabet& S, double sigma_w_sq,
                                  int user_index) {
    check_user_table(h_row, L, S, user_index);
    if (!(sigma_w_sq > 0.0))
        throw std::invalid_argument("sigma_w_sq must be positive");
    const PskAlphabet X = make_psk_alphabet(L.alpha_x);
    const int alpha = S.order;
    const std::size_t n_keys = L.num_keys();
    const double inv_card = 1.0 / static_cast<double>(n_keys / alpha);  // 1/alpha_s^(K-1)

    std::vector<double> s_re(alpha, 0.0), s_im(alpha, 0.0);
    std::vector<double> s_rr(alpha, 0.0), s_ii(alpha, 0.0), s_ri(alpha, 0.0);
    // base-alpha_s counting order keeps the floating-point sums deterministic
    for (std::size_t key = 0; key < n_keys; ++key) {
        const int s = L.user_symbol(key, user_index);
        const cplx zeta = table_zeta(h_row, L, X, key);
        s_re[s] += zeta.real();
        s_im[s] += zeta.imag();
        s_rr[s] += zeta.real() * zeta.real();
        s_ii[s] += zeta.imag() * zeta.imag();
        s_ri[s] += zeta.real() * zeta.imag();
    }
    GeneralDpaStats out;
    out.sigma_w_sq = sigma_w_sq;
    out.per_symbol.resize(alpha);
    for (int s = 0; s < alpha; ++s) {
        SymbolStats& st = out.per_symbol[s];
        st.mu_re = s_re[s] * inv_card;
        st.mu_im = s_im[s] * inv_card;
        st.var_r = sigma_w_sq / 2.0 + (s_rr[s] * inv_card - st.mu_re * st.mu_re);
        st.var_i = sigma_w_sq / 2.0 + (s_ii[s] * inv_card - st.mu_im * st.mu_im);
        st.rho = s_ri[s] * inv_card - st.mu_re * st.mu_im;
        st.finalize();
    }
    return out;
}

cplx compute_h_eff(std::span<const cplx> h_row, const LookupTable& L,
                   const PskAlphabet& S, int user_index) {
    check_user_table(h_row, L, S, user_index);
    const PskAlphabet X = make_psk_alphabet(L.alpha_x);
    const std::size_t n_keys = L.num_keys();
    cplx acc{};
    for (std::size_t key = 0; key < n_keys; ++key) {
        const cplx sk = S.symbols[L.user_symbol(key, user_index)];
        acc += std::conj(sk) * table_zeta(h_row, L, X, key);
    }
    return acc / (static_cast<double>(n_keys) * S.symbol_power);
}

TransmitCovariance compute_lambda_xx(const LookupTable& L, const PskAlphabet& X) {
    const int B = L.B;
    TransmitCovariance cov;
    cov.B = B;
    cov.matrix.assign(static_cast<std::size_t>(B) * B, cplx{});
    const std::size_t n_keys = L.num_keys();
    for (std::size_t key = 0; key < n_keys; ++key) {
        const auto x = L.entry(key);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j)
                cov.matrix[static_cast<std::size_t>(i) * B + j] +=
                    X.symbols[x[i]] * std::conj(X.symbols[x[j]]);
    }
    const double inv = 1.0 / static_cast<double>(n_keys);
    for (auto& v : cov.matrix) v *= inv;
    for (int i = 0; i < B; ++i)  // |x_b|^2 = 1 exactly for PSK entries
        cov.matrix[static_cast<std::size_t>(i) * B + i] = 1.0;
    return cov;
}

double compute_lambda_eps(std::span<const cplx> h_row, const TransmitCovariance& lambda_xx,
                          cplx h_eff, double sigma_s_sq) {
    const int B = lambda_xx.B;
    if (static_cast<int>(h_row.size()) != B)
        throw std::invalid_argument("channel row length does not match Lambda_x");
    cplx acc{};
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j)
            acc += h_row[i] * lambda_xx.at(i, j) * std::conj(h_row[j]);
    const double val = acc.real() - std::norm(h_eff) * sigma_s_sq;
    if (val < -1e-9)
        throw std::runtime_error("negative lambda_eps^2: inconsistent inputs");
    return std::max(val, 0.0);
}

LinearModelParams make_linear_model(std::span<const cplx> h_row, const LookupTable& L,
                                    const PskAlphabet& S, const PskAlphabet& X,
                                    double sigma_w_sq, int user_index) {
    LinearModelParams p;
    p.h_eff = compute_h_eff(h_row, L, S, user_index);
    p.lambda_eps_sq = compute_lambda_eps(h_row, compute_lambda_xx(L, X), p.h_eff, S.symbol_power);
    p.sigma_w_sq = sigma_w_sq;
    p.sigma_eff_sq = p.lambda_eps_sq + sigma_w_sq;
    return p;
}

LlrVector llr_general_dpa(cplx z, const GeneralDpaStats& stats, const BitPartition& parts,
                          bool include_log_det) {
    const int alpha = static_cast<int>(stats.per_symbol.size());
    double metric[64];
    for (int s = 0; s < alpha; ++s) {
        metric[s] = stats.per_symbol[s].quad_form(z);
        if (include_log_det)
            metric[s] += std::log(stats.per_symbol[s].det);
    }
    LlrVector out(parts.bits_per_symbol);
    for (int i = 0; i < parts.bits_per_symbol; ++i) {
        double m0 = std::numeric_limits<double>::infinity();
        double m1 = m0;
        for (int s : parts.set[i][0]) m0 = std::min(m0, metric[s]);
        for (int s : parts.set[i][1]) m1 = std::min(m1, metric[s]);
        out[i] = clamp_llr(0.5 * m0 - 0.5 * m1);
    }
    return out;
}

namespace {

LlrVector llr_scaled_distance(cplx z, cplx h_eff, double scale_var, const PskAlphabet& S,
                              const BitPartition& parts) {
    double metric[64];
    for (int s = 0; s < S.order; ++s)
        metric[s] = std::norm(z - h_eff * S.symbols[s]);
    LlrVector out(parts.bits_per_symbol);
    for (int i = 0; i < parts.bits_per_symbol; ++i) {
        double m0 = std::numeric_limits<double>::infinity();
        double m1 = m0;
        for (int s : parts.set[i][0]) m0 = std::min(m0, metric[s]);
        for (int s : parts.set[i][1]) m1 = std::min(m1, metric[s]);
        out[i] = clamp_llr((m0 - m1) / scale_var);
    }
    return out;
}

}  // namespace

LlrVector llr_dpa_lm(cplx z, const LinearModelParams& params, const PskAlphabet& S,
                     const BitPartition& parts) {
    if (!(params.sigma_eff_sq > 0.0))
        throw std::invalid_argument("sigma_eff_sq must be positive");
    return llr_scaled_distance(z, params.h_eff, params.sigma_eff_sq, S, parts);
}

LlrVector llr_awgn_baseline(cplx z, cplx h_eff, double sigma_w_sq, const PskAlphabet& S,
                            const BitPartition& parts) {
    if (!(sigma_w_sq > 0.0))
        throw std::invalid_argument("sigma_w_sq must be positive");
    return llr_scaled_distance(z, h_eff, sigma_w_sq, S, parts);
}

int hard_detect(cplx z, cplx h_eff, const PskAlphabet& S) {
    if (h_eff == cplx{})
        throw std::invalid_argument("h_eff must be nonzero");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int s = 0; s < S.order; ++s) {
        const double d = std::abs(z - h_eff * S.symbols[s]);
        if (d < best_d) { best_d = d; best = s; }
    }
    return best;
}

std::vector<double> verify_zero_mean_error(std::span<const cplx> h_row, const LookupTable& L,
                                           const PskAlphabet& S, int user_index) {
    check_user_table(h_row, L, S, user_index);
    const PskAlphabet X = make_psk_alphabet(L.alpha_x);
    const cplx h_eff = compute_h_eff(h_row, L, S, user_index);
    const int alpha = S.order;
    const std::size_t n_keys = L.num_keys();
    std::vector<cplx> cond_sum(alpha, cplx{});
    for (std::size_t key = 0; key < n_keys; ++key)
        cond_sum[L.user_symbol(key, user_index)] += table_zeta(h_row, L, X, key);
    const double inv_card = 1.0 / static_cast<double>(n_keys / alpha);
    std::vector<double> residuals(alpha);
    for (int s = 0; s < alpha; ++s)
        residuals[s] = std::abs(cond_sum[s] * inv_card - h_eff * S.symbols[s]);
    return residuals;
}

SampledDpaStats estimate_stats_monte_carlo(std::span<const cplx> h_row, const LookupTable& L,
                                           const PskAlphabet& S, double sigma_w_sq,
                                           int user_index, std::size_t n_samples,
                                           RandomStream& stream) {
    check_user_table(h_row, L, S, user_index);
    if (n_samples < 10000)
        throw std::invalid_argument("n_samples must be at least 10^4");
    const PskAlphabet X = make_psk_alphabet(L.alpha_x);
    const int alpha = S.order;
    const int K = L.K;

    SampledDpaStats out;
    out.n_samples = n_samples;
    out.per_symbol.resize(alpha);
    std::vector<int> digits(K);
    std::vector<double> re(n_samples), im(n_samples);
    for (int s = 0; s < alpha; ++s) {
        for (std::size_t t = 0; t < n_samples; ++t) {
            for (int k = 0; k < K; ++k)
                digits[k] = (k == user_index)
                                ? s
                                : static_cast<int>(stream.uniform_index(alpha));
            const std::size_t key = LookupTable::key_of(digits, alpha);
            const cplx z = table_zeta(h_row, L, X, key) + stream.complex_gaussian(sigma_w_sq);
            re[t] = z.real();
            im[t] = z.imag();
        }
        // two-pass moments, plus the central fourth moments needed for the
        // standard errors of the variance/covariance estimators
        const double n = static_cast<double>(n_samples);
        double m_re = 0.0, m_im = 0.0;
        for (std::size_t t = 0; t < n_samples; ++t) { m_re += re[t]; m_im += im[t]; }
        m_re /= n;
        m_im /= n;
        double c_rr = 0, c_ii = 0, c_ri = 0, m4_r = 0, m4_i = 0, m22 = 0;
        for (std::size_t t = 0; t < n_samples; ++t) {
            const double dr = re[t] - m_re, di = im[t] - m_im;
            c_rr += dr * dr;
            c_ii += di * di;
            c_ri += dr * di;
            m4_r += dr * dr * dr * dr;
            m4_i += di * di * di * di;
            m22 += dr * dr * di * di;
        }
        c_rr /= n; c_ii /= n; c_ri /= n;
        m4_r /= n; m4_i /= n; m22 /= n;
        auto& e = out.per_symbol[s];
        e.mu_re = m_re;
        e.mu_im = m_im;
        e.var_r = c_rr;
        e.var_i = c_ii;
        e.rho = c_ri;
        e.se_mu_re = std::sqrt(c_rr / n);
        e.se_mu_im = std::sqrt(c_ii / n);
        e.se_var_r = std::sqrt(std::max(m4_r - c_rr * c_rr, 0.0) / n);
        e.se_var_i = std::sqrt(std::max(m4_i - c_ii * c_ii, 0.0) / n);
        e.se_rho = std::sqrt(std::max(m22 - c_ri * c_ri, 0.0) / n);
    }
    return out;
}

}  // namespace dpsim
