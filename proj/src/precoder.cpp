#include "dpsim/precoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dpsim {

namespace {

// Gaussian elimination with partial pivoting for the K x K system G a = s.
std::vector<cplx> solve_dense(std::vector<cplx> G, std::vector<cplx> rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(G[static_cast<std::size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(G[static_cast<std::size_t>(r) * n + col]);
            if (v > best) { best = v; piv = r; }
        }
        if (best < 1e-12)
            throw DegenerateChannelError("rank-deficient channel (singular H H^H)");
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(G[static_cast<std::size_t>(piv) * n + c],
                          G[static_cast<std::size_t>(col) * n + c]);
            std::swap(rhs[piv], rhs[col]);
        }
        const cplx d = G[static_cast<std::size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const cplx f = G[static_cast<std::size_t>(r) * n + col] / d;
            if (f == cplx{}) continue;
            for (int c = col; c < n; ++c)
                G[static_cast<std::size_t>(r) * n + c] -= f * G[static_cast<std::size_t>(col) * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<cplx> x(n);
    for (int r = n - 1; r >= 0; --r) {
        cplx acc = rhs[r];
        for (int c = r + 1; c < n; ++c)
            acc -= G[static_cast<std::size_t>(r) * n + c] * x[c];
        x[r] = acc / G[static_cast<std::size_t>(r) * n + r];
    }
    return x;
}

// Nearest alphabet element by angular distance, ties toward the lower index.
int quantize_angle(cplx u, const PskAlphabet& X) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < X.order; ++i) {
        const double d = std::abs(u - std::abs(u) * X.symbols[i]);
        if (d < best_d - 1e-15) { best_d = d; best = i; }
    }
    return best;
}

std::vector<cplx> symbol_vector(std::size_t key, int K, const PskAlphabet& S) {
    std::vector<cplx> s(K);
    for (int k = 0; k < K; ++k) {
        s[k] = S.symbols[key % S.order];
        key /= S.order;
    }
    return s;
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// Candidate index -> index vector, lexicographic: digit for antenna 0 is the
// most significant, so increasing candidate order is lexicographic order.
void candidate_digits(std::size_t c, int B, int alpha_x, int* out) {
    for (int b = B - 1; b >= 0; --b) {
        out[b] = static_cast<int>(c % alpha_x);
        c /= alpha_x;
    }
}

// Running argmax state for the exhaustive scan. The objective is invariant
// under a global constellation rotation of x, so exact ties are structural,
// not accidental; they are resolved by (1) larger receive power ||Hx||^2,
// then (2) the earlier (lexicographically smaller) candidate.
struct MmseBest {
    double f = -std::numeric_limits<double>::infinity();
    double ny = 0.0;
    std::size_t c = 0;
    bool valid = false;

    bool accept(double f_cand, double ny_cand, std::size_t c_cand) {
        if (valid) {
            const double tol = 1e-9 * std::max(1.0, f);
            if (f_cand <= f + tol) {
                if (f_cand < f - tol || ny_cand <= ny) return false;
            }
        }
        f = std::max(f, f_cand);
        ny = ny_cand;
        c = c_cand;
        valid = true;
        return true;
    }
};

// Canonical global rotation: the constellation angle that best aligns
// (Hx)^H s with the positive real axis. Applied after the argmax so that
// the selected vector is rotation-equivariant in s (the argmax itself
// cannot distinguish globally rotated candidates).
int canonical_rotation(cplx inner, int alpha) {
    int best_m = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < alpha; ++m) {
        const double v = (std::polar(1.0, -2.0 * kPi * m / alpha) * inner).real();
        if (v > best_v) { best_v = v; best_m = m; }
    }
    return best_m;
}

}  // namespace

const char* precoder_name(PrecoderVariant v) {
    switch (v) {
        case PrecoderVariant::zf_phase: return "zf_phase";
        case PrecoderVariant::mmse_exhaustive: return "mmse_exhaustive";
    }
    return "?";
}

std::optional<PrecoderVariant> parse_precoder(const std::string& name) {
    if (name == "zf_phase") return PrecoderVariant::zf_phase;
    if (name == "mmse_exhaustive") return PrecoderVariant::mmse_exhaustive;
    return std::nullopt;
}

std::size_t LookupTable::num_keys() const {
    return ipow(static_cast<std::size_t>(alpha_s), K);
}

int LookupTable::user_symbol(std::size_t key, int user) const {
    for (int k = 0; k < user; ++k) key /= alpha_s;
    return static_cast<int>(key % alpha_s);
}

std::size_t LookupTable::key_of(std::span<const int> symbol_indices, int alpha_s) {
    std::size_t key = 0;
    for (std::size_t k = symbol_indices.size(); k-- > 0;)
        key = key * alpha_s + static_cast<std::size_t>(symbol_indices[k]);
    return key;
}

std::vector<cplx> zf_unquantized(const ChannelMatrix& H, std::span<const cplx> s) {
    const int K = H.K, B = H.B;
    if (static_cast<int>(s.size()) != K)
        throw std::invalid_argument("symbol vector length must be K");
    // G = H H^H (K x K)
    std::vector<cplx> G(static_cast<std::size_t>(K) * K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            cplx acc{};
            for (int b = 0; b < B; ++b)
                acc += H.at(i, b) * std::conj(H.at(j, b));
            G[static_cast<std::size_t>(i) * K + j] = acc;
        }
    const std::vector<cplx> a = solve_dense(std::move(G), {s.begin(), s.end()}, K);
    std::vector<cplx> u(B);
    for (int b = 0; b < B; ++b) {
        cplx acc{};
        for (int k = 0; k < K; ++k)
            acc += std::conj(H.at(k, b)) * a[k];
        u[b] = acc;
    }
    return u;
}

std::vector<int> zf_phase_precode(const ChannelMatrix& H, std::span<const cplx> s,
                                  const PskAlphabet& X) {
    const std::vector<cplx> u = zf_unquantized(H, s);
    std::vector<int> x(u.size());
    for (std::size_t b = 0; b < u.size(); ++b)
        x[b] = quantize_angle(u[b], X);
    return x;
}

std::vector<int> mmse_exhaustive_precode(const ChannelMatrix& H, std::span<const cplx> s,
                                         const PskAlphabet& X) {
    const int K = H.K, B = H.B;
    if (static_cast<int>(s.size()) != K)
        throw std::invalid_argument("symbol vector length must be K");
    const double budget = B * std::log2(static_cast<double>(X.order));
    if (budget > 24.0)
        throw std::invalid_argument("mmse_exhaustive search space exceeds 2^24");
    const std::size_t n_cand = ipow(static_cast<std::size_t>(X.order), B);
    std::vector<int> digits(B);
    std::vector<cplx> y(K);
    MmseBest best;
    for (std::size_t c = 0; c < n_cand; ++c) {
        candidate_digits(c, B, X.order, digits.data());
        double ny = 0.0;
        for (int k = 0; k < K; ++k) {
            cplx acc{};
            for (int b = 0; b < B; ++b)
                acc += H.at(k, b) * X.symbols[digits[b]];
            y[k] = acc;
            ny += std::norm(acc);
        }
        cplx inner{};
        for (int k = 0; k < K; ++k) inner += std::conj(y[k]) * s[k];
        const double f = ny == 0.0 ? -std::numeric_limits<double>::infinity()
                                   : std::norm(inner) / ny;
        best.accept(f, ny, c);
    }
    std::vector<int> best_digits(B);
    candidate_digits(best.c, B, X.order, best_digits.data());
    cplx inner{};
    for (int k = 0; k < K; ++k) {
        cplx acc{};
        for (int b = 0; b < B; ++b)
            acc += H.at(k, b) * X.symbols[best_digits[b]];
        inner += std::conj(acc) * s[k];
    }
    const int m = canonical_rotation(inner, X.order);
    for (int b = 0; b < B; ++b) best_digits[b] = (best_digits[b] + m) % X.order;
    return best_digits;
}

namespace {

LookupTable make_table_shell(const ChannelMatrix& H, const PrecoderSpec& spec,
                             const PskAlphabet& S, const PskAlphabet& X) {
    LookupTable L;
    L.K = H.K;
    L.B = H.B;
    L.alpha_s = S.order;
    L.alpha_x = X.order;
    L.precoder = spec.variant;
    L.channel_fingerprint = H.fingerprint();
    if (ipow(static_cast<std::size_t>(S.order), H.K) > (1u << 20))
        throw std::invalid_argument("alpha_s^K exceeds enumeration budget 2^20");
    L.entries.resize(L.num_keys() * static_cast<std::size_t>(H.B));
    return L;
}

// Shared-cache MMSE build: precompute y = H x for every candidate once,
// then scan all keys against the cache. This is the hot path of the whole
// simulator at table-build time.
void fill_mmse_cached(LookupTable& L, const ChannelMatrix& H,
                      const PskAlphabet& S, const PskAlphabet& X) {
    const int K = H.K, B = H.B;
    const double budget = B * std::log2(static_cast<double>(X.order));
    if (budget > 24.0)
        throw std::invalid_argument("mmse_exhaustive search space exceeds 2^24");
    const std::size_t n_cand = ipow(static_cast<std::size_t>(X.order), B);
    std::vector<cplx> ytab(n_cand * static_cast<std::size_t>(K));
    std::vector<double> ynorm(n_cand);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(n_cand); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        int digits[32];
        candidate_digits(c, B, X.order, digits);
        double ny = 0.0;
        for (int k = 0; k < K; ++k) {
            cplx acc{};
            for (int b = 0; b < B; ++b)
                acc += H.at(k, b) * X.symbols[digits[b]];
            ytab[c * K + k] = acc;
            ny += std::norm(acc);
        }
        ynorm[c] = ny;
    }
    const std::size_t n_keys = L.num_keys();
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(n_keys); ++ki) {
        const auto key = static_cast<std::size_t>(ki);
        const std::vector<cplx> s = symbol_vector(key, K, S);
        MmseBest best;
        for (std::size_t c = 0; c < n_cand; ++c) {
            cplx inner{};
            for (int k = 0; k < K; ++k)
                inner += std::conj(ytab[c * K + k]) * s[k];
            const double f = ynorm[c] == 0.0
                                 ? -std::numeric_limits<double>::infinity()
                                 : std::norm(inner) / ynorm[c];
            best.accept(f, ynorm[c], c);
        }
        cplx inner{};
        for (int k = 0; k < K; ++k)
            inner += std::conj(ytab[best.c * K + k]) * s[k];
        const int m = canonical_rotation(inner, X.order);
        int digits[32];
        candidate_digits(best.c, B, X.order, digits);
        for (int b = 0; b < B; ++b)
            L.entries[key * B + b] =
                static_cast<std::uint8_t>((digits[b] + m) % X.order);
    }
}

}  // namespace

LookupTable build_lookup_table(const ChannelMatrix& H, const PrecoderSpec& spec,
                               const PskAlphabet& S, const PskAlphabet& X) {
    LookupTable L = make_table_shell(H, spec, S, X);
    const std::size_t n_keys = L.num_keys();
    if (spec.variant == PrecoderVariant::mmse_exhaustive) {
        fill_mmse_cached(L, H, S, X);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(n_keys); ++ki) {
            const auto key = static_cast<std::size_t>(ki);
            const std::vector<cplx> s = symbol_vector(key, H.K, S);
            const std::vector<int> x = zf_phase_precode(H, s, X);
            for (int b = 0; b < H.B; ++b)
                L.entries[key * H.B + b] = static_cast<std::uint8_t>(x[b]);
        }
    }
    return L;
}

LookupTable build_lookup_table_serial(const ChannelMatrix& H, const PrecoderSpec& spec,
                                      const PskAlphabet& S, const PskAlphabet& X) {
    LookupTable L = make_table_shell(H, spec, S, X);
    const std::size_t n_keys = L.num_keys();
    for (std::size_t key = 0; key < n_keys; ++key) {
        const std::vector<cplx> s = symbol_vector(key, H.K, S);
        const std::vector<int> x = spec.variant == PrecoderVariant::mmse_exhaustive
                                       ? mmse_exhaustive_precode(H, s, X)
                                       : zf_phase_precode(H, s, X);
        for (int b = 0; b < H.B; ++b)
            L.entries[key * H.B + b] = static_cast<std::uint8_t>(x[b]);
    }
    return L;
}

SymmetryReport check_circular_symmetry(const LookupTable& L, const PskAlphabet& X) {
    SymmetryReport rep;
    if (L.alpha_x != L.alpha_s) return rep;  // not applicable
    rep.applicable = true;
    const std::size_t n_keys = L.num_keys();
    const int alpha = L.alpha_s;
    std::vector<int> digits(L.K);
    for (std::size_t key = 0; key < n_keys; ++key) {
        std::size_t tmp = key;
        for (int k = 0; k < L.K; ++k) { digits[k] = static_cast<int>(tmp % alpha); tmp /= alpha; }
        for (int m = 1; m < alpha; ++m) {
            // rotation by 2*pi*m/alpha advances every symbol index by m
            std::size_t rot_key = 0;
            for (int k = L.K - 1; k >= 0; --k)
                rot_key = rot_key * alpha + static_cast<std::size_t>((digits[k] + m) % alpha);
            const auto xs = L.entry(key);
            const auto xr = L.entry(rot_key);
            const cplx phase = std::polar(1.0, 2.0 * kPi * m / alpha);
            double dev = 0.0;
            for (int b = 0; b < L.B; ++b) {
                const int expected = (xs[b] + m) % L.alpha_x;
                if (xr[b] != expected)
                    dev = std::max(dev, std::abs(X.symbols[xr[b]] - X.symbols[xs[b]] * phase));
            }
            if (dev > rep.max_deviation) {
                rep.max_deviation = dev;
                rep.worst_key = key;
                rep.worst_rotation = m;
            }
        }
    }
    return rep;
}

namespace {
constexpr char kMagic[4] = {'D', 'P', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
}  // namespace

void save_lookup_table(const LookupTable& L, std::ostream& out) {
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.K));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.B));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.alpha_s));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.alpha_x));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(L.precoder));
    put<std::uint64_t>(out, L.channel_fingerprint);
    out.write(reinterpret_cast<const char*>(L.entries.data()),
              static_cast<std::streamsize>(L.entries.size()));
}

LookupTable load_lookup_table(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a lookup table file");
    if (get<std::uint32_t>(in) != kVersion)
        throw std::runtime_error("unsupported table version");
    LookupTable L;
    L.K = static_cast<int>(get<std::uint32_t>(in));
    L.B = static_cast<int>(get<std::uint32_t>(in));
    L.alpha_s = static_cast<int>(get<std::uint32_t>(in));
    L.alpha_x = static_cast<int>(get<std::uint32_t>(in));
    L.precoder = static_cast<PrecoderVariant>(get<std::uint32_t>(in));
    L.channel_fingerprint = get<std::uint64_t>(in);
    L.entries.resize(L.num_keys() * static_cast<std::size_t>(L.B));
    in.read(reinterpret_cast<char*>(L.entries.data()),
            static_cast<std::streamsize>(L.entries.size()));
    if (!in) throw std::runtime_error("truncated lookup table file");
    return L;
}

}  // namespace dpsim
