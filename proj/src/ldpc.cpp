#include "dpsim/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_map>

namespace dpsim {

namespace {

struct BitMatrix {
    int rows = 0, cols = 0;
    std::size_t words = 0;
    std::vector<std::uint64_t> data;

    BitMatrix(int r, int c)
        : rows(r), cols(c), words((static_cast<std::size_t>(c) + 63) / 64),
          data(static_cast<std::size_t>(r) * words, 0) {}

    std::uint64_t* row(int r) { return data.data() + static_cast<std::size_t>(r) * words; }
    const std::uint64_t* row(int r) const {
        return data.data() + static_cast<std::size_t>(r) * words;
    }
    void set(int r, int c) { row(r)[c >> 6] |= 1ULL << (c & 63); }
    bool get(int r, int c) const { return (row(r)[c >> 6] >> (c & 63)) & 1; }
    void xor_rows(int dst, int src) {
        auto* d = row(dst);
        const auto* s = row(src);
        for (std::size_t w = 0; w < words; ++w) d[w] ^= s[w];
    }
};

// Tanner-graph edge assignment by Gallager socket permutation. Duplicate
// edges within a row are repaired by bounded random swaps.
std::vector<std::vector<int>> assign_rows(int n, int m, int dv, int dc,
                                          std::mt19937_64& gen, bool& ok) {
    std::vector<int> sockets;
    sockets.reserve(static_cast<std::size_t>(n) * dv);
    for (int c = 0; c < n; ++c)
        for (int d = 0; d < dv; ++d) sockets.push_back(c);
    std::shuffle(sockets.begin(), sockets.end(), gen);

    auto row_of = [dc](std::size_t idx) { return static_cast<int>(idx / dc); };
    auto has_dup = [&](std::size_t idx) {
        const int r = row_of(idx);
        for (int j = 0; j < dc; ++j) {
            const std::size_t other = static_cast<std::size_t>(r) * dc + j;
            if (other != idx && sockets[other] == sockets[idx]) return true;
        }
        return false;
    };
    for (std::size_t i = 0; i < sockets.size(); ++i) {
        int guard = 0;
        while (has_dup(i)) {
            const std::size_t j = std::uniform_int_distribution<std::size_t>(
                0, sockets.size() - 1)(gen);
            std::swap(sockets[i], sockets[j]);
            if (++guard > 200) { ok = false; return {}; }
        }
    }
    std::vector<std::vector<int>> rows(m);
    for (int r = 0; r < m; ++r) {
        rows[r].assign(sockets.begin() + static_cast<std::size_t>(r) * dc,
                       sockets.begin() + static_cast<std::size_t>(r + 1) * dc);
        std::sort(rows[r].begin(), rows[r].end());
        // a swap can reintroduce a duplicate at an already-checked slot;
        // reject the draw rather than ship a row with a repeated column
        if (std::adjacent_find(rows[r].begin(), rows[r].end()) != rows[r].end()) {
            ok = false;
            return {};
        }
    }
    ok = true;
    return rows;
}

int count_four_cycles(const std::vector<std::vector<int>>& rows, int n) {
    // a 4-cycle is a column pair shared by two rows
    std::unordered_map<std::uint64_t, int> seen;
    int cycles = 0;
    for (const auto& cols : rows)
        for (std::size_t i = 0; i < cols.size(); ++i)
            for (std::size_t j = i + 1; j < cols.size(); ++j) {
                const std::uint64_t key =
                    static_cast<std::uint64_t>(cols[i]) * static_cast<std::uint64_t>(n) + cols[j];
                cycles += seen[key]++;
            }
    return cycles;
}

}  // namespace

LdpcCode LdpcCode::build(int n, double rate, int dv, std::uint64_t seed) {
    const double kd = n * rate;
    const int k = static_cast<int>(std::llround(kd));
    if (std::abs(kd - k) > 1e-9 || k <= 0 || k >= n)
        throw std::invalid_argument("n * rate must be a positive integer < n");
    const int m = n - k;
    if (dv < 2) throw std::invalid_argument("dv must be >= 2");
    const long long dc_num = static_cast<long long>(dv) * n;
    if (dc_num % m != 0)
        throw std::invalid_argument("dv * n / (n - k) must be integral");
    const int dc = static_cast<int>(dc_num / m);

    LdpcCode code;
    code.n_ = n;
    code.k_ = k;
    code.dv_ = dv;
    code.dc_ = dc;
    code.seed_ = seed;

    for (int attempt = 0; attempt < 50; ++attempt) {
        std::mt19937_64 gen(splitmix64(seed + static_cast<std::uint64_t>(attempt)));
        bool ok = false;
        auto rows = assign_rows(n, m, dv, dc, gen, ok);
        if (!ok) continue;

        // rank check + pivot columns via elimination on a scratch copy
        BitMatrix H(m, n);
        for (int r = 0; r < m; ++r)
            for (int c : rows[r]) H.set(r, c);
        BitMatrix E = H;
        std::vector<int> pivot_cols;
        pivot_cols.reserve(m);
        int rank = 0;
        for (int c = 0; c < n && rank < m; ++c) {
            int piv = -1;
            for (int r = rank; r < m; ++r)
                if (E.get(r, c)) { piv = r; break; }
            if (piv < 0) continue;
            if (piv != rank)
                for (std::size_t w = 0; w < E.words; ++w)
                    std::swap(E.row(piv)[w], E.row(rank)[w]);
            for (int r = 0; r < m; ++r)
                if (r != rank && E.get(r, c)) E.xor_rows(r, rank);
            pivot_cols.push_back(c);
            ++rank;
        }
        if (rank < m) continue;  // rank-deficient draw, resample

        code.attempts_ = attempt + 1;
        code.four_cycles_ = count_four_cycles(rows, n);
        code.row_cols_ = std::move(rows);
        code.parity_pos_ = pivot_cols;

        std::vector<char> is_pivot(n, 0);
        for (int c : pivot_cols) is_pivot[c] = 1;
        code.msg_pos_.clear();
        code.msg_pos_.reserve(k);
        for (int c = 0; c < n; ++c)
            if (!is_pivot[c]) code.msg_pos_.push_back(c);

        // column bitsets of H for fast syndrome accumulation
        code.words_per_col_ = (static_cast<std::size_t>(m) + 63) / 64;
        code.col_bits_.assign(static_cast<std::size_t>(n) * code.words_per_col_, 0);
        for (int r = 0; r < m; ++r)
            for (int c : code.row_cols_[r])
                code.col_bits_[static_cast<std::size_t>(c) * code.words_per_col_ +
                               (static_cast<std::size_t>(r) >> 6)] |=
                    1ULL << (r & 63);

        // invert M = H restricted to pivot columns (Gauss-Jordan)
        BitMatrix A(m, m), inv(m, m);
        for (int r = 0; r < m; ++r) {
            for (int i = 0; i < m; ++i)
                if (H.get(r, pivot_cols[i])) A.set(r, i);
            inv.set(r, r);
        }
        for (int c = 0; c < m; ++c) {
            int piv = -1;
            for (int r = c; r < m; ++r)
                if (A.get(r, c)) { piv = r; break; }
            if (piv < 0) throw std::logic_error("pivot submatrix not invertible");
            if (piv != c)
                for (std::size_t w = 0; w < A.words; ++w) {
                    std::swap(A.row(piv)[w], A.row(c)[w]);
                    std::swap(inv.row(piv)[w], inv.row(c)[w]);
                }
            for (int r = 0; r < m; ++r)
                if (r != c && A.get(r, c)) {
                    A.xor_rows(r, c);
                    inv.xor_rows(r, c);
                }
        }
        code.parity_solver_ = std::move(inv.data);
        return code;
    }
    throw std::runtime_error("LDPC construction failed to reach full rank");
}

std::vector<std::uint8_t> LdpcCode::encode(std::span<const std::uint8_t> message) const {
    if (static_cast<int>(message.size()) != k_)
        throw std::invalid_argument("message length must be k");
    const int m = n_ - k_;
    std::vector<std::uint64_t> syn(words_per_col_, 0);
    std::vector<std::uint8_t> codeword(n_, 0);
    for (int i = 0; i < k_; ++i) {
        if (!(message[i] & 1)) continue;
        codeword[msg_pos_[i]] = 1;
        const auto* col = col_bits_.data() + static_cast<std::size_t>(msg_pos_[i]) * words_per_col_;
        for (std::size_t w = 0; w < words_per_col_; ++w) syn[w] ^= col[w];
    }
    for (int i = 0; i < m; ++i) {
        const auto* srow = parity_solver_.data() + static_cast<std::size_t>(i) * words_per_col_;
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < words_per_col_; ++w) acc ^= srow[w] & syn[w];
        codeword[parity_pos_[i]] = static_cast<std::uint8_t>(std::popcount(acc) & 1);
    }
    return codeword;
}

bool LdpcCode::syndrome_zero(std::span<const std::uint8_t> codeword) const {
    for (const auto& cols : row_cols_) {
        int parity = 0;
        for (int c : cols) parity ^= codeword[c] & 1;
        if (parity) return false;
    }
    return true;
}

void LdpcCode::export_alist(std::ostream& out) const {
    const int m = n_ - k_;
    std::vector<std::vector<int>> col_rows(n_);
    for (int r = 0; r < m; ++r)
        for (int c : row_cols_[r]) col_rows[c].push_back(r + 1);
    out << n_ << ' ' << m << '\n';
    out << dv_ << ' ' << dc_ << '\n';
    for (int c = 0; c < n_; ++c) out << col_rows[c].size() << (c + 1 < n_ ? ' ' : '\n');
    for (int r = 0; r < m; ++r) out << row_cols_[r].size() << (r + 1 < m ? ' ' : '\n');
    for (int c = 0; c < n_; ++c) {
        for (std::size_t i = 0; i < col_rows[c].size(); ++i)
            out << col_rows[c][i] << (i + 1 < col_rows[c].size() ? ' ' : '\n');
    }
    for (int r = 0; r < m; ++r) {
        for (std::size_t i = 0; i < row_cols_[r].size(); ++i)
            out << row_cols_[r][i] + 1 << (i + 1 < row_cols_[r].size() ? ' ' : '\n');
    }
}

DecodeResult spa_decode(const LdpcCode& code, std::span<const double> llrs,
                        const DecoderConfig& cfg) {
    const int n = code.n();
    const int m = n - code.k();
    if (static_cast<int>(llrs.size()) != n)
        throw std::invalid_argument("llr length must be n");
    if (cfg.max_iterations < 1)
        throw std::invalid_argument("max_iterations must be >= 1");

    // internal math uses the textbook convention positive <=> bit 0;
    // inputs arrive as positive <=> bit 1, so negate at the boundary
    std::vector<double> prior(n);
    for (int c = 0; c < n; ++c) prior[c] = -llrs[c];

    // flatten edges
    std::vector<int> edge_col, row_begin(m + 1, 0);
    for (int r = 0; r < m; ++r) row_begin[r + 1] = row_begin[r] + static_cast<int>(code.rows()[r].size());
    const int n_edges = row_begin[m];
    edge_col.resize(n_edges);
    std::vector<std::vector<int>> col_edges(n);
    {
        int e = 0;
        for (int r = 0; r < m; ++r)
            for (int c : code.rows()[r]) {
                edge_col[e] = c;
                col_edges[c].push_back(e);
                ++e;
            }
    }

    std::vector<double> v2c(n_edges), c2v(n_edges, 0.0);
    for (int e = 0; e < n_edges; ++e) v2c[e] = prior[edge_col[e]];

    std::vector<std::uint8_t> hard(n, 0);
    std::vector<double> fwd, bwd;
    bool converged = false;
    int it = 0;
    constexpr double kTanhClip = 1.0 - 1e-12;

    for (it = 1; it <= cfg.max_iterations; ++it) {
        // check-node update, tanh rule via forward/backward products
        for (int r = 0; r < m; ++r) {
            const int beg = row_begin[r], deg = row_begin[r + 1] - beg;
            fwd.assign(deg, 0.0);
            bwd.assign(deg, 0.0);
            fwd[0] = std::clamp(std::tanh(0.5 * v2c[beg]), -kTanhClip, kTanhClip);
            bwd[deg - 1] =
                std::clamp(std::tanh(0.5 * v2c[beg + deg - 1]), -kTanhClip, kTanhClip);
            for (int j = 1; j < deg; ++j) {
                fwd[j] = fwd[j - 1] *
                         std::clamp(std::tanh(0.5 * v2c[beg + j]), -kTanhClip, kTanhClip);
                bwd[deg - 1 - j] =
                    bwd[deg - j] *
                    std::clamp(std::tanh(0.5 * v2c[beg + deg - 1 - j]), -kTanhClip, kTanhClip);
            }
            for (int j = 0; j < deg; ++j) {
                double prod = 1.0;
                if (j > 0) prod *= fwd[j - 1];
                if (j < deg - 1) prod *= bwd[j + 1];
                prod = std::clamp(prod, -kTanhClip, kTanhClip);
                c2v[beg + j] = 2.0 * std::atanh(prod);
            }
        }
        // variable-node update and posterior
        std::vector<double> post = prior;
        for (int e = 0; e < n_edges; ++e) post[edge_col[e]] += c2v[e];
        for (int c = 0; c < n; ++c)
            for (int e : col_edges[c]) v2c[e] = post[c] - c2v[e];
        for (int c = 0; c < n; ++c) hard[c] = post[c] < 0.0 ? 1 : 0;

        if (code.syndrome_zero(hard)) {
            converged = true;
            if (cfg.early_stop) break;
        } else {
            converged = false;
        }
    }
    if (it > cfg.max_iterations) it = cfg.max_iterations;

    DecodeResult res;
    res.iterations = it;
    res.converged = converged;
    res.message.resize(code.k());
    const auto& pos = code.systematic_positions();
    for (int i = 0; i < code.k(); ++i) res.message[i] = hard[pos[i]];
    res.codeword = std::move(hard);
    return res;
}

}  // namespace dpsim
