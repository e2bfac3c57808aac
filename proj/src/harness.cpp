#include "dpsim/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dpsim/modem.hpp"

namespace dpsim {

const char* receiver_name(Receiver r) {
    switch (r) {
        case Receiver::general_dpa: return "general_dpa";
        case Receiver::dpa_lm: return "dpa_lm";
        case Receiver::awgn_common: return "awgn_common";
        case Receiver::uncoded_hard: return "uncoded_hard";
    }
    return "?";
}

std::optional<Receiver> parse_receiver(const std::string& name) {
    if (name == "general_dpa") return Receiver::general_dpa;
    if (name == "dpa_lm") return Receiver::dpa_lm;
    if (name == "awgn_common") return Receiver::awgn_common;
    if (name == "uncoded_hard") return Receiver::uncoded_hard;
    return std::nullopt;
}

namespace {

bool power_of_two_in_range(int v) {
    return v >= 2 && v <= 64 && std::has_single_bit(static_cast<unsigned>(v));
}

int worker_count() {
#ifdef _OPENMP
    if (const char* env = std::getenv("DPSIM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace

void SimConfig::validate() const {
    if (K < 1 || K > B) throw std::invalid_argument("require 1 <= K <= B");
    if (!power_of_two_in_range(alpha_s))
        throw std::invalid_argument("alpha_s must be a power of two in [2, 64]");
    if (!power_of_two_in_range(alpha_x))
        throw std::invalid_argument("alpha_x must be a power of two in [2, 64]");
    if (snr_grid_db.empty()) throw std::invalid_argument("snr grid must be non-empty");
    if (blocks_per_channel < 1) throw std::invalid_argument("blocks_per_channel must be >= 1");
    if (n_channels < 1) throw std::invalid_argument("n_channels must be >= 1");
    if (receivers.empty()) throw std::invalid_argument("at least one receiver required");
    if (ldpc.n < 4 || ldpc.rate <= 0.0 || ldpc.rate >= 1.0 || ldpc.dv < 2 ||
        ldpc.max_iterations < 1)
        throw std::invalid_argument("invalid LDPC parameters");
}

namespace {

struct Counts {
    std::uint64_t bit_errors = 0, bits = 0, block_errors = 0, blocks = 0;
    void operator+=(const Counts& o) {
        bit_errors += o.bit_errors;
        bits += o.bits;
        block_errors += o.block_errors;
        blocks += o.blocks;
    }
};

// seed-stream tags; keep distinct so streams never collide
constexpr std::uint64_t kTagCode = 0x01;
constexpr std::uint64_t kTagChannel = 0x02;
constexpr std::uint64_t kTagCodedBlock = 0x03;
constexpr std::uint64_t kTagUncodedBlock = 0x04;

}  // namespace

std::vector<ResultRecord> run_sweep(const SimConfig& cfg, SweepInstrumentation* instr) {
    cfg.validate();
    SweepInstrumentation local_instr;
    if (!instr) instr = &local_instr;

    const PskAlphabet S = make_psk_alphabet(cfg.alpha_s);
    const PskAlphabet X = make_psk_alphabet(cfg.alpha_x);
    const GrayMap gray = build_gray_map(S);
    const BitPartition parts = bit_partitions(S, gray);
    const int M = S.bits_per_symbol;

    bool any_coded = false, want_general = false, want_uncoded = false;
    for (Receiver r : cfg.receivers) {
        if (r == Receiver::uncoded_hard) want_uncoded = true;
        else any_coded = true;
        if (r == Receiver::general_dpa) want_general = true;
    }

    LdpcCode code = LdpcCode::build(cfg.ldpc.n, cfg.ldpc.rate, cfg.ldpc.dv,
                                    derive_seed(cfg.master_seed, {kTagCode}));
    const int n_bits = code.n();
    const int k_bits = code.k();
    if (n_bits % M != 0)
        throw std::invalid_argument("codeword length must be divisible by bits_per_symbol");
    if (k_bits % M != 0)
        throw std::invalid_argument("message length must be divisible by bits_per_symbol");
    const DecoderConfig dec_cfg{cfg.ldpc.max_iterations, true};

    const int n_snr = static_cast<int>(cfg.snr_grid_db.size());
    const int n_rec = static_cast<int>(cfg.receivers.size());
    // accumulators indexed [receiver][snr][channel][user]; integer counts make
    // the merge order irrelevant
    std::vector<Counts> acc(static_cast<std::size_t>(n_rec) * n_snr * cfg.n_channels * cfg.K);
    auto slot = [&](int rec, int snr, int ch, int user) -> Counts& {
        return acc[((static_cast<std::size_t>(rec) * n_snr + snr) * cfg.n_channels + ch) *
                       cfg.K +
                   user];
    };
    std::vector<double> cell_time(static_cast<std::size_t>(n_snr) * cfg.n_channels, 0.0);

    const int nt = worker_count();
    (void)nt;

    for (int ch = 0; ch < cfg.n_channels; ++ch) {
        ChannelMatrix H;
        for (std::uint64_t attempt = 0;; ++attempt) {
            RandomStream cs(derive_seed(cfg.master_seed, {kTagChannel, static_cast<std::uint64_t>(ch), attempt}));
            try {
                H = draw_channel({cfg.K, cfg.B, std::vector<double>(cfg.K, 1.0)}, cs);
                // probe: the ZF solve depends only on H, so one call settles
                // usability for every table key
                std::vector<cplx> probe(cfg.K, cplx{1.0, 0.0});
                zf_unquantized(H, probe);
                break;
            } catch (const DegenerateChannelError&) {
                ++instr->channels_redrawn;
                if (attempt > 64) throw;
            }
        }
        const LookupTable table = build_lookup_table(H, cfg.precoder, S, X);
        ++instr->tables_built;

        std::vector<cplx> h_eff(cfg.K);
        std::vector<double> lambda_eps(cfg.K);
        const TransmitCovariance lxx = compute_lambda_xx(table, X);
        for (int k = 0; k < cfg.K; ++k) {
            h_eff[k] = compute_h_eff(H.row(k), table, S, k);
            lambda_eps[k] = compute_lambda_eps(H.row(k), lxx, h_eff[k], S.symbol_power);
        }

        for (int si = 0; si < n_snr; ++si) {
            const auto t0 = std::chrono::steady_clock::now();
            const NoiseModel noise = snr_to_noise_variance(cfg.snr_grid_db[si], cfg.B);

            std::vector<GeneralDpaStats> stats;
            if (want_general) {
                stats.reserve(cfg.K);
                for (int k = 0; k < cfg.K; ++k) {
                    stats.push_back(compute_dpa_stats(H.row(k), table, S, noise.sigma_w_sq, k));
                    ++instr->dpa_stats_built;
                }
            }
            std::vector<LinearModelParams> lm(cfg.K);
            for (int k = 0; k < cfg.K; ++k) {
                lm[k].h_eff = h_eff[k];
                lm[k].lambda_eps_sq = lambda_eps[k];
                lm[k].sigma_w_sq = noise.sigma_w_sq;
                lm[k].sigma_eff_sq = lambda_eps[k] + noise.sigma_w_sq;
            }

            const int n_blocks = cfg.blocks_per_channel;
#pragma omp parallel num_threads(nt)
            {
                std::vector<Counts> part(static_cast<std::size_t>(n_rec) * cfg.K);
                auto pslot = [&](int rec, int user) -> Counts& {
                    return part[static_cast<std::size_t>(rec) * cfg.K + user];
                };
#pragma omp for schedule(dynamic)
                for (int b = 0; b < n_blocks; ++b) {
                    if (any_coded) {
                        RandomStream rng(derive_seed(
                            cfg.master_seed,
                            {kTagCodedBlock, static_cast<std::uint64_t>(ch),
                             static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(b)}));
                        // one transmission shared by every soft receiver, so
                        // the receiver comparison is paired per block
                        std::vector<std::vector<std::uint8_t>> msg(cfg.K);
                        std::vector<std::vector<int>> sym(cfg.K);
                        for (int k = 0; k < cfg.K; ++k) {
                            msg[k].resize(k_bits);
                            for (auto& bit : msg[k]) bit = rng.bit() ? 1 : 0;
                            sym[k] = modulate(code.encode(msg[k]), S, gray);
                        }
                        const int T = n_bits / M;
                        std::vector<std::vector<cplx>> z(cfg.K, std::vector<cplx>(T));
                        std::vector<int> svec(cfg.K);
                        for (int t = 0; t < T; ++t) {
                            for (int k = 0; k < cfg.K; ++k) svec[k] = sym[k][t];
                            const std::size_t key = LookupTable::key_of(svec, cfg.alpha_s);
                            const auto xv = table.entry(key);
                            for (int k = 0; k < cfg.K; ++k) {
                                cplx acc_z{};
                                for (int bb = 0; bb < cfg.B; ++bb)
                                    acc_z += H.at(k, bb) * X.symbols[xv[bb]];
                                z[k][t] = acc_z + rng.complex_gaussian(noise.sigma_w_sq);
                            }
                        }
                        std::vector<double> llr(n_bits);
                        for (int ri = 0; ri < n_rec; ++ri) {
                            const Receiver rec = cfg.receivers[ri];
                            if (rec == Receiver::uncoded_hard) continue;
                            for (int k = 0; k < cfg.K; ++k) {
                                for (int t = 0; t < T; ++t) {
                                    LlrVector v;
                                    switch (rec) {
                                        case Receiver::general_dpa:
                                            v = llr_general_dpa(z[k][t], stats[k], parts);
                                            break;
                                        case Receiver::dpa_lm:
                                            v = llr_dpa_lm(z[k][t], lm[k], S, parts);
                                            break;
                                        default:
                                            v = llr_awgn_baseline(z[k][t], lm[k].h_eff,
                                                                  noise.sigma_w_sq, S, parts);
                                    }
                                    for (int j = 0; j < M; ++j) llr[t * M + j] = v[j];
                                }
                                const DecodeResult res = spa_decode(code, llr, dec_cfg);
                                std::uint64_t errs = 0;
                                for (int i = 0; i < k_bits; ++i)
                                    errs += (res.message[i] ^ msg[k][i]) & 1;
                                Counts& c = pslot(ri, k);
                                c.bit_errors += errs;
                                c.bits += static_cast<std::uint64_t>(k_bits);
                                c.block_errors += errs ? 1 : 0;
                                c.blocks += 1;
                            }
                        }
                    }
                    if (want_uncoded) {
                        RandomStream rng(derive_seed(
                            cfg.master_seed,
                            {kTagUncodedBlock, static_cast<std::uint64_t>(ch),
                             static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(b)}));
                        std::vector<std::vector<std::uint8_t>> raw(cfg.K);
                        std::vector<std::vector<int>> sym(cfg.K);
                        for (int k = 0; k < cfg.K; ++k) {
                            raw[k].resize(k_bits);
                            for (auto& bit : raw[k]) bit = rng.bit() ? 1 : 0;
                            sym[k] = modulate(raw[k], S, gray);
                        }
                        const int T = k_bits / M;
                        std::vector<int> svec(cfg.K);
                        std::vector<std::vector<int>> det(cfg.K, std::vector<int>(T));
                        for (int t = 0; t < T; ++t) {
                            for (int k = 0; k < cfg.K; ++k) svec[k] = sym[k][t];
                            const std::size_t key = LookupTable::key_of(svec, cfg.alpha_s);
                            const auto xv = table.entry(key);
                            for (int k = 0; k < cfg.K; ++k) {
                                cplx acc_z{};
                                for (int bb = 0; bb < cfg.B; ++bb)
                                    acc_z += H.at(k, bb) * X.symbols[xv[bb]];
                                const cplx zz = acc_z + rng.complex_gaussian(noise.sigma_w_sq);
                                det[k][t] = hard_detect(zz, h_eff[k], S);
                            }
                        }
                        for (int ri = 0; ri < n_rec; ++ri) {
                            if (cfg.receivers[ri] != Receiver::uncoded_hard) continue;
                            for (int k = 0; k < cfg.K; ++k) {
                                const auto rx_bits = symbols_to_bits(det[k], S, gray);
                                std::uint64_t errs = 0;
                                for (int i = 0; i < k_bits; ++i)
                                    errs += (rx_bits[i] ^ raw[k][i]) & 1;
                                Counts& c = pslot(ri, k);
                                c.bit_errors += errs;
                                c.bits += static_cast<std::uint64_t>(k_bits);
                                c.block_errors += errs ? 1 : 0;
                                c.blocks += 1;
                            }
                        }
                    }
                }
#pragma omp critical
                for (int ri = 0; ri < n_rec; ++ri)
                    for (int k = 0; k < cfg.K; ++k)
                        slot(ri, si, ch, k) += pslot(ri, k);
            }
            const auto t1 = std::chrono::steady_clock::now();
            cell_time[static_cast<std::size_t>(si) * cfg.n_channels + ch] =
                std::chrono::duration<double>(t1 - t0).count();
        }
    }

    std::vector<ResultRecord> records;
    for (int ri = 0; ri < n_rec; ++ri)
        for (int si = 0; si < n_snr; ++si)
            for (int ch = 0; ch < cfg.n_channels; ++ch) {
                const double wt =
                    cfg.record_timing
                        ? cell_time[static_cast<std::size_t>(si) * cfg.n_channels + ch]
                        : 0.0;
                Counts all;
                for (int k = 0; k < cfg.K; ++k) {
                    const Counts& c = slot(ri, si, ch, k);
                    all += c;
                    records.push_back({cfg.receivers[ri], cfg.snr_grid_db[si], ch, k,
                                       c.bit_errors, c.bits, c.block_errors, c.blocks, wt});
                }
                records.push_back({cfg.receivers[ri], cfg.snr_grid_db[si], ch, -1,
                                   all.bit_errors, all.bits, all.block_errors, all.blocks, wt});
            }
    return records;
}

namespace {
std::string fmt10(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}
}  // namespace

void emit_csv(const std::vector<ResultRecord>& records, std::ostream& out) {
    out << "receiver,snr_db,channel,user,bit_errors,bits,block_errors,blocks,ber,bler,"
           "wall_time_s\n";
    for (const auto& r : records) {
        out << receiver_name(r.receiver) << ',' << fmt10(r.snr_db) << ',' << r.channel << ',';
        if (r.user < 0) out << "all";
        else out << r.user;
        out << ',' << r.bit_errors << ',' << r.bits << ',' << r.block_errors << ','
            << r.blocks << ',' << fmt10(r.ber()) << ',' << fmt10(r.bler()) << ','
            << fmt10(r.wall_time_s) << '\n';
    }
}

void emit_csv_file(const std::vector<ResultRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    emit_csv(records, out);
    if (!out) throw std::runtime_error("write failure: " + path);
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

SimConfig parse_config_text(std::istream& in) {
    SimConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "K") cfg.K = std::stoi(val);
            else if (key == "B") cfg.B = std::stoi(val);
            else if (key == "alpha_s") cfg.alpha_s = std::stoi(val);
            else if (key == "alpha_x") cfg.alpha_x = std::stoi(val);
            else if (key == "precoder") {
                const auto p = parse_precoder(val);
                if (!p) throw std::invalid_argument("unknown precoder: " + val);
                cfg.precoder.variant = *p;
            } else if (key == "receivers") {
                cfg.receivers.clear();
                for (const auto& name : split_csv_list(val)) {
                    const auto r = parse_receiver(name);
                    if (!r) throw std::invalid_argument("unknown receiver: " + name);
                    cfg.receivers.push_back(*r);
                }
            } else if (key == "snr_grid_db") {
                cfg.snr_grid_db.clear();
                for (const auto& v : split_csv_list(val))
                    cfg.snr_grid_db.push_back(std::stod(v));
            } else if (key == "blocks_per_channel") cfg.blocks_per_channel = std::stoi(val);
            else if (key == "n_channels") cfg.n_channels = std::stoi(val);
            else if (key == "ldpc_n") cfg.ldpc.n = std::stoi(val);
            else if (key == "ldpc_rate") cfg.ldpc.rate = std::stod(val);
            else if (key == "ldpc_dv") cfg.ldpc.dv = std::stoi(val);
            else if (key == "ldpc_max_iterations") cfg.ldpc.max_iterations = std::stoi(val);
            else if (key == "master_seed") cfg.master_seed = std::stoull(val);
            else if (key == "output_path") cfg.output_path = val;
            else if (key == "record_timing") cfg.record_timing = (val == "1" || val == "true");
            else throw std::invalid_argument("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": bad value for " + key);
        }
    }
    return cfg;
}

SimConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_config_text(in);
}

}  // namespace dpsim
