#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpsim/channel.hpp"
#include "dpsim/common.hpp"
#include "dpsim/demapper.hpp"
#include "dpsim/ldpc.hpp"
#include "dpsim/precoder.hpp"

namespace dpsim {

enum class Receiver { general_dpa, dpa_lm, awgn_common, uncoded_hard };

const char* receiver_name(Receiver r);
std::optional<Receiver> parse_receiver(const std::string& name);

struct LdpcParams {
    int n = 2048;
    double rate = 0.5;
    int dv = 3;
    int max_iterations = 50;
};

struct SimConfig {
    int K = 3;
    int B = 6;
    int alpha_s = 4;
    int alpha_x = 4;
    PrecoderSpec precoder{};
    std::vector<Receiver> receivers{Receiver::general_dpa, Receiver::dpa_lm,
                                    Receiver::awgn_common, Receiver::uncoded_hard};
    std::vector<double> snr_grid_db{-10, -5, 0, 5, 10, 15, 20, 25, 30};
    int blocks_per_channel = 200;
    int n_channels = 3;
    LdpcParams ldpc{};
    std::uint64_t master_seed = 1;
    std::string output_path = "results.csv";
    bool record_timing = false;  // off by default so identical configs give
                                 // byte-identical CSV

    void validate() const;  // throws std::invalid_argument on bad fields
};

struct ResultRecord {
    Receiver receiver{};
    double snr_db = 0.0;
    int channel = 0;
    int user = -1;  // -1 means "all"
    std::uint64_t bit_errors = 0;
    std::uint64_t bits = 0;
    std::uint64_t block_errors = 0;
    std::uint64_t blocks = 0;
    double wall_time_s = 0.0;

    double ber() const { return bits ? static_cast<double>(bit_errors) / bits : 0.0; }
    double bler() const { return blocks ? static_cast<double>(block_errors) / blocks : 0.0; }
};

/// Construction counters, exposed so tests can assert that the lookup table
/// and demapper statistics are built exactly once per (channel, SNR).
struct SweepInstrumentation {
    int tables_built = 0;
    int dpa_stats_built = 0;
    int channels_redrawn = 0;
};

/// Full Monte-Carlo sweep over channels x SNR x blocks for the configured
/// receivers. Deterministic in the master seed regardless of worker count:
/// each block owns a derived random stream and error counts are integers.
std::vector<ResultRecord> run_sweep(const SimConfig& cfg,
                                    SweepInstrumentation* instr = nullptr);

/// CSV header: receiver,snr_db,channel,user,bit_errors,bits,block_errors,
/// blocks,ber,bler,wall_time_s
void emit_csv(const std::vector<ResultRecord>& records, std::ostream& out);
void emit_csv_file(const std::vector<ResultRecord>& records, const std::string& path);

/// Flat `key = value` config file; '#' starts a comment. Unknown keys are
/// rejected.
SimConfig parse_config_text(std::istream& in);
SimConfig parse_config_file(const std::string& path);

}  // namespace dpsim
