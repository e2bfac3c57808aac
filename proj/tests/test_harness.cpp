#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "dpsim/harness.hpp"

using namespace dpsim;

namespace {

SimConfig tiny_config() {
    SimConfig cfg;
    cfg.K = 2;
    cfg.B = 3;
    cfg.alpha_s = 4;
    cfg.alpha_x = 4;
    cfg.precoder.variant = PrecoderVariant::zf_phase;
    cfg.receivers = {Receiver::general_dpa, Receiver::dpa_lm, Receiver::awgn_common,
                     Receiver::uncoded_hard};
    cfg.snr_grid_db = {10.0, 20.0};
    cfg.blocks_per_channel = 3;
    cfg.n_channels = 2;
    cfg.ldpc = {128, 0.5, 3, 20};
    cfg.master_seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("config validation rejects bad fields") {
    SimConfig cfg = tiny_config();
    cfg.alpha_x = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.K = 4;  // K > B
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.snr_grid_db.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.receivers.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("sweep is deterministic and conserves bit counts") {
    const SimConfig cfg = tiny_config();
    SweepInstrumentation instr;
    const auto r1 = run_sweep(cfg, &instr);
    const auto r2 = run_sweep(cfg);

    std::ostringstream csv1, csv2;
    emit_csv(r1, csv1);
    emit_csv(r2, csv2);
    CHECK(csv1.str() == csv2.str());

    // table built once per channel; DPA stats once per (channel, snr, user)
    CHECK(instr.tables_built == cfg.n_channels);
    CHECK(instr.dpa_stats_built == cfg.n_channels * 2 * cfg.K);

    // conservation: per "all" row, bits = blocks * K * N_b
    const std::uint64_t n_b = 64;  // k of the (128, 0.5) code
    for (const auto& rec : r1) {
        if (rec.user != -1) continue;
        CHECK(rec.bits == rec.blocks * n_b);
        CHECK(rec.blocks ==
              static_cast<std::uint64_t>(cfg.blocks_per_channel) * cfg.K);
    }
    // row cardinality: receivers x snrs x channels x (K + 1)
    CHECK(r1.size() == 4u * 2u * 2u * (2u + 1u));
}

TEST_CASE("determinism holds across worker counts") {
    const SimConfig cfg = tiny_config();
#if defined(_WIN32)
    return;
#else
    setenv("DPSIM_THREADS", "1", 1);
    const auto serial = run_sweep(cfg);
    setenv("DPSIM_THREADS", "4", 1);
    const auto parallel = run_sweep(cfg);
    unsetenv("DPSIM_THREADS");
    std::ostringstream a, b;
    emit_csv(serial, a);
    emit_csv(parallel, b);
    CHECK(a.str() == b.str());
#endif
}

TEST_CASE("noise-free regime produces zero errors") {
    SimConfig cfg = tiny_config();
    cfg.K = 1;
    cfg.B = 2;
    cfg.snr_grid_db = {60.0};
    cfg.blocks_per_channel = 10;
    cfg.n_channels = 1;
    const auto records = run_sweep(cfg);
    for (const auto& rec : records) CHECK(rec.bit_errors == 0);
}

TEST_CASE("CSV format: header, row shape, 10-significant-digit reals") {
    std::ostringstream out;
    emit_csv({}, out);
    CHECK(out.str() ==
          "receiver,snr_db,channel,user,bit_errors,bits,block_errors,blocks,ber,bler,"
          "wall_time_s\n");

    ResultRecord rec{Receiver::dpa_lm, 12.5, 1, -1, 3, 9000, 2, 15, 0.0};
    std::ostringstream out2;
    emit_csv({rec}, out2);
    CHECK(out2.str().find("dpa_lm,12.5,1,all,3,9000,2,15,0.0003333333333,") !=
          std::string::npos);
    CHECK(out2.str().back() == '\n');
}

TEST_CASE("config file parsing") {
    std::istringstream in(
        "# experiment\n"
        "K = 3\n"
        "B = 6\n"
        "alpha_s = 4\n"
        "alpha_x = 8\n"
        "precoder = mmse_exhaustive\n"
        "receivers = general_dpa, dpa_lm\n"
        "snr_grid_db = -5, 0, 5\n"
        "blocks_per_channel = 7\n"
        "n_channels = 2\n"
        "ldpc_n = 1024\n"
        "ldpc_rate = 0.5\n"
        "ldpc_dv = 3\n"
        "ldpc_max_iterations = 25\n"
        "master_seed = 777\n"
        "output_path = out.csv\n");
    const SimConfig cfg = parse_config_text(in);
    CHECK(cfg.K == 3);
    CHECK(cfg.B == 6);
    CHECK(cfg.alpha_x == 8);
    CHECK(cfg.precoder.variant == PrecoderVariant::mmse_exhaustive);
    CHECK(cfg.receivers == std::vector<Receiver>{Receiver::general_dpa, Receiver::dpa_lm});
    CHECK(cfg.snr_grid_db == std::vector<double>{-5.0, 0.0, 5.0});
    CHECK(cfg.blocks_per_channel == 7);
    CHECK(cfg.ldpc.max_iterations == 25);
    CHECK(cfg.master_seed == 777);
    CHECK(cfg.output_path == "out.csv");

    std::istringstream bad("bogus_key = 3\n");
    CHECK_THROWS_AS(parse_config_text(bad), std::invalid_argument);
    std::istringstream bad2("K 3\n");
    CHECK_THROWS_AS(parse_config_text(bad2), std::invalid_argument);
}
