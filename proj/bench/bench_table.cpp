// Benchmark: parallel lookup-table construction against the serial reference.
// Run with no arguments for the default problem sizes, or pass
//   bench_table <K> <B> <alpha_s> <alpha_x> [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "dpsim/channel.hpp"
#include "dpsim/precoder.hpp"

using namespace dpsim;

namespace {

double time_once(const std::function<LookupTable()>& fn, LookupTable& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

void run_case(int K, int B, int alpha_s, int alpha_x, int reps) {
    const auto S = make_psk_alphabet(alpha_s);
    const auto X = make_psk_alphabet(alpha_x);
    RandomStream stream(2718);
    const auto H = draw_channel({K, B, std::vector<double>(K, 1.0)}, stream);
    const PrecoderSpec spec{PrecoderVariant::mmse_exhaustive};

    double best_par = 1e300, best_ser = 1e300;
    LookupTable par, ser;
    for (int r = 0; r < reps; ++r) {
        best_par = std::min(best_par, time_once([&] { return build_lookup_table(H, spec, S, X); }, par));
        best_ser = std::min(best_ser,
                            time_once([&] { return build_lookup_table_serial(H, spec, S, X); }, ser));
    }
    const bool match = par.entries == ser.entries;
    std::printf("K=%d B=%d alpha_s=%d alpha_x=%d  keys=%zu  parallel %.4fs  serial %.4fs  speedup %.2fx  match=%s\n",
                K, B, alpha_s, alpha_x, par.num_keys(), best_par, best_ser,
                best_ser / best_par, match ? "yes" : "NO");
    if (!match) std::exit(1);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc >= 5) {
        const int reps = argc >= 6 ? std::atoi(argv[5]) : 3;
        run_case(std::atoi(argv[1]), std::atoi(argv[2]), std::atoi(argv[3]),
                 std::atoi(argv[4]), reps);
        return 0;
    }
    run_case(3, 6, 4, 4, 3);
    run_case(3, 6, 4, 8, 1);
    return 0;
}
