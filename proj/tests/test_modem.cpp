#include <doctest.h>

#include <bit>
#include <random>

#include "dpsim/modem.hpp"

using namespace dpsim;

TEST_CASE("QPSK alphabet matches the diagonal construction") {
    const auto a = make_psk_alphabet(4);
    REQUIRE(a.order == 4);
    REQUIRE(a.bits_per_symbol == 2);
    const double angles[4] = {3 * kPi / 4, 5 * kPi / 4, 7 * kPi / 4, kPi / 4};
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(a.symbols[i] - std::polar(1.0, angles[i])) < 1e-12);
    }
    cplx sum{};
    for (auto s : a.symbols) sum += s;
    CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("8-PSK: unit modulus and minimum angular gap pi/4") {
    const auto a = make_psk_alphabet(8);
    double min_gap = 10.0;
    for (int i = 0; i < 8; ++i) {
        CHECK(std::abs(std::norm(a.symbols[i]) - 1.0) < 1e-12);
        for (int j = 0; j < 8; ++j) {
            if (i == j) continue;
            const double gap =
                std::abs(std::arg(a.symbols[i] * std::conj(a.symbols[j])));
            min_gap = std::min(min_gap, gap);
        }
    }
    CHECK(min_gap == doctest::Approx(kPi / 4).epsilon(1e-12));
}

TEST_CASE("alphabet invariants for alpha in {2,4,8,16}") {
    for (int order : {2, 4, 8, 16}) {
        const auto a = make_psk_alphabet(order);
        cplx sum{};
        for (auto s : a.symbols) sum += s;
        CHECK(std::abs(sum) < 1e-12);
        // closed under rotation by 2*pi/alpha
        const cplx rot = std::polar(1.0, 2 * kPi / order);
        for (int i = 0; i < order; ++i) {
            const cplx rotated = a.symbols[i] * rot;
            double best = 1e9;
            for (auto s : a.symbols) best = std::min(best, std::abs(s - rotated));
            CHECK(best < 1e-12);
        }
    }
}

TEST_CASE("invalid orders rejected") {
    CHECK_THROWS_AS(make_psk_alphabet(3), std::invalid_argument);
    CHECK_THROWS_AS(make_psk_alphabet(1), std::invalid_argument);
    CHECK_THROWS_AS(make_psk_alphabet(128), std::invalid_argument);
}

TEST_CASE("canonical QPSK Gray table") {
    const auto a = make_psk_alphabet(4);
    const auto g = build_gray_map(a);
    // word 00 -> angle pi/4, 01 -> 3pi/4, 11 -> 5pi/4, 10 -> 7pi/4
    const double expected[4] = {kPi / 4, 3 * kPi / 4, 5 * kPi / 4, 7 * kPi / 4};
    const int words[4] = {0b00, 0b01, 0b11, 0b10};
    for (int t = 0; t < 4; ++t) {
        const cplx s = a.symbols[g.forward[words[t]]];
        CHECK(std::abs(s - std::polar(1.0, expected[t])) < 1e-12);
    }
}

TEST_CASE("Gray property: angular neighbors differ in one bit") {
    for (int order : {4, 8, 16}) {
        const auto a = make_psk_alphabet(order);
        const auto g = build_gray_map(a);
        for (int i = 0; i < order; ++i) {
            const int j = (i + 1) % order;  // symbols are in increasing angle order
            const int diff = g.inverse[i] ^ g.inverse[j];
            CHECK(std::popcount(static_cast<unsigned>(diff)) == 1);
        }
    }
}

TEST_CASE("bit partitions are balanced level sets") {
    for (int order : {4, 8}) {
        const auto a = make_psk_alphabet(order);
        const auto g = build_gray_map(a);
        const auto p = bit_partitions(a, g);
        for (int i = 0; i < p.bits_per_symbol; ++i) {
            CHECK(p.set[i][0].size() == static_cast<std::size_t>(order / 2));
            CHECK(p.set[i][1].size() == static_cast<std::size_t>(order / 2));
            std::vector<bool> seen(order, false);
            for (int b : {0, 1})
                for (int s : p.set[i][b]) {
                    CHECK(!seen[s]);
                    seen[s] = true;
                }
            // partitions never collapse
            double min_dist = 1e9;
            for (int s1 : p.set[i][1])
                for (int s0 : p.set[i][0])
                    min_dist = std::min(min_dist, std::abs(a.symbols[s1] - a.symbols[s0]));
            CHECK(min_dist > 0.0);
        }
    }
}

TEST_CASE("8-PSK bit-2 membership matches direct Gray-table enumeration") {
    const auto a = make_psk_alphabet(8);
    const auto g = build_gray_map(a);
    const auto p = bit_partitions(a, g);
    for (int b : {0, 1})
        for (int s : p.set[2][b])
            CHECK(((g.inverse[s] >> 0) & 1) == b);  // bit 2 of 3 is the LSB
}

TEST_CASE("modulate maps 0011 to pi/4 then 5pi/4") {
    const auto a = make_psk_alphabet(4);
    const auto g = build_gray_map(a);
    const std::uint8_t bits[] = {0, 0, 1, 1};
    const auto sym = modulate(bits, a, g);
    REQUIRE(sym.size() == 2);
    CHECK(std::abs(a.symbols[sym[0]] - std::polar(1.0, kPi / 4)) < 1e-12);
    CHECK(std::abs(a.symbols[sym[1]] - std::polar(1.0, 5 * kPi / 4)) < 1e-12);
}

TEST_CASE("modulate rejects ragged input and handles empty input") {
    const auto a = make_psk_alphabet(4);
    const auto g = build_gray_map(a);
    const std::uint8_t bits[] = {1};
    CHECK_THROWS_AS(modulate(bits, a, g), std::invalid_argument);
    CHECK(modulate(std::span<const std::uint8_t>{}, a, g).empty());
}

TEST_CASE("modulate / demap roundtrip on random blocks") {
    std::mt19937_64 gen(7);
    for (int order : {2, 4, 8, 16}) {
        const auto a = make_psk_alphabet(order);
        const auto g = build_gray_map(a);
        std::vector<std::uint8_t> bits(2048 * a.bits_per_symbol / 2);
        for (auto& b : bits) b = gen() & 1;
        const auto sym = modulate(bits, a, g);
        CHECK(sym.size() == bits.size() / a.bits_per_symbol);
        CHECK(symbols_to_bits(sym, a, g) == bits);
    }
}
