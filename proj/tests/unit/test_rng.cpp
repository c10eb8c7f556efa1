#include <cmath>
#include <set>

#include "doctest.h"
#include "faed/rng.hpp"

using faed::RngStream;

TEST_CASE("draws are a pure function of (seed, stream, counter)") {
    RngStream a(42, 7);
    for (int i = 0; i < 10; ++i) a.next_u64();
    RngStream b(42, 7, 10);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(RngStream(42, 7).next_u64() != RngStream(42, 8).next_u64());
    CHECK(RngStream(42, 7).next_u64() != RngStream(43, 7).next_u64());
}

TEST_CASE("substreams depend on identity, not position") {
    RngStream a(1, 2);
    const auto before = a.substream(3).next_u64();
    a.next_u64();
    CHECK(a.substream(3).next_u64() == before);
    CHECK(a.substream(4).next_u64() != before);
}

TEST_CASE("uniform and normal moments") {
    RngStream r(5, 0);
    constexpr int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("index stays in range and covers it") {
    RngStream r(9, 1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto k = r.index(7);
        CHECK(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}
