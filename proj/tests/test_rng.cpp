#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "popsan/rng.hpp"

using namespace popsan;

TEST_CASE("same seed and stream reproduce the sequence") {
    RngStream a(42, 3), b(42, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams of one seed decorrelate") {
    RngStream a(42, 0), b(42, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniform01 stays in [0, 1)") {
    RngStream rng(1, 0);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    RngStream rng(7, 0);
    const int n = 200000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    CHECK(std::fabs(sum / n) < 0.01);
    CHECK(std::fabs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("uniform_int covers the range without bias at the edges") {
    RngStream rng(9, 0);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_int(7)];
    for (int c : counts) {
        CHECK(c > 9000);
        CHECK(c < 11000);
    }
}

TEST_CASE("shuffle is a permutation") {
    RngStream rng(11, 0);
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);
}
