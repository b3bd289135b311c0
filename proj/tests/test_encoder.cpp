#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "popsan/encoder.hpp"

using namespace popsan;

namespace {

PopulationCoder make_coder(int obs_dim = 2, int pop = 3) {
    Vec lo(obs_dim, -1.0), hi(obs_dim, 1.0);
    return PopulationCoder(obs_dim, pop, lo, hi);
}

}  // namespace

TEST_CASE("activation is 1 at the center and exp(-1/2) one width away") {
    PopulationCoder coder = make_coder();
    Vec s{coder.mu(0, 1), coder.mu(1, 2)};
    Mat act = coder.compute_receptive_field(s);
    CHECK(act(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(act(1, 2) == doctest::Approx(1.0).epsilon(1e-12));

    Vec shifted{coder.mu(0, 1) + coder.sigma(0, 1), coder.mu(1, 2)};
    Mat act2 = coder.compute_receptive_field(shifted);
    CHECK(act2(0, 1) == doctest::Approx(0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("full matrix matches an independent scalar recomputation") {
    PopulationCoder coder = make_coder(2, 3);
    // Shift the grid a little so nothing sits at a symmetric special case.
    RngStream rng(5, 0);
    for (double& v : coder.mu.a) v += rng.uniform(-0.1, 0.1);
    for (double& v : coder.sigma.a) v += rng.uniform(0.0, 0.05);

    Vec s{0.31, -0.44};
    Mat act = coder.compute_receptive_field(s);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            const double d = s[i] - coder.mu(i, j);
            const double expect = std::exp(-d * d / (2.0 * coder.sigma(i, j) * coder.sigma(i, j)));
            CHECK(act(i, j) == doctest::Approx(expect).epsilon(1e-14));
            CHECK(act(i, j) > 0.0);
            CHECK(act(i, j) <= 1.0);
        }
}

TEST_CASE("non-finite observations are rejected") {
    PopulationCoder coder = make_coder();
    CHECK_THROWS_AS(coder.compute_receptive_field({0.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(coder.compute_receptive_field({0.0}), std::invalid_argument);
}

TEST_CASE("mu tiles the range evenly and sigma is range/(2 pop)") {
    PopulationCoder coder = make_coder(1, 5);
    CHECK(coder.mu(0, 0) == doctest::Approx(-1.0));
    CHECK(coder.mu(0, 4) == doctest::Approx(1.0));
    CHECK(coder.mu(0, 2) == doctest::Approx(0.0));
    for (int j = 0; j < 5; ++j) CHECK(coder.sigma(0, j) == doctest::Approx(2.0 / 10.0));
}

TEST_CASE("zero activation encodes to silence, unit activation to all ones") {
    PopulationCoder coder = make_coder(1, 4);
    RngStream rng(3, 0);
    Mat zeros(1, 4), ones(1, 4, 1.0);
    SpikeTrain silent = coder.encode_spikes(zeros, 7, rng);
    for (double v : silent.data.a) CHECK(v == 0.0);
    SpikeTrain full = coder.encode_spikes(ones, 7, rng);
    for (double v : full.data.a) CHECK(v == 1.0);
}

TEST_CASE("empirical spike rate approaches the activation") {
    PopulationCoder coder = make_coder(1, 4);
    Mat act(1, 4, 0.5);
    RngStream rng(12, 0);
    SpikeTrain train = coder.encode_spikes(act, 10000, rng);
    for (int j = 0; j < 4; ++j) {
        double rate = 0;
        for (int t = 0; t < train.data.rows; ++t) rate += train.data(t, j);
        rate /= train.data.rows;
        CHECK(std::fabs(rate - 0.5) < 0.02);
    }
}

TEST_CASE("zero timesteps rejected") {
    PopulationCoder coder = make_coder();
    RngStream rng(1, 0);
    Mat act(2, 3, 0.5);
    CHECK_THROWS_AS(coder.encode_spikes(act, 0, rng), std::invalid_argument);
}

TEST_CASE("encoding is reproducible for a fixed seed") {
    PopulationCoder coder = make_coder(2, 3);
    Mat act = coder.compute_receptive_field({0.2, -0.3});
    RngStream a(99, 4), b(99, 4);
    SpikeTrain ta = coder.encode_spikes(act, 11, a);
    SpikeTrain tb = coder.encode_spikes(act, 11, b);
    CHECK(ta.data.a == tb.data.a);
}

TEST_CASE("permuting observation dimensions permutes neuron blocks") {
    // Same per-dimension ranges, so only the observation values move.
    PopulationCoder coder = make_coder(2, 3);
    RngStream a(123, 0), b(123, 0);
    Mat act1 = coder.compute_receptive_field({0.7, -0.2});
    Mat act2 = coder.compute_receptive_field({-0.2, 0.7});
    SpikeTrain t1 = coder.encode_spikes(act1, 6, a);
    SpikeTrain t2 = coder.encode_spikes(act2, 6, b);
    // Spike draws differ in order, so compare the activations blockwise.
    for (int j = 0; j < 3; ++j) {
        CHECK(act1(0, j) == act2(1, j));
        CHECK(act1(1, j) == act2(0, j));
    }
    CHECK(t1.data.rows == t2.data.rows);
}

TEST_CASE("backward matches Eq-style accumulation and vanishes at the center") {
    PopulationCoder coder = make_coder(1, 3);
    Vec s{0.4};
    Mat act = coder.compute_receptive_field(s);

    Mat zeros(2, 3);
    EncoderGrads g0 = coder.backward(zeros, act, s);
    for (double v : g0.d_mu.a) CHECK(v == 0.0);
    for (double v : g0.d_sigma.a) CHECK(v == 0.0);

    // s exactly on every center: (s - mu) factors vanish.
    PopulationCoder point(1, 3, {0.5, }, {0.5 + 1e-9});
    for (int j = 0; j < 3; ++j) point.mu(0, j) = 0.5;
    Vec sc{0.5};
    Mat act_c = point.compute_receptive_field(sc);
    Mat ones(2, 3, 1.0);
    EncoderGrads gc = point.backward(ones, act_c, sc);
    for (double v : gc.d_mu.a) CHECK(v == 0.0);
    for (double v : gc.d_sigma.a) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences of the straight-through loss") {
    // Frozen Bernoulli mask times the activation, summed over 2 timesteps.
    PopulationCoder coder = make_coder(1, 3);
    RngStream rng(17, 0);
    const int timesteps = 2;
    Mat mask(timesteps, 3);
    for (double& v : mask.a) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    mask(0, 0) = 1.0;  // keep at least one active path
    Vec s{0.27};

    auto loss = [&]() {
        Mat act = coder.compute_receptive_field(s);
        double l = 0;
        for (int t = 0; t < timesteps; ++t)
            for (int j = 0; j < 3; ++j) l += mask(t, j) * act(0, j);
        return l;
    };

    Mat act = coder.compute_receptive_field(s);
    EncoderGrads g = coder.backward(mask, act, s);

    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
        double& mu = coder.mu(0, j);
        const double orig = mu;
        mu = orig + h;
        const double up = loss();
        mu = orig - h;
        const double down = loss();
        mu = orig;
        const double fd = (up - down) / (2 * h);
        CHECK(g.d_mu(0, j) == doctest::Approx(fd).epsilon(1e-4));
    }
    for (int j = 0; j < 3; ++j) {
        double& sd = coder.sigma(0, j);
        const double orig = sd;
        sd = orig + h;
        const double up = loss();
        sd = orig - h;
        const double down = loss();
        sd = orig;
        const double fd = (up - down) / (2 * h);
        CHECK(g.d_sigma(0, j) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("gradient shapes equal parameter shapes and stay finite at sigma_min") {
    PopulationCoder coder = make_coder(2, 3);
    coder.sigma.fill(0.0);
    coder.clamp_sigma();
    for (double v : coder.sigma.a) CHECK(v == PopulationCoder::kSigmaMin);
    Vec s{0.9, -0.9};
    Mat act = coder.compute_receptive_field(s);
    Mat g_in(3, 6, 1.0);
    EncoderGrads g = coder.backward(g_in, act, s);
    CHECK(g.d_mu.rows == coder.mu.rows);
    CHECK(g.d_mu.cols == coder.mu.cols);
    CHECK(all_finite(g.d_mu));
    CHECK(all_finite(g.d_sigma));
}
