#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "popsan/env.hpp"

using namespace popsan;

TEST_CASE("reset: origin state, uniform command, 6-value observation") {
    PointMassEnv env;
    PointMassState state;
    RngStream a(5, 0), b(5, 0);
    Vec obs = env.reset(state, a);
    REQUIRE(obs.size() == 6);
    CHECK(state.px == 0.0);
    CHECK(state.vx == 0.0);
    CHECK(obs[0] == 0.0);
    CHECK(obs[2] == state.cx);
    CHECK(obs[4] == -state.cx);

    PointMassState state2;
    Vec obs2 = env.reset(state2, b);
    CHECK(obs == obs2);  // fixed seed, identical reset

    double mean_x = 0;
    RngStream rng(123, 0);
    for (int k = 0; k < 1000; ++k) {
        PointMassState s;
        env.reset(s, rng);
        mean_x += s.cx;
        CHECK(s.cx >= -1.0);
        CHECK(s.cx <= 1.0);
    }
    CHECK(std::fabs(mean_x / 1000) < 0.05);
}

TEST_CASE("perfect tracking with no action earns reward 1") {
    PointMassEnv env;
    PointMassState state;
    state.vx = 0.4;
    state.vy = -0.3;
    state.cx = 0.4;
    state.cy = -0.3;
    StepResult r = env.step(state, {0.0, 0.0});
    CHECK(r.reward == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quarter squared error and no action gives exp(-1)") {
    PointMassEnv env;
    PointMassState state;
    state.vx = 0.5;  // ||v - c||^2 = 0.25
    state.cx = 0.0;
    StepResult r = env.step(state, {0.0, 0.0});
    CHECK(r.reward == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("hand-integrated Euler step") {
    PointMassEnv env;  // dt 0.02, gain 5 -> dv = 0.1 * action
    PointMassState state;
    state.vx = 0.2;
    state.vy = -0.1;
    state.px = 1.0;
    state.cx = 0.5;
    StepResult r = env.step(state, {0.6, -1.0});
    CHECK(state.vx == doctest::Approx(0.2 + 0.06).epsilon(1e-12));
    CHECK(state.vy == doctest::Approx(-0.1 - 0.1).epsilon(1e-12));
    CHECK(state.px == doctest::Approx(1.0 + 0.26 * 0.02).epsilon(1e-12));
    CHECK(state.step_count == 1);
    CHECK_FALSE(r.done);

    // Actions are clamped into [-1, 1] before integration.
    PointMassState s2;
    env.step(s2, {100.0, 0.0});
    CHECK(s2.vx == doctest::Approx(0.1).epsilon(1e-12));

    // Speed is clamped to v_max.
    PointMassState s3;
    s3.vx = 1.99;
    s3.vy = 0.0;
    env.step(s3, {1.0, 0.0});
    CHECK(std::sqrt(s3.vx * s3.vx + s3.vy * s3.vy) <= 2.0 + 1e-12);
}

TEST_CASE("episode terminates after 200 steps and rewards stay in (-0.02, 1]") {
    PointMassEnv env;
    PointMassState state;
    RngStream rng(31, 0);
    env.reset(state, rng);
    bool done = false;
    int steps = 0;
    while (!done) {
        Vec action{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        StepResult r = env.step(state, action);
        CHECK(r.reward > -0.02);
        CHECK(r.reward <= 1.0);
        done = r.done;
        ++steps;
    }
    CHECK(steps == 200);
    CHECK_THROWS_AS(env.step(state, {std::nan(""), 0.0}), std::invalid_argument);
}

TEST_CASE("noise injection touches only command-linked channels") {
    Vec obs{0.1, 0.2, 0.3, 0.4, -0.2, -0.2};
    RngStream rng(7, 0);

    Vec same = inject_noise(obs, {0.0}, rng);
    CHECK(same == obs);

    Vec noisy = inject_noise(obs, {0.3}, rng);
    CHECK(noisy[0] == obs[0]);
    CHECK(noisy[1] == obs[1]);
    CHECK(noisy[2] != obs[2]);
    // Derived error channel moves consistently: v - (c + n) = (v - c) - n.
    const double nx = noisy[2] - obs[2];
    const double ny = noisy[3] - obs[3];
    CHECK(noisy[4] == doctest::Approx(obs[4] - nx).epsilon(1e-12));
    CHECK(noisy[5] == doctest::Approx(obs[5] - ny).epsilon(1e-12));
}

TEST_CASE("noise magnitude matches sigma empirically") {
    Vec obs(6, 0.0);
    RngStream rng(19, 0);
    const int n = 100000;
    double sumsq = 0;
    for (int k = 0; k < n; ++k) {
        Vec noisy = inject_noise(obs, {0.3}, rng);
        sumsq += noisy[2] * noisy[2];
    }
    CHECK(std::fabs(std::sqrt(sumsq / n) - 0.3) < 0.01);
}

TEST_CASE("perturbation variance is monotone in sigma for any policy") {
    Vec obs(6, 0.0);
    Vec sigmas{0.0, 0.1, 0.2, 0.3};
    double prev = -1.0;
    for (double s : sigmas) {
        RngStream rng(23, 0);
        double sumsq = 0;
        for (int k = 0; k < 20000; ++k) {
            Vec noisy = inject_noise(obs, {s}, rng);
            sumsq += noisy[2] * noisy[2] + noisy[3] * noisy[3];
        }
        CHECK(sumsq >= prev);
        prev = sumsq;
    }
}

TEST_CASE("oracle proportional controller tracks within 0.05 after settling") {
    auto oracle = [](const Vec& obs) {
        // action proportional to (command - velocity), read from the obs
        return Vec{4.0 * (obs[2] - obs[0]), 4.0 * (obs[3] - obs[1])};
    };
    TrackingOptions opt;
    opt.sigmas = {0.0};
    opt.episodes = 20;
    opt.seed = 3;
    TrackingReport report = evaluate_tracking(oracle, opt);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].mean_abs_err_x < 0.05);
    CHECK(report.rows[0].mean_abs_err_y < 0.05);
    CHECK(report.rows[0].diverged == 0);
    CHECK(report.mean_command_norm > 0.0);
}

TEST_CASE("zero policy's tracking error equals the mean command magnitude") {
    auto zero = [](const Vec&) { return Vec{0.0, 0.0}; };
    TrackingOptions opt;
    opt.sigmas = {0.0};
    opt.episodes = 50;
    opt.seed = 17;
    TrackingReport report = evaluate_tracking(zero, opt);
    // With no control velocity stays 0, so |v - c| = |c| throughout.
    CHECK(report.mean_err_norm_sigma0 ==
          doctest::Approx(report.mean_command_norm).epsilon(1e-9));
}

TEST_CASE("one report row per sigma") {
    auto zero = [](const Vec&) { return Vec{0.0, 0.0}; };
    TrackingOptions opt;
    opt.sigmas = {0.0, 0.1, 0.2, 0.3};
    opt.episodes = 2;
    TrackingReport report = evaluate_tracking(zero, opt);
    CHECK(report.rows.size() == 4);
    for (size_t k = 0; k < 4; ++k) CHECK(report.rows[k].sigma == opt.sigmas[k]);
}
