#pragma once

#include <functional>
#include <string>
#include <vector>

#include "popsan/mat.hpp"
#include "popsan/rng.hpp"

namespace popsan {

struct EnvConfig {
    double dt = 0.02;        // integration step, seconds
    double k_action = 5.0;   // acceleration gain
    double v_max = 2.0;      // speed clamp
    int episode_len = 200;   // steps per episode
};

struct PointMassState {
    double px = 0, py = 0;  // position
    double vx = 0, vy = 0;  // velocity
    double cx = 0, cy = 0;  // commanded velocity
    int step_count = 0;
};

struct StepResult {
    Vec observation;
    double reward = 0;
    bool done = false;
};

// 2-D point mass that must match its velocity to a commanded velocity.
// Observation is (velocity, command, velocity - command), 6 values. Dynamics
// are deterministic; the only randomness is the command draw at reset.
class PointMassEnv {
public:
    static constexpr int kObsDim = 6;
    static constexpr int kActDim = 2;

    explicit PointMassEnv(const EnvConfig& cfg = EnvConfig{}) : cfg_(cfg) {}

    Vec reset(PointMassState& state, RngStream& rng) const;
    StepResult step(PointMassState& state, const Vec& action) const;
    Vec observe(const PointMassState& state) const;

    const EnvConfig& config() const { return cfg_; }

private:
    EnvConfig cfg_;
};

struct NoiseConfig {
    double sigma = 0.0;
};

// Adds one Gaussian draw per command channel to the observed command and
// keeps the derived (velocity - command) channels consistent with it. The
// velocity channels are untouched; the underlying task target is not moved.
Vec inject_noise(const Vec& observation, const NoiseConfig& noise, RngStream& rng);

struct TrackingRow {
    double sigma = 0;
    double mean_abs_err_x = 0;
    double mean_abs_err_y = 0;
    double std_err = 0;
    int episodes = 0;
    int diverged = 0;
};

struct TrackingReport {
    std::vector<TrackingRow> rows;
    // mean ||command|| over evaluated episodes, for error-vs-command ratios
    double mean_command_norm = 0;
    double mean_err_norm_sigma0 = 0;  // mean ||v - cmd|| at sigma 0, post-settle
    void write_csv(const std::string& path) const;
};

using PolicyFn = std::function<Vec(const Vec& observation)>;

struct TrackingOptions {
    std::vector<double> sigmas{0.0};
    int episodes = 20;
    int settle_steps = 50;  // steps excluded from the error statistics
    uint64_t seed = 0;
    EnvConfig env;
};

// Deterministic-policy evaluation: per sigma, runs the given number of
// episodes, feeding the policy noise-injected observations and measuring
// tracking error against the true command after the settle window.
TrackingReport evaluate_tracking(const PolicyFn& policy, const TrackingOptions& opt);

}  // namespace popsan
