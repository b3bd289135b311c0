#include "popsan/env.hpp"

#include <cmath>

#include "popsan/csv.hpp"

namespace popsan {

Vec PointMassEnv::observe(const PointMassState& s) const {
    return {s.vx, s.vy, s.cx, s.cy, s.vx - s.cx, s.vy - s.cy};
}

Vec PointMassEnv::reset(PointMassState& state, RngStream& rng) const {
    state = PointMassState{};
    state.cx = rng.uniform(-1.0, 1.0);
    state.cy = rng.uniform(-1.0, 1.0);
    return observe(state);
}

StepResult PointMassEnv::step(PointMassState& s, const Vec& action) const {
    require(action.size() == kActDim, "action must have 2 components");
    require(all_finite(action), "non-finite action rejected");

    auto clamp1 = [](double a) { return a < -1.0 ? -1.0 : (a > 1.0 ? 1.0 : a); };
    const double ax = clamp1(action[0]);
    const double ay = clamp1(action[1]);

    s.vx += ax * cfg_.dt * cfg_.k_action;
    s.vy += ay * cfg_.dt * cfg_.k_action;
    const double speed = std::sqrt(s.vx * s.vx + s.vy * s.vy);
    if (speed > cfg_.v_max) {
        const double scale = cfg_.v_max / speed;
        s.vx *= scale;
        s.vy *= scale;
    }
    s.px += s.vx * cfg_.dt;
    s.py += s.vy * cfg_.dt;
    s.step_count += 1;

    const double ex = s.vx - s.cx;
    const double ey = s.vy - s.cy;
    StepResult r;
    r.reward = std::exp(-(ex * ex + ey * ey) / 0.25) - 0.01 * (ax * ax + ay * ay);
    r.done = s.step_count >= cfg_.episode_len;
    r.observation = observe(s);
    return r;
}

Vec inject_noise(const Vec& obs, const NoiseConfig& noise, RngStream& rng) {
    require(obs.size() == PointMassEnv::kObsDim, "observation must have 6 values");
    require(noise.sigma >= 0.0, "noise sigma must be nonnegative");
    if (noise.sigma == 0.0) return obs;
    Vec out = obs;
    const double nx = rng.normal(0.0, noise.sigma);
    const double ny = rng.normal(0.0, noise.sigma);
    out[2] += nx;
    out[3] += ny;
    out[4] -= nx;  // velocity - (command + n) = (velocity - command) - n
    out[5] -= ny;
    return out;
}

TrackingReport evaluate_tracking(const PolicyFn& policy, const TrackingOptions& opt) {
    require(!opt.sigmas.empty(), "need at least one sigma");
    require(opt.episodes >= 1, "need at least one episode");
    PointMassEnv env(opt.env);

    TrackingReport report;
    double cmd_norm_sum = 0;
    int cmd_count = 0;
    for (size_t si = 0; si < opt.sigmas.size(); ++si) {
        NoiseConfig noise{opt.sigmas[si]};
        TrackingRow row;
        row.sigma = noise.sigma;
        row.episodes = opt.episodes;

        double sum_ex = 0, sum_ey = 0, sum_sq = 0, sum_norm = 0;
        long samples = 0;
        for (int ep = 0; ep < opt.episodes; ++ep) {
            RngStream reset_rng(opt.seed, stream_id::kEvalBase + si * 1000 + ep * 2);
            RngStream noise_rng(opt.seed, stream_id::kEvalBase + si * 1000 + ep * 2 + 1);
            PointMassState state;
            Vec obs = env.reset(state, reset_rng);
            if (si == 0) {
                cmd_norm_sum += std::sqrt(state.cx * state.cx + state.cy * state.cy);
                ++cmd_count;
            }
            bool diverged = false;
            for (int t = 0; t < opt.env.episode_len; ++t) {
                Vec noisy = inject_noise(obs, noise, noise_rng);
                Vec action = policy(noisy);
                if (!all_finite(action)) {
                    diverged = true;
                    break;
                }
                StepResult sr = env.step(state, action);
                obs = sr.observation;
                if (!all_finite(obs)) {
                    diverged = true;
                    break;
                }
                if (t >= opt.settle_steps) {
                    const double ex = std::fabs(state.vx - state.cx);
                    const double ey = std::fabs(state.vy - state.cy);
                    sum_ex += ex;
                    sum_ey += ey;
                    sum_sq += ex * ex + ey * ey;
                    sum_norm += std::sqrt(ex * ex + ey * ey);
                    ++samples;
                }
            }
            if (diverged) ++row.diverged;
        }
        if (samples > 0) {
            row.mean_abs_err_x = sum_ex / samples;
            row.mean_abs_err_y = sum_ey / samples;
            const double mean_abs = 0.5 * (row.mean_abs_err_x + row.mean_abs_err_y);
            const double mean_sq = sum_sq / (2.0 * samples);
            const double var = mean_sq - mean_abs * mean_abs;
            row.std_err = var > 0 ? std::sqrt(var) : 0.0;
            if (noise.sigma == 0.0) report.mean_err_norm_sigma0 = sum_norm / samples;
        }
        report.rows.push_back(row);
    }
    report.mean_command_norm = cmd_count > 0 ? cmd_norm_sum / cmd_count : 0.0;
    return report;
}

void TrackingReport::write_csv(const std::string& path) const {
    CsvWriter csv(path, {"sigma", "mean_abs_err_x", "mean_abs_err_y", "std_err", "episodes",
                         "diverged"});
    for (const TrackingRow& r : rows)
        csv.row({r.sigma, r.mean_abs_err_x, r.mean_abs_err_y, r.std_err,
                 static_cast<double>(r.episodes), static_cast<double>(r.diverged)});
}

}  // namespace popsan
