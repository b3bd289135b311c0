#pragma once

#include <string>
#include <vector>

#include "popsan/adam.hpp"
#include "popsan/dense.hpp"
#include "popsan/env.hpp"
#include "popsan/policy.hpp"

namespace popsan {

struct PPOConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    int epochs = 4;
    int minibatch_size = 256;
    double lr_actor = 3e-4;
    double lr_critic = 1e-3;
    double entropy_coef = 0.005;
    int num_envs = 16;
    int rollout_steps = 64;
    int iterations = 1000;
    int checkpoint_every = 100;
    // Plain single-head PPO: only the final head's loss is computed and no
    // stage weighting happens anywhere. Used to verify that the staged loss
    // with all weight on the final stage reduces to ordinary PPO exactly.
    bool single_head = false;

    void validate() const;
};

// Rollout storage, env-major so each environment's steps stay contiguous.
struct TrajectoryBatch {
    int num_envs = 0;
    int steps = 0;
    int num_heads = 1;

    Mat obs;            // [N x obs_dim]
    Mat actions;        // [N x act_dim]
    Vec rewards;        // [N]
    Vec dones;          // [N], 1 when the episode ended at this step
    Vec values;         // [N]
    Vec logp_behavior;  // [N], final head at collection time
    Mat logp_aux;       // [N x (num_heads-1)]
    Vec advantages;     // [N]
    Vec returns;        // [N]
    Vec last_values;    // [num_envs], bootstrap values after the last step

    int size() const { return num_envs * steps; }
};

struct UpdateStats {
    std::vector<double> stage_losses;  // mean per-head surrogate loss; skipped stages report 0
    double kl = 0;
    double clip_frac = 0;
    double entropy = 0;
    double critic_loss = 0;
    int samples = 0;
    bool aborted = false;
};

bool bitwise_equal(const UpdateStats& a, const UpdateStats& b);

// Persistent set of training environments; episodes continue across rollouts.
struct EnvSet {
    PointMassEnv env;
    NoiseConfig train_noise;
    std::vector<PointMassState> states;
    std::vector<Vec> obs;
    std::vector<RngStream> reset_rngs;
    std::vector<RngStream> sample_rngs;  // encoder spikes + action noise
    std::vector<RngStream> noise_rngs;

    EnvSet(const EnvConfig& cfg, int num_envs, uint64_t seed, double train_noise_sigma = 0.0);
    int size() const { return static_cast<int>(states.size()); }
};

struct CriticLearner {
    DenseNet net;
    DenseGrads grads;
    Adam adam;

    CriticLearner(int obs_dim, const std::vector<int>& hidden, uint64_t seed, double lr);
};

double gaussian_logp(const Vec& a, const Vec& mean, const Vec& log_std);
double gaussian_entropy(const Vec& log_std);

// Steps every environment for the configured rollout length, sampling from
// the Gaussian policy around the final head's mean. Train-mode forwards also
// record the auxiliary heads' log-probs of the executed action and, when
// spike_rate_mean is non-null, the mean per-layer spike rates.
TrajectoryBatch collect_rollout(EnvSet& envs, PolicyModel& policy, CriticLearner& critic,
                                const PPOConfig& cfg,
                                std::vector<double>* spike_rate_mean = nullptr);

// Standard recursive generalized advantage estimation over each env segment;
// returns = advantages + values.
void compute_gae(TrajectoryBatch& batch, double gamma, double gae_lambda);

// In-place batch normalization of advantages to mean 0, std 1 (population
// std). Idempotent up to floating-point noise.
void normalize_advantages(TrajectoryBatch& batch);

// Minibatch PPO epochs over the batch. Per head i the loss is the clipped
// surrogate of that head's log-probs of the executed actions; the final head
// additionally carries the entropy bonus. The total actor loss weights each
// stage by its configured loss weight. The critic is regressed to returns
// with squared error under its own optimizer.
UpdateStats ppo_update(PolicyModel& policy, CriticLearner& critic, const TrajectoryBatch& batch,
                       const PPOConfig& cfg, RngStream& rng);

struct TrainOptions {
    PPOConfig ppo;
    EnvConfig env;
    double train_noise_sigma = 0.0;
    std::vector<int> critic_hidden{64, 64};
    uint64_t seed = 0;
    std::string out_dir = "out";
    bool verbose = false;
};

struct TrainResult {
    std::string final_checkpoint;
    std::string metrics_path;
    int iterations_run = 0;
    std::vector<UpdateStats> stats;  // one per iteration
};

// Full training run: rollouts, GAE, updates, one metrics row per iteration,
// periodic checkpoints named ckpt_<iteration>.bin under out_dir.
TrainResult train(PolicyModel& policy, const TrainOptions& opt);

}  // namespace popsan
