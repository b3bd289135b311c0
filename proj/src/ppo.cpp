#include "popsan/ppo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "popsan/csv.hpp"

namespace popsan {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void PPOConfig::validate() const {
    require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must be in [0, 1]");
    require(clip_eps > 0.0, "clip epsilon must be positive");
    require(epochs >= 1, "need at least one epoch");
    require(minibatch_size >= 1, "minibatch size must be positive");
    require(num_envs >= 1, "need at least one environment");
    require(iterations >= 0, "iteration budget must be nonnegative");
}

bool bitwise_equal(const UpdateStats& a, const UpdateStats& b) {
    auto same = [](double x, double y) {
        return std::memcmp(&x, &y, sizeof(double)) == 0;
    };
    if (a.stage_losses.size() != b.stage_losses.size()) return false;
    for (size_t i = 0; i < a.stage_losses.size(); ++i)
        if (!same(a.stage_losses[i], b.stage_losses[i])) return false;
    return same(a.kl, b.kl) && same(a.clip_frac, b.clip_frac) && same(a.entropy, b.entropy) &&
           same(a.critic_loss, b.critic_loss) && a.samples == b.samples &&
           a.aborted == b.aborted;
}

EnvSet::EnvSet(const EnvConfig& cfg, int num_envs, uint64_t seed, double train_noise_sigma)
    : env(cfg), train_noise{train_noise_sigma} {
    states.resize(num_envs);
    obs.resize(num_envs);
    for (int e = 0; e < num_envs; ++e) {
        reset_rngs.emplace_back(seed, stream_id::kEnvBase + e);
        sample_rngs.emplace_back(seed, stream_id::kRolloutBase + e);
        noise_rngs.emplace_back(seed, stream_id::kRolloutBase + 10000 + e);
        obs[e] = env.reset(states[e], reset_rngs[e]);
    }
}

CriticLearner::CriticLearner(int obs_dim, const std::vector<int>& hidden, uint64_t seed,
                             double lr) {
    RngStream rng(seed, stream_id::kCriticInit);
    net = DenseNet(obs_dim, hidden, 1, rng);
    grads = net.zero_grads();
    adam = Adam(net.param_refs("critic"), lr);
}

double gaussian_logp(const Vec& a, const Vec& mean, const Vec& log_std) {
    double lp = 0.0;
    for (size_t d = 0; d < a.size(); ++d) {
        const double sd = std::exp(log_std[d]);
        const double z = (a[d] - mean[d]) / sd;
        lp += -0.5 * z * z - log_std[d] - 0.5 * kLog2Pi;
    }
    return lp;
}

double gaussian_entropy(const Vec& log_std) {
    double h = 0.0;
    for (double ls : log_std) h += ls + 0.5 * (1.0 + kLog2Pi);
    return h;
}

TrajectoryBatch collect_rollout(EnvSet& envs, PolicyModel& policy, CriticLearner& critic,
                                const PPOConfig& cfg, std::vector<double>* spike_rate_mean) {
    require(cfg.rollout_steps >= 1, "empty rollout requested");
    require(envs.size() == cfg.num_envs, "env set size does not match config");

    const int steps = cfg.rollout_steps;
    const int num_envs = cfg.num_envs;
    const int obs_dim = policy.obs_dim();
    const int act_dim = policy.act_dim();
    const int num_heads = policy.num_heads();
    const int n = num_envs * steps;

    TrajectoryBatch batch;
    batch.num_envs = num_envs;
    batch.steps = steps;
    batch.num_heads = num_heads;
    batch.obs = Mat(n, obs_dim);
    batch.actions = Mat(n, act_dim);
    batch.rewards.assign(n, 0.0);
    batch.dones.assign(n, 0.0);
    batch.values.assign(n, 0.0);
    batch.logp_behavior.assign(n, 0.0);
    if (num_heads > 1) batch.logp_aux = Mat(n, num_heads - 1);
    batch.last_values.assign(num_envs, 0.0);

    std::vector<double> rate_sum;
    long rate_count = 0;
    std::vector<double> rates;

    for (int e = 0; e < num_envs; ++e) {
        for (int t = 0; t < steps; ++t) {
            const int idx = e * steps + t;
            Vec ob = envs.obs[e];
            if (envs.train_noise.sigma > 0.0)
                ob = inject_noise(ob, envs.train_noise, envs.noise_rngs[e]);
            std::copy(ob.begin(), ob.end(), batch.obs.row(idx));

            std::vector<Vec> means = policy.forward_means(
                ob, Mode::Train, envs.sample_rngs[e], spike_rate_mean ? &rates : nullptr);
            if (spike_rate_mean) {
                if (rate_sum.empty()) rate_sum.assign(rates.size(), 0.0);
                for (size_t k = 0; k < rates.size(); ++k) rate_sum[k] += rates[k];
                ++rate_count;
            }

            batch.values[idx] = critic.net.forward(ob)[0];

            const Vec& mean_final = means.back();
            Vec action(act_dim);
            for (int d = 0; d < act_dim; ++d)
                action[d] = mean_final[d] +
                            std::exp(policy.log_std()[d]) * envs.sample_rngs[e].normal();
            std::copy(action.begin(), action.end(), batch.actions.row(idx));
            batch.logp_behavior[idx] = gaussian_logp(action, mean_final, policy.log_std());
            for (int i = 0; i + 1 < num_heads; ++i)
                batch.logp_aux(idx, i) = gaussian_logp(action, means[i], policy.log_std());

            StepResult sr = envs.env.step(envs.states[e], action);
            batch.rewards[idx] = sr.reward;
            batch.dones[idx] = sr.done ? 1.0 : 0.0;
            if (sr.done) {
                envs.obs[e] = envs.env.reset(envs.states[e], envs.reset_rngs[e]);
            } else {
                envs.obs[e] = sr.observation;
            }
        }
        batch.last_values[e] = critic.net.forward(envs.obs[e])[0];
    }

    if (spike_rate_mean) {
        spike_rate_mean->assign(rate_sum.size(), 0.0);
        for (size_t k = 0; k < rate_sum.size(); ++k)
            (*spike_rate_mean)[k] = rate_count > 0 ? rate_sum[k] / rate_count : 0.0;
    }
    return batch;
}

void compute_gae(TrajectoryBatch& batch, double gamma, double gae_lambda) {
    const int n = batch.size();
    require(n > 0, "cannot compute advantages of an empty batch");
    batch.advantages.assign(n, 0.0);
    batch.returns.assign(n, 0.0);
    for (int e = 0; e < batch.num_envs; ++e) {
        double gae = 0.0;
        for (int t = batch.steps - 1; t >= 0; --t) {
            const int idx = e * batch.steps + t;
            const double nonterminal = 1.0 - batch.dones[idx];
            const double next_value = (t == batch.steps - 1)
                                          ? batch.last_values[e]
                                          : batch.values[idx + 1];
            const double delta =
                batch.rewards[idx] + gamma * next_value * nonterminal - batch.values[idx];
            gae = delta + gamma * gae_lambda * nonterminal * gae;
            batch.advantages[idx] = gae;
            batch.returns[idx] = gae + batch.values[idx];
        }
    }
    require(all_finite(batch.advantages), "advantages must be finite");
}

void normalize_advantages(TrajectoryBatch& batch) {
    const int n = batch.size();
    require(n > 0 && static_cast<int>(batch.advantages.size()) == n,
            "advantages not computed yet");
    double mean = 0.0;
    for (double a : batch.advantages) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    var /= n;
    const double inv = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : batch.advantages) a = (a - mean) * inv;
}

UpdateStats ppo_update(PolicyModel& policy, CriticLearner& critic, const TrajectoryBatch& batch,
                       const PPOConfig& cfg, RngStream& rng) {
    cfg.validate();
    const int n = batch.size();
    require(n > 0, "cannot update from an empty batch");
    require(static_cast<int>(batch.advantages.size()) == n, "batch is missing advantages");

    const int num_heads = policy.num_heads();
    const int act_dim = policy.act_dim();

    UpdateStats stats;
    stats.stage_losses.assign(num_heads, 0.0);
    std::vector<long> stage_counts(num_heads, 0);
    double kl_sum = 0.0, clip_sum = 0.0, critic_loss_sum = 0.0, entropy_sum = 0.0;
    long final_count = 0;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < n; start += cfg.minibatch_size) {
            const int mb = std::min(cfg.minibatch_size, n - start);
            policy.zero_grads();
            critic.grads = critic.net.zero_grads();

            bool finite = true;
            for (int k = 0; k < mb && finite; ++k) {
                const int idx = order[start + k];
                Vec ob(batch.obs.row(idx), batch.obs.row(idx) + batch.obs.cols);
                Vec action(batch.actions.row(idx), batch.actions.row(idx) + act_dim);
                const double adv = batch.advantages[idx];
                const double entropy = gaussian_entropy(policy.log_std());

                std::vector<Vec> means = policy.forward_traced(ob, rng);
                std::vector<Vec> dl_dmeans(cfg.single_head ? 1 : num_heads);
                Vec dl_dlog_std(policy.log_std().size(), 0.0);

                for (int i = 0; i < num_heads; ++i) {
                    const bool final_head = (i == num_heads - 1);
                    const double weight = policy.stage_weight(i);
                    if (cfg.single_head && !final_head) continue;
                    if (!cfg.single_head && !final_head && weight == 0.0) continue;

                    const double old_logp = final_head ? batch.logp_behavior[idx]
                                                       : batch.logp_aux(idx, i);
                    const Vec& mean = means[i];
                    const double logp = gaussian_logp(action, mean, policy.log_std());
                    double log_ratio = logp - old_logp;
                    if (log_ratio > 30.0) log_ratio = 30.0;
                    if (log_ratio < -30.0) log_ratio = -30.0;
                    const double ratio = std::exp(log_ratio);

                    const double unclipped = ratio * adv;
                    const double clipped_ratio =
                        ratio < 1.0 - cfg.clip_eps
                            ? 1.0 - cfg.clip_eps
                            : (ratio > 1.0 + cfg.clip_eps ? 1.0 + cfg.clip_eps : ratio);
                    const double clipped = clipped_ratio * adv;
                    double loss_i = -std::min(unclipped, clipped);
                    const double g_logp = unclipped <= clipped ? -adv * ratio : 0.0;

                    if (final_head) {
                        loss_i -= cfg.entropy_coef * entropy;
                        kl_sum += (ratio - 1.0) - log_ratio;
                        clip_sum += std::fabs(ratio - 1.0) > cfg.clip_eps ? 1.0 : 0.0;
                        ++final_count;
                    }
                    if (!std::isfinite(loss_i)) {
                        finite = false;
                        break;
                    }
                    stats.stage_losses[i] += loss_i;
                    ++stage_counts[i];

                    Vec dl_dmean(act_dim);
                    const double lambda_i = cfg.single_head ? 1.0 : weight;
                    for (int d = 0; d < act_dim; ++d) {
                        const double sd = std::exp(policy.log_std()[d]);
                        const double diff = action[d] - mean[d];
                        dl_dmean[d] = g_logp * (diff / (sd * sd)) / mb;
                        dl_dlog_std[d] +=
                            lambda_i * g_logp * (diff * diff / (sd * sd) - 1.0) / mb;
                        if (final_head)
                            dl_dlog_std[d] += lambda_i * (-cfg.entropy_coef) / mb;
                    }
                    dl_dmeans[cfg.single_head ? 0 : i] = std::move(dl_dmean);
                }
                if (!finite) break;
                policy.backward_traced(dl_dmeans, dl_dlog_std, !cfg.single_head);

                DenseTrace ctrace;
                const double v = critic.net.forward(ob, &ctrace)[0];
                const double verr = v - batch.returns[idx];
                critic_loss_sum += verr * verr;
                critic.net.backward(ctrace, {2.0 * verr / mb}, critic.grads);
                entropy_sum += entropy;
            }

            if (!finite) {
                stats.aborted = true;
                stats.samples = static_cast<int>(final_count);
                return stats;
            }
            policy.optimizer_step();
            policy.post_update();
            critic.adam.step(critic.net.param_refs("critic"),
                             DenseNet::grad_refs(critic.grads, "critic"));
        }
    }

    for (int i = 0; i < num_heads; ++i)
        if (stage_counts[i] > 0) stats.stage_losses[i] /= stage_counts[i];
    if (cfg.single_head)
        for (int i = 0; i + 1 < num_heads; ++i) stats.stage_losses[i] = 0.0;
    stats.kl = final_count ? kl_sum / final_count : 0.0;
    stats.clip_frac = final_count ? clip_sum / final_count : 0.0;
    stats.entropy = final_count ? entropy_sum / final_count : 0.0;
    stats.critic_loss = final_count ? critic_loss_sum / final_count : 0.0;
    stats.samples = static_cast<int>(final_count);
    return stats;
}

TrainResult train(PolicyModel& policy, const TrainOptions& opt) {
    opt.ppo.validate();
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    CriticLearner critic(policy.obs_dim(), opt.critic_hidden, opt.seed, opt.ppo.lr_critic);
    EnvSet envs(opt.env, opt.ppo.num_envs, opt.seed, opt.train_noise_sigma);

    const std::vector<std::string> spike_names = policy.spike_layer_names();
    std::vector<std::string> header{"iteration", "reward_mean", "ep_len_mean"};
    for (int i = 1; i <= policy.num_heads(); ++i)
        header.push_back("loss_stage_" + std::to_string(i));
    header.push_back("kl");
    header.push_back("clip_frac");
    for (size_t k = 1; k <= spike_names.size(); ++k)
        header.push_back("spike_rate_layer_" + std::to_string(k));
    header.push_back("wall_ms");

    TrainResult result;
    result.metrics_path = opt.out_dir + "/metrics.csv";
    CsvWriter metrics(result.metrics_path, header);

    if (opt.ppo.iterations == 0) {
        result.final_checkpoint = opt.out_dir + "/ckpt_0.bin";
        policy.save(result.final_checkpoint);
        metrics.flush();
        return result;
    }

    // Episode-length bookkeeping across rollout boundaries.
    std::vector<int> ep_steps(opt.ppo.num_envs, 0);

    for (int iter = 1; iter <= opt.ppo.iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<double> spike_rates;
        TrajectoryBatch batch = collect_rollout(envs, policy, critic, opt.ppo,
                                                spike_names.empty() ? nullptr : &spike_rates);
        compute_gae(batch, opt.ppo.gamma, opt.ppo.gae_lambda);
        normalize_advantages(batch);

        double reward_sum = 0.0;
        double ep_len_sum = 0.0;
        int ep_count = 0;
        for (int e = 0; e < batch.num_envs; ++e)
            for (int t = 0; t < batch.steps; ++t) {
                const int idx = e * batch.steps + t;
                reward_sum += batch.rewards[idx];
                ep_steps[e] += 1;
                if (batch.dones[idx] > 0.5) {
                    ep_len_sum += ep_steps[e];
                    ep_steps[e] = 0;
                    ++ep_count;
                }
            }

        RngStream update_rng(opt.seed, stream_id::kUpdateBase + static_cast<uint64_t>(iter));
        UpdateStats stats = ppo_update(policy, critic, batch, opt.ppo, update_rng);

        const auto t1 = std::chrono::steady_clock::now();
        const double wall_ms =
            std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0;

        std::vector<double> row{static_cast<double>(iter), reward_sum / batch.size(),
                                ep_count ? ep_len_sum / ep_count : 0.0};
        for (double l : stats.stage_losses) row.push_back(l);
        row.push_back(stats.kl);
        row.push_back(stats.clip_frac);
        if (spike_rates.size() < spike_names.size())
            spike_rates.resize(spike_names.size(), 0.0);
        for (size_t k = 0; k < spike_names.size(); ++k) row.push_back(spike_rates[k]);
        row.push_back(wall_ms);
        metrics.row(row);
        metrics.flush();

        result.stats.push_back(stats);
        result.iterations_run = iter;
        if (stats.aborted)
            throw std::runtime_error("update aborted by non-finite loss at iteration " +
                                     std::to_string(iter) + "; metrics preserved at " +
                                     result.metrics_path);

        const bool last = (iter == opt.ppo.iterations);
        if (last || (opt.ppo.checkpoint_every > 0 && iter % opt.ppo.checkpoint_every == 0)) {
            std::string path = opt.out_dir + "/ckpt_" + std::to_string(iter) + ".bin";
            policy.save(path);
            if (last) result.final_checkpoint = path;
        }
        if (opt.verbose && (iter % 50 == 0 || iter == 1)) {
            std::fprintf(stderr, "iter %d reward_mean %.4f kl %.5f\n", iter,
                         reward_sum / batch.size(), stats.kl);
        }
    }
    return result;
}

}  // namespace popsan
