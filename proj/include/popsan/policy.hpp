#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "popsan/adam.hpp"
#include "popsan/checkpoint.hpp"
#include "popsan/dense.hpp"
#include "popsan/network.hpp"

namespace popsan {

// Gaussian policy with one or more action heads. The last head drives the
// environment; earlier heads are the per-stage auxiliary readouts of the
// spiking actor. The dense baseline has a single head.
class PolicyModel {
public:
    virtual ~PolicyModel() = default;

    virtual int obs_dim() const = 0;
    virtual int act_dim() const = 0;
    virtual int num_heads() const = 0;
    virtual double stage_weight(int head) const = 0;
    virtual const Vec& log_std() const = 0;
    virtual Vec& mutable_log_std() = 0;
    virtual size_t num_params() const = 0;

    // Head means for one observation. Train mode returns one mean per head
    // (final last) and, when spike_rates is non-null, appends per-LIF-layer
    // spike rates of this forward. Eval mode returns only the final mean.
    virtual std::vector<Vec> forward_means(const Vec& obs, Mode mode, RngStream& rng,
                                           std::vector<double>* spike_rates = nullptr) = 0;

    // Forward retaining the trace for one following backward_traced call.
    virtual std::vector<Vec> forward_traced(const Vec& obs, RngStream& rng) = 0;

    // Accumulates gradients for the last traced forward. dl_dmeans carries
    // one gradient per head (entries for skipped stages may be empty);
    // dl_dlog_std is added verbatim. With apply_stage_weights the per-stage
    // loss weights scale each head's path; without it only the final head's
    // gradient flows (plain single-head reduction).
    virtual void backward_traced(const std::vector<Vec>& dl_dmeans, const Vec& dl_dlog_std,
                                 bool apply_stage_weights) = 0;

    virtual void zero_grads() = 0;
    virtual std::vector<std::string> optimizer_step() = 0;
    virtual void post_update() {}
    virtual std::vector<std::string> spike_layer_names() const { return {}; }
    virtual void save(const std::string& path) const = 0;
};

class SnnPolicy : public PolicyModel {
public:
    SnnPolicy(const NetworkSpec& spec, double lr);
    explicit SnnPolicy(PopSanActor actor, double lr);

    int obs_dim() const override { return actor.spec.obs_dim; }
    int act_dim() const override { return actor.spec.act_dim; }
    int num_heads() const override { return actor.num_heads(); }
    double stage_weight(int head) const override { return actor.spec.stages[head].loss_weight; }
    const Vec& log_std() const override { return actor.log_std; }
    Vec& mutable_log_std() override { return actor.log_std; }
    size_t num_params() const override { return actor.num_params(); }

    std::vector<Vec> forward_means(const Vec& obs, Mode mode, RngStream& rng,
                                   std::vector<double>* spike_rates = nullptr) override;
    std::vector<Vec> forward_traced(const Vec& obs, RngStream& rng) override;
    void backward_traced(const std::vector<Vec>& dl_dmeans, const Vec& dl_dlog_std,
                         bool apply_stage_weights) override;
    void zero_grads() override;
    std::vector<std::string> optimizer_step() override;
    void post_update() override { actor.clamp_sigma(); }
    std::vector<std::string> spike_layer_names() const override {
        return actor.lif_layer_names(Mode::Train);
    }
    void save(const std::string& path) const override { save_checkpoint(actor, path); }

    PopSanActor actor;

private:
    ActorGrads grads_;
    Adam adam_;
    ActorTrace trace_;
};

struct MlpSpec {
    int obs_dim = 6;
    int act_dim = 2;
    std::vector<int> hidden{64, 64};
    uint64_t seed = 0;
};

class MlpPolicy : public PolicyModel {
public:
    MlpPolicy(const MlpSpec& spec, double lr);

    int obs_dim() const override { return spec_.obs_dim; }
    int act_dim() const override { return spec_.act_dim; }
    int num_heads() const override { return 1; }
    double stage_weight(int) const override { return 1.0; }
    const Vec& log_std() const override { return log_std_; }
    Vec& mutable_log_std() override { return log_std_; }
    size_t num_params() const override { return body_.num_params() + log_std_.size(); }

    std::vector<Vec> forward_means(const Vec& obs, Mode mode, RngStream& rng,
                                   std::vector<double>* spike_rates = nullptr) override;
    std::vector<Vec> forward_traced(const Vec& obs, RngStream& rng) override;
    void backward_traced(const std::vector<Vec>& dl_dmeans, const Vec& dl_dlog_std,
                         bool apply_stage_weights) override;
    void zero_grads() override;
    std::vector<std::string> optimizer_step() override;
    void save(const std::string& path) const override;

    void load_arrays(const std::vector<ckpt::NamedArray>& arrays);

private:
    MlpSpec spec_;
    DenseNet body_;
    Vec log_std_;
    DenseGrads grads_;
    Vec log_std_grad_;
    Adam adam_;
    DenseTrace trace_;
};

// Builds the policy recorded in a checkpoint file ("snn" or "mlp" kind).
std::unique_ptr<PolicyModel> load_policy(const std::string& path, double lr = 3e-4);

// Deterministic mean-action closure over a policy, with its own stream for
// the encoder's spike draws.
std::function<Vec(const Vec&)> make_mean_policy(PolicyModel& policy, uint64_t seed,
                                                uint64_t stream);

}  // namespace popsan
