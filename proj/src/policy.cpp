#include "popsan/policy.hpp"

#include <cmath>
#include <cstring>

namespace popsan {

SnnPolicy::SnnPolicy(const NetworkSpec& spec, double lr) : SnnPolicy(PopSanActor(spec), lr) {}

SnnPolicy::SnnPolicy(PopSanActor a, double lr) : actor(std::move(a)) {
    grads_ = actor.zero_grads();
    adam_ = Adam(actor.param_refs(), lr);
}

std::vector<Vec> SnnPolicy::forward_means(const Vec& obs, Mode mode, RngStream& rng,
                                          std::vector<double>* spike_rates) {
    ActorTrace trace;
    ActorForward out = actor.forward(obs, mode, rng, &trace);
    if (spike_rates) *spike_rates = trace_spike_rates(trace);
    std::vector<Vec> means;
    if (mode == Mode::Train) {
        means = std::move(out.aux_actions);
        means.push_back(std::move(out.action));
    } else {
        means.push_back(std::move(out.action));
    }
    return means;
}

std::vector<Vec> SnnPolicy::forward_traced(const Vec& obs, RngStream& rng) {
    ActorForward out = actor.forward(obs, Mode::Train, rng, &trace_);
    std::vector<Vec> means = std::move(out.aux_actions);
    means.push_back(std::move(out.action));
    return means;
}

void SnnPolicy::backward_traced(const std::vector<Vec>& dl_dmeans, const Vec& dl_dlog_std,
                                bool apply_stage_weights) {
    require(!dl_dmeans.empty(), "need at least the final head gradient");
    const Vec& dl_final = dl_dmeans.back();
    std::vector<Vec> dl_aux;
    if (apply_stage_weights) {
        require(static_cast<int>(dl_dmeans.size()) == num_heads(),
                "need one gradient slot per head");
        dl_aux.assign(dl_dmeans.begin(), dl_dmeans.end() - 1);
        // Empty slots correspond to zero-weight stages the update skipped.
        for (size_t i = 0; i < dl_aux.size(); ++i)
            if (dl_aux[i].empty() && stage_weight(static_cast<int>(i)) != 0.0)
                throw std::invalid_argument("missing gradient for weighted stage");
    }
    actor.backward(trace_, dl_final, dl_aux, dl_dlog_std, grads_, apply_stage_weights);
}

void SnnPolicy::zero_grads() { grads_ = actor.zero_grads(); }

std::vector<std::string> SnnPolicy::optimizer_step() {
    return adam_.step(actor.param_refs(), PopSanActor::grad_refs(grads_, actor));
}

MlpPolicy::MlpPolicy(const MlpSpec& spec, double lr) : spec_(spec) {
    RngStream rng(spec.seed, stream_id::kActorInit);
    body_ = DenseNet(spec.obs_dim, spec.hidden, spec.act_dim, rng);
    log_std_.assign(static_cast<size_t>(spec.act_dim), std::log(0.5));
    grads_ = body_.zero_grads();
    log_std_grad_.assign(log_std_.size(), 0.0);

    std::vector<TensorRef> params = body_.param_refs("body");
    params.push_back({"log_std", log_std_.data(), log_std_.size()});
    adam_ = Adam(params, lr);
}

std::vector<Vec> MlpPolicy::forward_means(const Vec& obs, Mode, RngStream&,
                                          std::vector<double>*) {
    return {body_.forward(obs)};
}

std::vector<Vec> MlpPolicy::forward_traced(const Vec& obs, RngStream&) {
    return {body_.forward(obs, &trace_)};
}

void MlpPolicy::backward_traced(const std::vector<Vec>& dl_dmeans, const Vec& dl_dlog_std,
                                bool) {
    require(!dl_dmeans.empty(), "need the head gradient");
    body_.backward(trace_, dl_dmeans.back(), grads_);
    if (!dl_dlog_std.empty())
        for (size_t k = 0; k < log_std_grad_.size(); ++k) log_std_grad_[k] += dl_dlog_std[k];
}

void MlpPolicy::zero_grads() {
    grads_ = body_.zero_grads();
    log_std_grad_.assign(log_std_.size(), 0.0);
}

std::vector<std::string> MlpPolicy::optimizer_step() {
    std::vector<TensorRef> params = body_.param_refs("body");
    params.push_back({"log_std", log_std_.data(), log_std_.size()});
    std::vector<TensorRef> grads = DenseNet::grad_refs(grads_, "body");
    grads.push_back({"log_std", log_std_grad_.data(), log_std_grad_.size()});
    return adam_.step(params, grads);
}

void MlpPolicy::save(const std::string& path) const {
    nlohmann::json header;
    header["kind"] = "mlp";
    header["spec"] = {{"obs_dim", spec_.obs_dim},
                      {"act_dim", spec_.act_dim},
                      {"hidden", spec_.hidden},
                      {"seed", spec_.seed}};
    std::vector<ckpt::NamedArray> arrays;
    MlpPolicy& mut = const_cast<MlpPolicy&>(*this);
    std::vector<TensorRef> params = mut.body_.param_refs("body");
    params.push_back({"log_std", mut.log_std_.data(), mut.log_std_.size()});
    for (const TensorRef& ref : params) {
        ckpt::NamedArray arr;
        arr.name = ref.name;
        arr.dims = {static_cast<uint32_t>(ref.n)};
        arr.data.assign(ref.data, ref.data + ref.n);
        arrays.push_back(std::move(arr));
    }
    ckpt::write_container(path, header, arrays);
}

void MlpPolicy::load_arrays(const std::vector<ckpt::NamedArray>& arrays) {
    std::vector<TensorRef> params = body_.param_refs("body");
    params.push_back({"log_std", log_std_.data(), log_std_.size()});
    if (params.size() != arrays.size())
        throw std::runtime_error("checkpoint tensor count mismatch for mlp actor");
    for (size_t k = 0; k < params.size(); ++k) {
        if (arrays[k].name != params[k].name)
            throw std::runtime_error("checkpoint tensor name mismatch: expected " +
                                     params[k].name + ", found " + arrays[k].name);
        if (arrays[k].data.size() != params[k].n)
            throw std::runtime_error("checkpoint shape mismatch for tensor " + arrays[k].name);
        std::memcpy(params[k].data, arrays[k].data.data(),
                    arrays[k].data.size() * sizeof(double));
    }
}

std::function<Vec(const Vec&)> make_mean_policy(PolicyModel& policy, uint64_t seed,
                                                uint64_t stream) {
    auto rng = std::make_shared<RngStream>(seed, stream);
    return [&policy, rng](const Vec& obs) {
        return policy.forward_means(obs, Mode::Eval, *rng, nullptr).back();
    };
}

std::unique_ptr<PolicyModel> load_policy(const std::string& path, double lr) {
    auto [header, arrays] = ckpt::read_container(path);
    const std::string kind = header.value("kind", "");
    if (kind == "snn") {
        return std::make_unique<SnnPolicy>(load_checkpoint(path), lr);
    }
    if (kind == "mlp") {
        const nlohmann::json& js = header.at("spec");
        MlpSpec spec;
        spec.obs_dim = js.at("obs_dim").get<int>();
        spec.act_dim = js.at("act_dim").get<int>();
        spec.hidden = js.at("hidden").get<std::vector<int>>();
        spec.seed = js.value("seed", uint64_t{0});
        auto policy = std::make_unique<MlpPolicy>(spec, lr);
        policy->load_arrays(arrays);
        return policy;
    }
    throw std::runtime_error("unknown checkpoint kind '" + kind + "' in " + path);
}

}  // namespace popsan
