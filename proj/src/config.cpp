#include "popsan/config.hpp"

#include <fstream>
#include <sstream>

#include "popsan/gradcheck.hpp"

namespace popsan {

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems.push_back(std::string(field) + ": " + e.what());
        }
    };
    if (actor_type != "snn" && actor_type != "mlp")
        problems.push_back("actor_type: must be \"snn\" or \"mlp\"");
    if (out_dir.empty()) problems.push_back("out_dir: must not be empty");
    check("network", [&] { network.validate(); });
    check("ppo", [&] { ppo.validate(); });
    check("env", [&] {
        require(env.dt > 0.0, "dt must be positive");
        require(env.episode_len >= 1, "episode_len must be >= 1");
        require(env.v_max > 0.0, "v_max must be positive");
    });
    if (train_noise_sigma < 0.0) problems.push_back("train_noise_sigma: must be >= 0");
    check("eval", [&] {
        require(eval.episodes >= 1, "episodes must be >= 1");
        require(eval.settle_steps >= 0, "settle_steps must be >= 0");
        require(!eval.sigmas.empty(), "sigma list must not be empty");
        for (double s : eval.sigmas) require(s >= 0.0, "sigmas must be >= 0");
    });
    check("gradcheck", [&] {
        require(gradcheck.tolerance >= 0.0, "tolerance must be >= 0");
        gradcheck.spec.validate();
    });
    if (actor_type == "mlp") {
        if (mlp.obs_dim != network.obs_dim || mlp.act_dim != network.act_dim)
            problems.push_back("mlp: obs/act dims must match the network section");
    }
    return problems;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["actor_type"] = cfg.actor_type;
    j["network"] = cfg.network;
    j["mlp"] = {{"hidden", cfg.mlp.hidden}};
    j["critic"] = {{"hidden", cfg.critic_hidden}};
    j["ppo"] = {{"gamma", cfg.ppo.gamma},
                {"gae_lambda", cfg.ppo.gae_lambda},
                {"clip_eps", cfg.ppo.clip_eps},
                {"epochs", cfg.ppo.epochs},
                {"minibatch_size", cfg.ppo.minibatch_size},
                {"lr_actor", cfg.ppo.lr_actor},
                {"lr_critic", cfg.ppo.lr_critic},
                {"entropy_coef", cfg.ppo.entropy_coef},
                {"num_envs", cfg.ppo.num_envs},
                {"rollout_steps", cfg.ppo.rollout_steps},
                {"iterations", cfg.ppo.iterations},
                {"checkpoint_every", cfg.ppo.checkpoint_every},
                {"single_head", cfg.ppo.single_head}};
    j["env"] = {{"dt", cfg.env.dt},
                {"k_action", cfg.env.k_action},
                {"v_max", cfg.env.v_max},
                {"episode_len", cfg.env.episode_len},
                {"train_noise_sigma", cfg.train_noise_sigma}};
    j["eval"] = {{"episodes", cfg.eval.episodes},
                 {"settle_steps", cfg.eval.settle_steps},
                 {"sigmas", cfg.eval.sigmas}};
    j["gradcheck"] = {{"tolerance", cfg.gradcheck.tolerance}, {"spec", cfg.gradcheck.spec}};
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.gradcheck.spec = tiny_gradcheck_spec();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.actor_type = j.value("actor_type", cfg.actor_type);
    if (j.contains("network")) cfg.network = j.at("network").get<NetworkSpec>();
    if (j.contains("mlp")) cfg.mlp.hidden = j.at("mlp").value("hidden", cfg.mlp.hidden);
    if (j.contains("critic"))
        cfg.critic_hidden = j.at("critic").value("hidden", cfg.critic_hidden);
    if (j.contains("ppo")) {
        const nlohmann::json& p = j.at("ppo");
        cfg.ppo.gamma = p.value("gamma", cfg.ppo.gamma);
        cfg.ppo.gae_lambda = p.value("gae_lambda", cfg.ppo.gae_lambda);
        cfg.ppo.clip_eps = p.value("clip_eps", cfg.ppo.clip_eps);
        cfg.ppo.epochs = p.value("epochs", cfg.ppo.epochs);
        cfg.ppo.minibatch_size = p.value("minibatch_size", cfg.ppo.minibatch_size);
        cfg.ppo.lr_actor = p.value("lr_actor", cfg.ppo.lr_actor);
        cfg.ppo.lr_critic = p.value("lr_critic", cfg.ppo.lr_critic);
        cfg.ppo.entropy_coef = p.value("entropy_coef", cfg.ppo.entropy_coef);
        cfg.ppo.num_envs = p.value("num_envs", cfg.ppo.num_envs);
        cfg.ppo.rollout_steps = p.value("rollout_steps", cfg.ppo.rollout_steps);
        cfg.ppo.iterations = p.value("iterations", cfg.ppo.iterations);
        cfg.ppo.checkpoint_every = p.value("checkpoint_every", cfg.ppo.checkpoint_every);
        cfg.ppo.single_head = p.value("single_head", cfg.ppo.single_head);
    }
    if (j.contains("env")) {
        const nlohmann::json& e = j.at("env");
        cfg.env.dt = e.value("dt", cfg.env.dt);
        cfg.env.k_action = e.value("k_action", cfg.env.k_action);
        cfg.env.v_max = e.value("v_max", cfg.env.v_max);
        cfg.env.episode_len = e.value("episode_len", cfg.env.episode_len);
        cfg.train_noise_sigma = e.value("train_noise_sigma", cfg.train_noise_sigma);
    }
    if (j.contains("eval")) {
        const nlohmann::json& e = j.at("eval");
        cfg.eval.episodes = e.value("episodes", cfg.eval.episodes);
        cfg.eval.settle_steps = e.value("settle_steps", cfg.eval.settle_steps);
        cfg.eval.sigmas = e.value("sigmas", cfg.eval.sigmas);
    }
    if (j.contains("gradcheck")) {
        const nlohmann::json& g = j.at("gradcheck");
        cfg.gradcheck.tolerance = g.value("tolerance", cfg.gradcheck.tolerance);
        if (g.contains("spec")) cfg.gradcheck.spec = g.at("spec").get<NetworkSpec>();
    }
    return cfg;
}

void apply_override(nlohmann::json& tree, const std::string& dotted_key,
                    const std::string& value) {
    require(!dotted_key.empty(), "empty override key");
    nlohmann::json* node = &tree;
    std::stringstream ss(dotted_key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (size_t k = 0; k + 1 < parts.size(); ++k) node = &((*node)[parts[k]]);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded())
        (*node)[parts.back()] = value;
    else
        (*node)[parts.back()] = parsed;
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    nlohmann::json tree = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("config file not found: " + path);
        try {
            in >> tree;
        } catch (const std::exception& e) {
            throw std::invalid_argument("config parse error in " + path + ": " + e.what());
        }
    }
    for (const auto& [key, value] : overrides) apply_override(tree, key, value);

    RunConfig cfg;
    try {
        cfg = config_from_json(tree);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config field error: ") + e.what());
    }

    // One seed keys every stream.
    cfg.network.seed = cfg.seed;
    cfg.mlp.seed = cfg.seed;
    cfg.gradcheck.spec.seed = cfg.seed;
    cfg.mlp.obs_dim = cfg.network.obs_dim;
    cfg.mlp.act_dim = cfg.network.act_dim;

    std::vector<std::string> problems = cfg.validate();
    if (!problems.empty()) {
        std::string report = "invalid configuration:";
        for (const std::string& p : problems) report += "\n  - " + p;
        throw std::invalid_argument(report);
    }
    return cfg;
}

}  // namespace popsan
