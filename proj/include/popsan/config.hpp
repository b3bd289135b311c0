#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "popsan/env.hpp"
#include "popsan/network.hpp"
#include "popsan/policy.hpp"
#include "popsan/ppo.hpp"

namespace popsan {

struct EvalOptionsConfig {
    int episodes = 20;
    int settle_steps = 50;
    std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3};
};

struct GradcheckConfig {
    double tolerance = 1e-3;
    NetworkSpec spec;  // tiny by default; element-wise FD caps it at 500 params
};

// Whole-run configuration. Every field has a default, so an empty config
// file (or none) is runnable; file values override defaults and dotted
// command-line pairs override the file.
struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "out";
    std::string actor_type = "snn";  // "snn" or "mlp"
    NetworkSpec network = NetworkSpec::defaults();
    MlpSpec mlp;
    std::vector<int> critic_hidden{64, 64};
    PPOConfig ppo;
    EnvConfig env;
    double train_noise_sigma = 0.0;
    EvalOptionsConfig eval;
    GradcheckConfig gradcheck;

    // Aggregated field-level problems; empty means valid.
    std::vector<std::string> validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Applies "section.key=value" style overrides onto the JSON tree. Values
// parse as JSON where possible (numbers, booleans, arrays) and fall back to
// strings.
void apply_override(nlohmann::json& tree, const std::string& dotted_key,
                    const std::string& value);

// Loads path (empty -> all defaults), applies overrides, synchronizes the
// run seed into every sub-seed, validates. Throws std::invalid_argument with
// the aggregated report on bad input.
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace popsan
