#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "popsan/config.hpp"
#include "popsan/gradcheck.hpp"

using namespace popsan;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream(path) << content;
    return path;
}

}  // namespace

TEST_CASE("empty config runs on defaults") {
    RunConfig cfg = load_config("");
    CHECK(cfg.seed == 0);
    CHECK(cfg.actor_type == "snn");
    CHECK(cfg.ppo.gamma == 0.99);
    CHECK(cfg.ppo.num_envs == 16);
    CHECK(cfg.ppo.rollout_steps == 64);
    CHECK(cfg.network.stages.size() == 3);
    CHECK(cfg.network.stages[0].timesteps == 3);
    CHECK(cfg.network.stages[2].loss_weight == 0.6);
    CHECK(cfg.eval.sigmas == std::vector<double>{0.0, 0.1, 0.2, 0.3});
    CHECK(cfg.gradcheck.spec.param_count() <= 500);
    CHECK(cfg.validate().empty());
}

TEST_CASE("missing file is a config error naming the path") {
    CHECK_THROWS_WITH_AS(load_config("/nonexistent/config.json"),
                         doctest::Contains("/nonexistent/config.json"), std::invalid_argument);
}

TEST_CASE("file values and dotted overrides layer correctly") {
    const std::string path = write_temp(
        "popsan_cfg.json", R"({"seed": 5, "ppo": {"iterations": 42, "gamma": 0.95}})");
    RunConfig cfg = load_config(path, {{"ppo.iterations", "7"}, {"env.dt", "0.05"}});
    CHECK(cfg.seed == 5);
    CHECK(cfg.ppo.gamma == 0.95);
    CHECK(cfg.ppo.iterations == 7);  // override beats the file
    CHECK(cfg.env.dt == 0.05);
    std::remove(path.c_str());
}

TEST_CASE("seed override rekeys the network and mlp seeds") {
    RunConfig cfg = load_config("", {{"seed", "99"}});
    CHECK(cfg.seed == 99);
    CHECK(cfg.network.seed == 99);
    CHECK(cfg.mlp.seed == 99);
}

TEST_CASE("array and string overrides parse") {
    RunConfig cfg = load_config("", {{"eval.sigmas", "[0,0.5]"}, {"actor_type", "mlp"}});
    CHECK(cfg.eval.sigmas == std::vector<double>{0.0, 0.5});
    CHECK(cfg.actor_type == "mlp");
}

TEST_CASE("invalid configuration aggregates every field problem") {
    try {
        load_config("", {{"ppo.gamma", "2.0"},
                         {"eval.sigmas", "[]"},
                         {"actor_type", "\"rnn\""}});
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("ppo") != std::string::npos);
        CHECK(msg.find("eval") != std::string::npos);
        CHECK(msg.find("actor_type") != std::string::npos);
    }
}

TEST_CASE("malformed json reports a parse error") {
    const std::string path = write_temp("popsan_bad.json", "{nope");
    CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("parse error"),
                         std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("network spec round-trips through json") {
    NetworkSpec spec = NetworkSpec::defaults();
    spec.seed = 17;
    spec.stages[1].hidden = {48, 24};
    nlohmann::json j = spec;
    NetworkSpec back = j.get<NetworkSpec>();
    CHECK(back.obs_dim == spec.obs_dim);
    CHECK(back.stages.size() == spec.stages.size());
    CHECK(back.stages[1].hidden == spec.stages[1].hidden);
    CHECK(back.seed == 17);
    CHECK(back.obs_low == spec.obs_low);
}

TEST_CASE("gradcheck spec in config can be resized and guards apply downstream") {
    RunConfig cfg = load_config(
        "", {{"gradcheck.spec.stages", R"([{"T":2,"hidden":[500],"lambda":0.5},
                                           {"T":1,"hidden":[500],"lambda":0.5}])"}});
    CHECK(cfg.gradcheck.spec.param_count() > 500);
}
