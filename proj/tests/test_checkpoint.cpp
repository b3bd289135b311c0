#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "popsan/checkpoint.hpp"
#include "popsan/policy.hpp"

using namespace popsan;

namespace {

NetworkSpec spec_a() {
    NetworkSpec spec;
    spec.obs_dim = 2;
    spec.act_dim = 1;
    spec.pop_in = 3;
    spec.pop_out = 2;
    spec.obs_low = {-1, -1};
    spec.obs_high = {1, 1};
    spec.stages = {{2, {4}, 0.4}, {1, {4}, 0.6}};
    spec.seed = 5;
    return spec;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("save/load round-trips every parameter bit exactly") {
    PopSanActor net(spec_a());
    const std::string path = temp_path("ckpt_roundtrip.bin");
    save_checkpoint(net, path);
    PopSanActor loaded = load_checkpoint(path);

    std::vector<TensorRef> a = net.param_refs();
    std::vector<TensorRef> b = loaded.param_refs();
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].n == b[k].n);
        for (size_t j = 0; j < a[k].n; ++j) CHECK(a[k].data[j] == b[k].data[j]);
    }

    // Identical inference for the same stream.
    RngStream r1(3, 1), r2(3, 1);
    ActorForward out1 = net.forward({0.3, -0.3}, Mode::Eval, r1);
    ActorForward out2 = loaded.forward({0.3, -0.3}, Mode::Eval, r2);
    CHECK(out1.action == out2.action);
    std::remove(path.c_str());
}

TEST_CASE("truncated file fails with a corruption error") {
    PopSanActor net(spec_a());
    const std::string path = temp_path("ckpt_trunc.bin");
    save_checkpoint(net, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("corrupt checkpoint"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("bad magic fails") {
    const std::string path = temp_path("ckpt_magic.bin");
    std::ofstream(path, std::ios::binary) << "definitely not a checkpoint";
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("arrays from one spec against another spec's header name the offending tensor") {
    PopSanActor net_b = [] {
        NetworkSpec s = spec_a();
        s.stages[0].hidden = {7};  // different layer width
        s.stages[1].hidden = {7};
        return PopSanActor(s);
    }();
    const std::string path = temp_path("ckpt_mismatch.bin");
    // Header claims spec A, arrays come from spec B.
    nlohmann::json header;
    header["kind"] = "snn";
    header["spec"] = spec_a();
    std::vector<ckpt::NamedArray> arrays;
    for (const TensorRef& ref : net_b.param_refs()) {
        ckpt::NamedArray arr;
        arr.name = ref.name;
        arr.dims = {static_cast<uint32_t>(ref.n)};
        arr.data.assign(ref.data, ref.data + ref.n);
        arrays.push_back(std::move(arr));
    }
    ckpt::write_container(path, header, arrays);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("stage1.layer1.w"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("version mismatch is reported") {
    PopSanActor net(spec_a());
    const std::string path = temp_path("ckpt_version.bin");
    save_checkpoint(net, path);
    // The version field sits right after the 8-byte magic.
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    uint32_t bogus = 999;
    f.write(reinterpret_cast<const char*>(&bogus), sizeof(bogus));
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version mismatch"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("mlp checkpoints round-trip through the policy loader") {
    MlpSpec spec;
    spec.obs_dim = 4;
    spec.act_dim = 2;
    spec.hidden = {8};
    spec.seed = 9;
    MlpPolicy policy(spec, 1e-3);
    const std::string path = temp_path("ckpt_mlp.bin");
    policy.save(path);
    CHECK(checkpoint_kind(path) == "mlp");

    auto loaded = load_policy(path);
    RngStream rng(0, 0);
    Vec obs{0.1, 0.2, 0.3, 0.4};
    CHECK(loaded->forward_means(obs, Mode::Eval, rng).back() ==
          policy.forward_means(obs, Mode::Eval, rng, nullptr).back());

    // Loading an mlp checkpoint as an snn network is an artifact mismatch.
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("kind mismatch"),
                         std::runtime_error);
    std::remove(path.c_str());
}
