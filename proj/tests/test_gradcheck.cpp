#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "popsan/gradcheck.hpp"

using namespace popsan;

TEST_CASE("per-module finite-difference suites pass at 1e-4") {
    GradCheckResult encoder = gradcheck_encoder();
    CAPTURE(encoder.worst_name);
    CHECK(encoder.pass(1e-4));

    GradCheckResult lif = gradcheck_lif();
    CAPTURE(lif.worst_name);
    CAPTURE(lif.worst_rel_err);
    CHECK(lif.pass(1e-4));

    GradCheckResult shrink = gradcheck_shrink();
    CAPTURE(shrink.worst_name);
    CHECK(shrink.pass(1e-4));

    GradCheckResult decoder = gradcheck_decoder();
    CHECK(decoder.pass(1e-6));  // linear map, exact

    GradCheckResult critic = gradcheck_critic();
    CHECK(critic.pass(1e-5));
}

TEST_CASE("end-to-end network gradients pass at 1e-3 on the tiny spec") {
    NetworkSpec spec = tiny_gradcheck_spec();
    CHECK(spec.param_count() <= 500);
    GradCheckResult res = gradcheck_network(spec, 7);
    CAPTURE(res.worst_name);
    CAPTURE(res.worst_rel_err);
    CHECK(res.pass(1e-3));
    CHECK(res.checks >= static_cast<long>(spec.param_count()) - 1);
}

TEST_CASE("summary aggregates the worst offender") {
    GradCheckSummary summary = run_all_gradchecks(tiny_gradcheck_spec(), 7);
    CHECK(summary.suites.size() == 6);
    CHECK(summary.pass(1e-3));
    CHECK_FALSE(summary.worst_name.empty());
    CHECK_FALSE(summary.pass(0.0));  // floating-point exactness is impossible
}

TEST_CASE("surrogate forward agrees with the real forward where spikes saturate") {
    // With a huge bias every neuron fires every step in both models: the
    // ramp clamps at 1 and the binary train is all ones.
    NetworkSpec spec = tiny_gradcheck_spec();
    PopSanActor net(spec);
    for (auto& stage : net.stage_layers)
        for (auto& layer : stage) std::fill(layer.b.begin(), layer.b.end(), 25.0);
    for (Head& h : net.heads) std::fill(h.lif.b.begin(), h.lif.b.end(), 25.0);

    RngStream r1(3, 0);
    ActorTrace trace;
    ActorForward real = net.forward({0.5}, Mode::Train, r1, &trace);
    SurrogateOut smooth = actor_forward_surrogate(net, {0.5}, harvest_gates(trace));
    for (size_t k = 0; k < real.action.size(); ++k)
        CHECK(real.action[k] == doctest::Approx(smooth.action[k]).epsilon(1e-9));
}
