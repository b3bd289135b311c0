#pragma once

#include <string>
#include <vector>

#include "popsan/network.hpp"

namespace popsan {

struct GradCheckResult {
    double worst_rel_err = 0;
    std::string worst_name;
    long checks = 0;
    bool pass(double tol) const { return checks > 0 && worst_rel_err <= tol; }
    void absorb(double err, const std::string& name);
};

// Central-difference verification of every analytic backward pass. The spike
// nonlinearity is checked on the surrogate-smoothed model (ramp output,
// frozen binary reset gates); everything else is differentiable as-is.
GradCheckResult gradcheck_encoder(uint64_t seed = 7);
GradCheckResult gradcheck_lif(uint64_t seed = 7);
GradCheckResult gradcheck_shrink(uint64_t seed = 7);
GradCheckResult gradcheck_decoder(uint64_t seed = 7);
GradCheckResult gradcheck_critic(uint64_t seed = 7);
GradCheckResult gradcheck_network(const NetworkSpec& spec, uint64_t seed = 7);

// Two-stage spec small enough for element-wise finite differences.
NetworkSpec tiny_gradcheck_spec();

struct GradCheckSummary {
    std::vector<std::pair<std::string, GradCheckResult>> suites;
    double worst_rel_err = 0;
    std::string worst_name;
    bool pass(double tol) const { return worst_rel_err <= tol; }
};

GradCheckSummary run_all_gradchecks(const NetworkSpec& end_to_end_spec, uint64_t seed = 7);

// Frozen binary spike patterns harvested from a real forward pass; they pin
// the reset gates of the smooth model while parameters are perturbed.
struct FrozenGates {
    std::vector<std::vector<Mat>> stage_gates;
    std::vector<Mat> head_gates;  // final head last; absent aux heads stay empty
};

FrozenGates harvest_gates(const ActorTrace& trace);

struct SurrogateOut {
    Vec action;
    std::vector<Vec> aux_actions;
};

// Smooth twin of the actor forward: the encoder emits its activation values
// every timestep (no sampling) and each LIF layer runs the ramp model
// against the frozen gates. The produced trace is consumed by the regular
// backward, which therefore differentiates exactly this model.
SurrogateOut actor_forward_surrogate(const PopSanActor& net, const Vec& obs,
                                     const FrozenGates& gates, ActorTrace* trace = nullptr);

double relative_error(double analytic, double numeric);

}  // namespace popsan
