#pragma once

#include <string>
#include <vector>

#include "popsan/network.hpp"

namespace popsan {

struct LayerOps {
    std::string name;
    double mac = 0;
    double ac = 0;
};

// Mean activity measured from recorded inference traces: for every LIF layer
// on the eval path, the fraction of nonzero entries in its input per
// timestep; shrink layers record the same for the stage output they consume.
struct MeasuredRates {
    std::vector<double> layer_input_rates;
    std::vector<double> shrink_input_rates;
    double mean() const;
};

struct OpCount {
    double mac_ops = 0;
    double ac_ops = 0;    // includes shrink_ac
    double shrink_ac = 0; // reported separately: shrink work vs. classifier work
    std::vector<LayerOps> layers;
    long timesteps = 0;
    int inferences = 0;
    std::vector<double> per_inference_ops;  // mac+ac per inference, for mean/std
    MeasuredRates rates;
};

// 45 nm, 32-bit float per-operation energies.
struct EnergyModel {
    double e_mac = 4.6;  // pJ per multiply-accumulate
    double e_ac = 0.9;   // pJ per accumulate
};

// energy in pJ = e_mac * mac_ops + e_ac * ac_ops
double estimate_energy(const OpCount& counts, const EnergyModel& model);

// Runs eval-mode inference on each observation, counting operations from the
// actual recorded spikes. Counting model:
//   MAC: one per receptive-field evaluation, the first LIF layer's dense
//        cost per stage-1 timestep (its inputs are treated as real-valued),
//        and the decoder readout.
//   AC:  for every later LIF layer, incoming nonzero entries x fanout per
//        timestep; shrink layers add their softmax table plus the allocation
//        of each nonzero source entry over the target steps.
// A train-mode request is rejected: auxiliary heads are excluded from the
// energy account because they do not run at inference time.
OpCount count_ops(const PopSanActor& net, const std::vector<Vec>& observations,
                  RngStream& rng, Mode mode = Mode::Eval);

struct SavingsRow {
    int t_final = 1;
    double ann_pj = 0;
    double snn_pj = 0;
    double savings_pct = 0;
    double mac_ops = 0;
    double ac_ops = 0;
    double spike_rate_mean = 0;
};

struct SavingsReport {
    std::vector<SavingsRow> rows;
    void write_csv(const std::string& path) const;
};

// Evaluates the energy model for variants of the architecture whose final
// stage runs at each requested timestep count (earlier stages one step
// longer each), using measured spike rates to extrapolate the AC work. The
// dense baseline is the same layer shapes with every FC op a MAC, one pass.
SavingsReport compare_with_ann(const NetworkSpec& base_spec, const MeasuredRates& rates,
                               const std::vector<int>& t_finals,
                               const EnergyModel& model = EnergyModel{});

}  // namespace popsan
