#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "popsan/encoder.hpp"
#include "popsan/lif.hpp"
#include "popsan/mat.hpp"
#include "popsan/rng.hpp"
#include "popsan/shrink.hpp"

namespace popsan {

enum class Mode { Train, Eval };

// One temporal stage: LIF layer widths and the timestep count the stage runs
// at. Stage loss weights must sum to 1 across the network.
struct StageConfig {
    int timesteps = 1;
    std::vector<int> hidden;
    double loss_weight = 1.0;
};

struct NetworkSpec {
    int obs_dim = 6;
    int act_dim = 2;
    int pop_in = 10;
    int pop_out = 10;
    Vec obs_low;
    Vec obs_high;
    std::vector<StageConfig> stages;
    double d_c = 0.5;
    double d_v = 0.75;
    double v_th = 0.5;
    double surrogate_width = 1.0;
    bool shrink_grad_through_mean = true;
    uint64_t seed = 0;

    static NetworkSpec defaults();
    void validate() const;
    int num_stages() const { return static_cast<int>(stages.size()); }
    // Total learnable scalars of the actor this spec defines.
    size_t param_count() const;
};

// Linear readout from output-population firing rates. Each action dimension
// owns a disjoint block of pop_size neurons: a_i = w.row(i) . fr_block_i + b[i].
struct Decoder {
    Mat w;  // [act_dim x pop_size]
    Vec b;  // [act_dim]
};

struct DecoderGrads {
    Mat d_w;
    Vec d_b;
    Vec d_fr;
};

DecoderGrads decoder_backward(const Decoder& dec, const Vec& dl_daction, const Vec& fr);
Vec decode_rates(const Decoder& dec, const Vec& fr);

// Output head: one LIF layer over the stage's timesteps feeding a decoder.
// The final stage's head produces the action; every earlier stage carries an
// auxiliary head used only in train mode.
struct Head {
    LIFParams lif;
    Decoder decoder;
};

struct HeadTrace {
    LIFTrace lif_trace;
    Vec firing_rates;
    Vec action;
};

struct StageTrace {
    std::vector<LIFTrace> layers;
    ShrinkCache shrink;  // valid for non-final stages
};

struct ActorTrace {
    Mode mode = Mode::Eval;
    Vec observation;
    Mat activation;          // encoder receptive-field values
    Mat input_spikes;        // encoded spike train [T_1 x obs_dim*pop_in]
    std::vector<StageTrace> stages;
    std::vector<HeadTrace> heads;  // train: one per stage; eval: only the final head
};

struct ActorForward {
    Vec action;
    std::vector<Vec> aux_actions;  // empty in eval mode
};

struct HeadGrads {
    Mat d_lif_w;
    Vec d_lif_b;
    Mat d_dec_w;
    Vec d_dec_b;
};

struct ActorGrads {
    Mat d_mu, d_sigma;
    std::vector<std::vector<Mat>> d_stage_w;  // [stage][layer]
    std::vector<std::vector<Vec>> d_stage_b;
    std::vector<Mat> d_shrink_w;
    std::vector<HeadGrads> d_heads;
    Vec d_log_std;
};

// Named view over a flat parameter (or gradient) tensor, used by the
// optimizer and the checkpoint writer.
struct TensorRef {
    std::string name;
    double* data;
    size_t n;
};

// Population-coded spiking actor with multi-stage temporal shrinking.
// Inference zeroes all neuron state, simulates stage 1 over T_1 timesteps,
// compresses the stage output to T_2 steps, and so on; the final stage's
// output-population firing rates decode to the action. The action is the
// mean of a Gaussian policy whose log-std is a learnable parameter.
class PopSanActor {
public:
    PopSanActor() = default;
    explicit PopSanActor(const NetworkSpec& spec);

    // In train mode auxiliary heads produce aux_actions; in eval mode they
    // are skipped entirely (their parameters are never read).
    ActorForward forward(const Vec& obs, Mode mode, RngStream& rng,
                         ActorTrace* trace = nullptr) const;

    // Backpropagates action gradients through decoder, staged LIF layers,
    // shrink layers, and encoder. With apply_stage_weights, head gradients
    // are scaled by their stage loss weights before merging (stages with
    // zero weight are skipped); otherwise only the final head's gradient is
    // used, which is the plain single-head reduction.
    void backward(const ActorTrace& trace, const Vec& dl_daction,
                  const std::vector<Vec>& dl_daux, const Vec& dl_dlog_std,
                  ActorGrads& accum, bool apply_stage_weights = true) const;

    ActorGrads zero_grads() const;
    std::vector<TensorRef> param_refs();
    static std::vector<TensorRef> grad_refs(ActorGrads& g, const PopSanActor& net);
    size_t num_params() const;
    void clamp_sigma() { coder.clamp_sigma(); }

    int num_stages() const { return spec.num_stages(); }
    int num_heads() const { return spec.num_stages(); }
    int output_neurons() const { return spec.act_dim * spec.pop_out; }
    // LIF layers along the eval path plus head layers, for logging/profiling.
    std::vector<std::string> lif_layer_names(Mode mode) const;

    NetworkSpec spec;
    PopulationCoder coder;
    std::vector<std::vector<LIFParams>> stage_layers;  // [stage][layer]
    std::vector<ShrinkLayer> shrinks;                  // between consecutive stages
    std::vector<Head> heads;                           // one per stage, last is main
    Vec log_std;                                       // Gaussian policy log-std

private:
    LIFParams make_layer(int n_in, int n_out, RngStream& rng) const;
};

// Mean spike rate per LIF layer of a recorded forward, ordered as
// lif_layer_names(trace.mode). Used for the per-iteration metrics columns.
std::vector<double> trace_spike_rates(const ActorTrace& trace);

}  // namespace popsan
