#pragma once

#include "popsan/encoder.hpp"
#include "popsan/mat.hpp"

namespace popsan {

// Current-based LIF layer parameters. Inputs may be binary spikes or real
// currents (stages after a temporal shrink receive real values).
struct LIFParams {
    Mat w;   // synaptic weights [n_out x n_in]
    Vec b;   // bias current [n_out]
    double d_c = 0.5;              // current decay, in [0, 1)
    double d_v = 0.75;             // voltage decay, in [0, 1)
    double v_th = 0.5;             // firing threshold, > v_rest
    double v_rest = 0.0;           // resting potential
    double surrogate_width = 1.0;  // rectangular window width a

    int n_in() const { return w.cols; }
    int n_out() const { return w.rows; }
    void validate() const;
};

struct LIFState {
    Vec c;       // synaptic current
    Vec v;       // membrane voltage (post-reset value is stored)
    Vec o_prev;  // spikes emitted at the previous timestep

    explicit LIFState(int n_out = 0)
        : c(static_cast<size_t>(n_out), 0.0),
          v(static_cast<size_t>(n_out), 0.0),
          o_prev(static_cast<size_t>(n_out), 0.0) {}
};

// Per-timestep cache for the backward pass. `voltages` holds the pre-reset
// membrane voltage (the value compared against the threshold); `spikes`
// holds the binary spike pattern, which the backward pass also uses as the
// frozen reset gate.
struct LIFTrace {
    Mat inputs;    // [T x n_in]
    Mat currents;  // [T x n_out]
    Mat voltages;  // [T x n_out] pre-reset
    Mat spikes;    // [T x n_out] binary

    int timesteps() const { return inputs.rows; }
};

struct LIFGrads {
    Mat d_w;
    Vec d_b;
    Mat d_x;  // gradient w.r.t. the layer input, [T x n_in]
};

// One timestep:
//   c <- d_c*c + W*x + b
//   v <- d_v*v*(1 - o_prev) + c
//   o = 1 where v > v_th, then v is reset to v_rest where o = 1.
// Spikes propagate to the next layer within the same timestep.
void lif_step(const double* x_t, LIFState& state, const LIFParams& p, double* o_out);

// Simulates T timesteps from a zero state (c = 0, v = v_rest, o_prev = 0).
// Returns the binary output train and the cache for lif_backward.
std::pair<SpikeTrain, LIFTrace> lif_forward(const Mat& x, const LIFParams& p);

// Rectangular surrogate: 1/a when |v - v_th| < a/2, else 0.
inline double surrogate_grad(double v, double v_th, double a) {
    return std::fabs(v - v_th) < 0.5 * a ? 1.0 / a : 0.0;
}

// Reverse-time recursion through the current/voltage recurrences, gating the
// spike nonlinearity with the rectangular surrogate at the recorded pre-reset
// voltages. The reset gate (1 - o_prev) is treated as a constant.
//   d_w = sum_t dL_dc(t) (outer) x(t),  d_b = sum_t dL_dc(t)
LIFGrads lif_backward(const Mat& dl_dout, const LIFTrace& trace, const LIFParams& p);

// Surrogate-smoothed forward model used for gradient verification: the spike
// output is replaced by the ramp clamp((v - v_th)/a + 1/2, 0, 1), whose
// derivative equals the rectangular surrogate, while the reset gates stay
// frozen to a reference binary spike pattern. The returned trace stores the
// frozen gates in `spikes`, so lif_backward on it differentiates exactly this
// smooth model.
std::pair<Mat, LIFTrace> lif_forward_surrogate(const Mat& x, const LIFParams& p,
                                               const Mat& frozen_gates);

}  // namespace popsan
