#pragma once

#include "popsan/mat.hpp"

namespace popsan {

struct ShrinkCache {
    Mat input;       // O_prev, [T_prev x n]
    Vec pop_means;   // per-source-step population mean, [T_prev]
    Mat allocation;  // softmax allocation S, [T_next x T_prev]
};

struct ShrinkGrads {
    Mat d_w;
    Mat d_input;  // [T_prev x n]
};

// Learnable compression of a stage output over T_prev timesteps into an
// input-current sequence over T_next < T_prev timesteps. Each source step's
// mass is distributed over the target steps by a softmax allocation whose
// logits are the learnable weights scaled by the source step's population
// mean:
//   m = pop_mean(O_prev);  G[t2][t1] = W[t2][t1] * m[t1]
//   S = softmax over the target axis (columns of S sum to 1)
//   I_next = S * O_prev
// Column-stochastic S conserves per-neuron mass across the conversion.
class ShrinkLayer {
public:
    ShrinkLayer() = default;
    ShrinkLayer(int t_prev, int t_next);

    std::pair<Mat, ShrinkCache> forward(const Mat& o_prev) const;

    // Exact gradients of the forward map. By default gradient also flows
    // through the population-mean guidance; grad_through_mean=false stops it.
    ShrinkGrads backward(const Mat& dl_dout, const ShrinkCache& cache,
                         bool grad_through_mean = true) const;

    int t_prev() const { return t_prev_; }
    int t_next() const { return t_next_; }

    Mat w;  // allocation logits, [T_next x T_prev], zero-initialized

private:
    int t_prev_ = 0;
    int t_next_ = 0;
};

// Per-timestep mean over the population axis; values in [0, 1] for binary
// input.
Vec pop_mean(const Mat& o);

}  // namespace popsan
