#pragma once

#include "popsan/mat.hpp"
#include "popsan/rng.hpp"

namespace popsan {

// Spike activity of one layer over the timesteps of a stage:
// data[t][j] in {0, 1}, shape [T x n_neurons].
struct SpikeTrain {
    Mat data;
    int timesteps() const { return data.rows; }
    int neurons() const { return data.cols; }
};

struct EncoderGrads {
    Mat d_mu;     // [obs_dim x pop_size]
    Mat d_sigma;  // [obs_dim x pop_size]
};

// Maps each observation dimension onto a population of neurons with
// learnable Gaussian receptive fields. Spike generation is Bernoulli per
// neuron per timestep with probability equal to the field activation;
// the backward pass treats sampling as straight-through (do/dA = 1).
//
// Spike draw order is pinned so an independent simulation can reproduce it:
// for t in 0..T-1: for dim i: for neuron j: one uniform draw.
class PopulationCoder {
public:
    static constexpr double kSigmaMin = 1e-3;

    PopulationCoder() = default;
    PopulationCoder(int obs_dim, int pop_size, const Vec& obs_low, const Vec& obs_high);

    // A_E[i][j] = exp(-(s_i - mu_ij)^2 / (2 sigma_ij^2)), values in (0, 1].
    Mat compute_receptive_field(const Vec& s) const;

    // [T x obs_dim*pop_size] Bernoulli spikes; flattening is dimension-major.
    SpikeTrain encode_spikes(const Mat& activation, int timesteps, RngStream& rng) const;

    // Exact gradient of the straight-through model o_t = A_E(s):
    //   d_mu    = sum_t dL_do(t) * A_E * (s - mu) / sigma^2
    //   d_sigma = sum_t dL_do(t) * A_E * (s - mu)^2 / sigma^3
    EncoderGrads backward(const Mat& dl_dspikes, const Mat& activation, const Vec& s) const;

    void clamp_sigma();

    int obs_dim() const { return obs_dim_; }
    int pop_size() const { return pop_size_; }
    int num_neurons() const { return obs_dim_ * pop_size_; }

    Mat mu;     // receptive-field centers, [obs_dim x pop_size]
    Mat sigma;  // receptive-field widths, strictly positive
    Vec obs_low;
    Vec obs_high;

private:
    int obs_dim_ = 0;
    int pop_size_ = 0;
};

}  // namespace popsan
