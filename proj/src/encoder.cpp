#include "popsan/encoder.hpp"

#include <cmath>

namespace popsan {

PopulationCoder::PopulationCoder(int obs_dim, int pop_size, const Vec& lo, const Vec& hi)
    : obs_dim_(obs_dim), pop_size_(pop_size) {
    require(obs_dim >= 1 && pop_size >= 1, "population coder needs obs_dim >= 1 and pop_size >= 1");
    require(static_cast<int>(lo.size()) == obs_dim && static_cast<int>(hi.size()) == obs_dim,
            "obs_low/obs_high must have length obs_dim");
    obs_low = lo;
    obs_high = hi;
    mu = Mat(obs_dim, pop_size);
    sigma = Mat(obs_dim, pop_size);
    for (int i = 0; i < obs_dim; ++i) {
        require(hi[i] > lo[i], "obs_high must exceed obs_low per dimension");
        const double span = hi[i] - lo[i];
        for (int j = 0; j < pop_size; ++j) {
            // Centers tile the encoding range evenly, endpoints included.
            mu(i, j) = (pop_size == 1) ? lo[i] + 0.5 * span
                                       : lo[i] + span * j / (pop_size - 1);
            sigma(i, j) = span / (2.0 * pop_size);
        }
    }
    clamp_sigma();
}

Mat PopulationCoder::compute_receptive_field(const Vec& s) const {
    require(static_cast<int>(s.size()) == obs_dim_, "observation length mismatch");
    require(all_finite(s), "non-finite observation rejected");
    Mat act(obs_dim_, pop_size_);
    for (int i = 0; i < obs_dim_; ++i) {
        for (int j = 0; j < pop_size_; ++j) {
            const double d = s[i] - mu(i, j);
            const double sd = sigma(i, j);
            act(i, j) = std::exp(-d * d / (2.0 * sd * sd));
        }
    }
    return act;
}

SpikeTrain PopulationCoder::encode_spikes(const Mat& activation, int timesteps,
                                          RngStream& rng) const {
    require(timesteps >= 1, "spike train needs at least one timestep");
    require(activation.rows == obs_dim_ && activation.cols == pop_size_,
            "activation shape mismatch");
    SpikeTrain train;
    train.data = Mat(timesteps, obs_dim_ * pop_size_);
    for (int t = 0; t < timesteps; ++t) {
        double* row = train.data.row(t);
        for (int i = 0; i < obs_dim_; ++i)
            for (int j = 0; j < pop_size_; ++j)
                row[i * pop_size_ + j] = rng.bernoulli(activation(i, j)) ? 1.0 : 0.0;
    }
    return train;
}

EncoderGrads PopulationCoder::backward(const Mat& dl_dspikes, const Mat& activation,
                                       const Vec& s) const {
    require(dl_dspikes.cols == num_neurons(), "spike-gradient width mismatch");
    require(activation.rows == obs_dim_ && activation.cols == pop_size_,
            "activation shape mismatch");
    require(static_cast<int>(s.size()) == obs_dim_, "observation length mismatch");

    // Collapse the time sum first; the per-parameter factors do not depend on t.
    Vec g_sum(static_cast<size_t>(num_neurons()), 0.0);
    for (int t = 0; t < dl_dspikes.rows; ++t) {
        const double* row = dl_dspikes.row(t);
        for (int k = 0; k < dl_dspikes.cols; ++k) g_sum[k] += row[k];
    }

    EncoderGrads g;
    g.d_mu = Mat(obs_dim_, pop_size_);
    g.d_sigma = Mat(obs_dim_, pop_size_);
    for (int i = 0; i < obs_dim_; ++i) {
        for (int j = 0; j < pop_size_; ++j) {
            const double d = s[i] - mu(i, j);
            const double sd = sigma(i, j);
            const double common = g_sum[i * pop_size_ + j] * activation(i, j);
            g.d_mu(i, j) = common * d / (sd * sd);
            g.d_sigma(i, j) = common * d * d / (sd * sd * sd);
        }
    }
    return g;
}

void PopulationCoder::clamp_sigma() {
    for (double& v : sigma.a)
        if (v < kSigmaMin) v = kSigmaMin;
}

}  // namespace popsan
