#pragma once

#include <string>
#include <vector>

#include "popsan/mat.hpp"
#include "popsan/network.hpp"
#include "popsan/rng.hpp"

namespace popsan {

struct DenseTrace {
    Vec input;
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post-activation per layer (last layer is linear)
};

struct DenseGrads {
    std::vector<Mat> d_w;
    std::vector<Vec> d_b;
};

// Plain feedforward net with tanh hidden activations and a linear output.
// Used for the value (critic) network and the dense baseline actor.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(int in_dim, const std::vector<int>& hidden, int out_dim, RngStream& rng);

    Vec forward(const Vec& x, DenseTrace* trace = nullptr) const;
    // Accumulates parameter gradients; returns gradient w.r.t. the input.
    Vec backward(const DenseTrace& trace, const Vec& dl_dout, DenseGrads& accum) const;

    DenseGrads zero_grads() const;
    std::vector<TensorRef> param_refs(const std::string& prefix);
    static std::vector<TensorRef> grad_refs(DenseGrads& g, const std::string& prefix);
    size_t num_params() const;

    int in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    int out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
    std::vector<int> hidden_sizes() const;

    struct Layer {
        Mat w;
        Vec b;
    };
    std::vector<Layer> layers;
};

}  // namespace popsan
