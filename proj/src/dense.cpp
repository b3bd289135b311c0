#include "popsan/dense.hpp"

#include <cmath>

namespace popsan {

DenseNet::DenseNet(int in_dim, const std::vector<int>& hidden, int out_dim, RngStream& rng) {
    require(in_dim >= 1 && out_dim >= 1, "dense net needs positive dimensions");
    std::vector<int> widths;
    widths.push_back(in_dim);
    for (int h : hidden) {
        require(h >= 1, "hidden width must be >= 1");
        widths.push_back(h);
    }
    widths.push_back(out_dim);
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        layer.w = Mat(widths[l + 1], widths[l]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        for (double& v : layer.w.a) v = rng.uniform(-bound, bound);
        layer.b.assign(static_cast<size_t>(widths[l + 1]), 0.0);
        layers.push_back(std::move(layer));
    }
}

Vec DenseNet::forward(const Vec& x, DenseTrace* trace) const {
    require(static_cast<int>(x.size()) == in_dim(), "input length mismatch");
    if (trace) {
        trace->input = x;
        trace->pre.clear();
        trace->post.clear();
    }
    Vec cur = x;
    for (size_t l = 0; l < layers.size(); ++l) {
        Vec next(layers[l].w.rows);
        matvec(layers[l].w, cur.data(), next.data());
        for (size_t j = 0; j < next.size(); ++j) next[j] += layers[l].b[j];
        if (trace) trace->pre.push_back(next);
        if (l + 1 < layers.size())
            for (double& v : next) v = std::tanh(v);
        if (trace) trace->post.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

Vec DenseNet::backward(const DenseTrace& trace, const Vec& dl_dout, DenseGrads& accum) const {
    require(trace.post.size() == layers.size(), "trace does not match this net");
    require(static_cast<int>(dl_dout.size()) == out_dim(), "output-gradient length mismatch");
    Vec g = dl_dout;
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        if (l + 1 < static_cast<int>(layers.size())) {
            // g currently holds dL/d(post[l]); fold in tanh'.
            const Vec& post = trace.post[l];
            for (size_t j = 0; j < g.size(); ++j) g[j] *= 1.0 - post[j] * post[j];
        }
        const Vec& in = l > 0 ? trace.post[l - 1] : trace.input;
        outer_acc(accum.d_w[l], g.data(), in.data());
        for (size_t j = 0; j < g.size(); ++j) accum.d_b[l][j] += g[j];
        Vec g_in(in.size(), 0.0);
        matvec_t_acc(layers[l].w, g.data(), g_in.data());
        g = std::move(g_in);
    }
    return g;
}

DenseGrads DenseNet::zero_grads() const {
    DenseGrads g;
    for (const Layer& layer : layers) {
        g.d_w.emplace_back(layer.w.rows, layer.w.cols);
        g.d_b.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

std::vector<TensorRef> DenseNet::param_refs(const std::string& prefix) {
    std::vector<TensorRef> refs;
    for (size_t l = 0; l < layers.size(); ++l) {
        std::string base = prefix + ".layer" + std::to_string(l + 1);
        refs.push_back({base + ".w", layers[l].w.a.data(), layers[l].w.a.size()});
        refs.push_back({base + ".b", layers[l].b.data(), layers[l].b.size()});
    }
    return refs;
}

std::vector<TensorRef> DenseNet::grad_refs(DenseGrads& g, const std::string& prefix) {
    std::vector<TensorRef> refs;
    for (size_t l = 0; l < g.d_w.size(); ++l) {
        std::string base = prefix + ".layer" + std::to_string(l + 1);
        refs.push_back({base + ".w", g.d_w[l].a.data(), g.d_w[l].a.size()});
        refs.push_back({base + ".b", g.d_b[l].data(), g.d_b[l].size()});
    }
    return refs;
}

size_t DenseNet::num_params() const {
    size_t n = 0;
    for (const Layer& layer : layers) n += layer.w.a.size() + layer.b.size();
    return n;
}

std::vector<int> DenseNet::hidden_sizes() const {
    std::vector<int> h;
    for (size_t l = 0; l + 1 < layers.size(); ++l) h.push_back(layers[l].w.rows);
    return h;
}

}  // namespace popsan
