#include "popsan/shrink.hpp"

#include <cmath>

namespace popsan {

Vec pop_mean(const Mat& o) {
    require(o.rows >= 1 && o.cols >= 1, "pop_mean of an empty tensor rejected");
    Vec m(static_cast<size_t>(o.rows));
    for (int t = 0; t < o.rows; ++t) {
        const double* row = o.row(t);
        double acc = 0.0;
        for (int p = 0; p < o.cols; ++p) acc += row[p];
        m[t] = acc / o.cols;
    }
    return m;
}

ShrinkLayer::ShrinkLayer(int t_prev, int t_next) : t_prev_(t_prev), t_next_(t_next) {
    require(t_next >= 1, "shrink target needs at least one timestep");
    require(t_prev > t_next, "shrink must reduce the timestep count");
    w = Mat(t_next, t_prev);
}

std::pair<Mat, ShrinkCache> ShrinkLayer::forward(const Mat& o_prev) const {
    require(o_prev.rows == t_prev_, "input timestep count mismatch");

    ShrinkCache cache;
    cache.input = o_prev;
    cache.pop_means = pop_mean(o_prev);
    cache.allocation = Mat(t_next_, t_prev_);

    // Column-wise softmax of W[t2][t1] * m[t1] over the target axis.
    for (int t1 = 0; t1 < t_prev_; ++t1) {
        double max_logit = -1e300;
        for (int t2 = 0; t2 < t_next_; ++t2)
            max_logit = std::max(max_logit, w(t2, t1) * cache.pop_means[t1]);
        double denom = 0.0;
        for (int t2 = 0; t2 < t_next_; ++t2) {
            double e = std::exp(w(t2, t1) * cache.pop_means[t1] - max_logit);
            cache.allocation(t2, t1) = e;
            denom += e;
        }
        for (int t2 = 0; t2 < t_next_; ++t2) cache.allocation(t2, t1) /= denom;
    }

    Mat out(t_next_, o_prev.cols);
    for (int t2 = 0; t2 < t_next_; ++t2) {
        double* out_row = out.row(t2);
        for (int t1 = 0; t1 < t_prev_; ++t1) {
            const double s = cache.allocation(t2, t1);
            if (s == 0.0) continue;
            const double* in_row = o_prev.row(t1);
            for (int p = 0; p < o_prev.cols; ++p) out_row[p] += s * in_row[p];
        }
    }
    return {std::move(out), std::move(cache)};
}

ShrinkGrads ShrinkLayer::backward(const Mat& dl_dout, const ShrinkCache& cache,
                                  bool grad_through_mean) const {
    require(dl_dout.rows == t_next_ && dl_dout.cols == cache.input.cols,
            "output-gradient shape mismatch");
    require(cache.allocation.rows == t_next_ && cache.allocation.cols == t_prev_,
            "cache does not belong to this layer");

    const int n = cache.input.cols;

    // dL/dS = dl_dout * O_prev^T
    Mat dl_ds(t_next_, t_prev_);
    for (int t2 = 0; t2 < t_next_; ++t2)
        for (int t1 = 0; t1 < t_prev_; ++t1) {
            const double* g_row = dl_dout.row(t2);
            const double* in_row = cache.input.row(t1);
            double acc = 0.0;
            for (int p = 0; p < n; ++p) acc += g_row[p] * in_row[p];
            dl_ds(t2, t1) = acc;
        }

    // Softmax Jacobian per source column, then split into the W and m paths.
    ShrinkGrads g;
    g.d_w = Mat(t_next_, t_prev_);
    g.d_input = Mat(t_prev_, n);
    Vec dl_dm(static_cast<size_t>(t_prev_), 0.0);
    for (int t1 = 0; t1 < t_prev_; ++t1) {
        double dot = 0.0;
        for (int t2 = 0; t2 < t_next_; ++t2)
            dot += dl_ds(t2, t1) * cache.allocation(t2, t1);
        for (int t2 = 0; t2 < t_next_; ++t2) {
            const double dg = cache.allocation(t2, t1) * (dl_ds(t2, t1) - dot);
            g.d_w(t2, t1) = dg * cache.pop_means[t1];
            dl_dm[t1] += dg * w(t2, t1);
        }
    }

    // Matmul path: dL/dO_prev += S^T * dl_dout.
    for (int t2 = 0; t2 < t_next_; ++t2) {
        const double* g_row = dl_dout.row(t2);
        for (int t1 = 0; t1 < t_prev_; ++t1) {
            const double s = cache.allocation(t2, t1);
            if (s == 0.0) continue;
            double* d_row = g.d_input.row(t1);
            for (int p = 0; p < n; ++p) d_row[p] += s * g_row[p];
        }
    }

    // Guidance path: m[t1] = (1/n) sum_p O_prev[t1][p].
    if (grad_through_mean) {
        for (int t1 = 0; t1 < t_prev_; ++t1) {
            const double per_entry = dl_dm[t1] / n;
            double* d_row = g.d_input.row(t1);
            for (int p = 0; p < n; ++p) d_row[p] += per_entry;
        }
    }
    return g;
}

}  // namespace popsan
