#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace popsan {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Spike trains reuse this type with
// entries restricted to {0, 1}; rows index timesteps, columns neurons.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, double fill)
        : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// y = W * x, with W [n_out x n_in], x [n_in].
inline void matvec(const Mat& w, const double* x, double* y) {
    for (int i = 0; i < w.rows; ++i) {
        const double* wr = w.row(i);
        double acc = 0.0;
        for (int j = 0; j < w.cols; ++j) acc += wr[j] * x[j];
        y[i] = acc;
    }
}

// out += W^T * g, with g [n_out], out [n_in].
inline void matvec_t_acc(const Mat& w, const double* g, double* out) {
    for (int i = 0; i < w.rows; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* wr = w.row(i);
        for (int j = 0; j < w.cols; ++j) out[j] += gi * wr[j];
    }
}

// dw += g (outer) x, with g [n_out], x [n_in].
inline void outer_acc(Mat& dw, const double* g, const double* x) {
    for (int i = 0; i < dw.rows; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* dr = dw.row(i);
        for (int j = 0; j < dw.cols; ++j) dr[j] += gi * x[j];
    }
}

inline bool all_finite(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

inline bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }
inline bool all_finite(const Mat& m) { return all_finite(m.a.data(), m.a.size()); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace popsan
