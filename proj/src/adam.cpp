#include "popsan/adam.hpp"

#include <cmath>

namespace popsan {

Adam::Adam(const std::vector<TensorRef>& params, double lr_in, double beta1, double beta2,
           double eps)
    : lr(lr_in), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const TensorRef& p : params) {
        m_.emplace_back(p.n, 0.0);
        v_.emplace_back(p.n, 0.0);
        sizes_.push_back(p.n);
    }
}

std::vector<std::string> Adam::step(const std::vector<TensorRef>& params,
                                    const std::vector<TensorRef>& grads) {
    require(params.size() == sizes_.size() && grads.size() == sizes_.size(),
            "optimizer was built for a different parameter set");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

    std::vector<std::string> skipped;
    for (size_t k = 0; k < params.size(); ++k) {
        require(params[k].n == sizes_[k] && grads[k].n == sizes_[k],
                "parameter/gradient shape mismatch: " + params[k].name);
        if (!all_finite(grads[k].data, grads[k].n)) {
            skipped.push_back(params[k].name);
            continue;
        }
        double* p = params[k].data;
        const double* g = grads[k].data;
        Vec& m = m_[k];
        Vec& v = v_[k];
        for (size_t j = 0; j < sizes_[k]; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
    return skipped;
}

}  // namespace popsan
