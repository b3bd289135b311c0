#pragma once

#include <string>
#include <vector>

#include "popsan/mat.hpp"
#include "popsan/network.hpp"

namespace popsan {

// Adaptive-moment gradient step over a fixed list of parameter tensors.
// Tensors whose gradient contains a non-finite value are skipped for that
// step and reported by name; the step count still advances.
class Adam {
public:
    Adam() = default;
    Adam(const std::vector<TensorRef>& params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    std::vector<std::string> step(const std::vector<TensorRef>& params,
                                  const std::vector<TensorRef>& grads);

    double lr = 1e-3;

private:
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    std::vector<Vec> m_;
    std::vector<Vec> v_;
    std::vector<size_t> sizes_;
};

}  // namespace popsan
