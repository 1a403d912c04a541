#pragma once

#include <span>
#include <string>
#include <vector>

#include "beacon/nn/layers.hpp"

namespace beacon::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update at step t >= 1. m and v are updated in place.
template <typename T>
void adam_step(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t t,
               const AdamConfig& cfg);

template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig cfg, bool check_finite = true) : cfg_(cfg), check_finite_(check_finite) {}

    // Fails with Numerical (naming the parameter) before touching anything if a
    // gradient is non-finite.
    void step(std::span<const ParamRef<T>> params);

    std::size_t steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    bool check_finite_;
    std::size_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace beacon::nn
