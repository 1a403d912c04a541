#include "beacon/nn/adam.hpp"

#include <cmath>

namespace beacon::nn {

template <typename T>
void adam_step(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t t,
               const AdamConfig& cfg) {
    if (t == 0) fail(ErrorKind::InvalidArgument, "adam: step counter starts at 1");
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        fail(ErrorKind::Shape, "adam: parameter, gradient and moment sizes differ");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        theta[i] = static_cast<T>(theta[i] - cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
}

template <typename T>
void Adam<T>::step(std::span<const ParamRef<T>> params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value->size(), T(0));
            v_.emplace_back(p.value->size(), T(0));
        }
    }
    if (m_.size() != params.size()) fail(ErrorKind::State, "adam: parameter set changed between steps");
    if (check_finite_) {
        for (const auto& p : params) {
            if (!p.grad->all_finite()) fail(ErrorKind::Numerical, "non-finite gradient in " + p.name + " at step " + std::to_string(t_ + 1));
        }
    }
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step<T>(params[i].value->values(), params[i].grad->values(), m_[i], v_[i], t_, cfg_);
    }
}

template void adam_step<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>, std::size_t,
                               const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>, std::size_t,
                                const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace beacon::nn
