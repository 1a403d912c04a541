#pragma once

// Central finite-difference checks for double-precision layers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "beacon/nn/layers.hpp"
#include "beacon/nn/model.hpp"
#include "beacon/rng.hpp"

namespace beacon::testing {

using nn::Tensor;

inline Tensor<double> random_tensor(const nn::Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(shape);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

// ||a - b|| / (||a|| + ||b||), or 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nb);
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

// Numerical gradient of the scalar f with respect to every entry of x.
inline std::vector<double> numerical_gradient(const std::function<double()>& f, std::span<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

struct GradReport {
    double input = 0.0;
    std::vector<std::pair<std::string, double>> params;

    double worst() const {
        double w = input;
        for (const auto& [name, e] : params) w = std::max(w, e);
        return w;
    }
};

// Uses loss = sum(layer(x) * r) for a fixed random r, so dloss/dout = r.
inline GradReport check_layer(nn::Layer<double>& layer, Tensor<double> x, nn::Mode mode, Rng& rng, double h = 1e-6) {
    const Tensor<double> probe_out = layer.forward(x, mode);
    const Tensor<double> r = random_tensor(probe_out.shape(), rng);
    auto loss = [&] {
        const auto y = layer.forward(x, mode);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };

    layer.forward(x, mode);
    const Tensor<double> gx = layer.backward(r);
    std::vector<nn::ParamRef<double>> params;
    std::vector<nn::BufferRef<double>> buffers;
    layer.collect("", params, buffers);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad->values().begin(), p.grad->values().end());

    GradReport rep;
    rep.input = relative_error(gx.values(), numerical_gradient(loss, x.values(), h));
    for (std::size_t i = 0; i < params.size(); ++i) {
        rep.params.emplace_back(params[i].name, relative_error(analytic[i], numerical_gradient(loss, params[i].value->values(), h)));
    }
    return rep;
}

// Whole-network check against the softmax cross-entropy loss.
inline GradReport check_network(nn::Sequential<double>& net, Tensor<double> x, std::span<const std::size_t> labels,
                                nn::Mode mode, double h = 1e-6) {
    auto loss = [&] { return nn::softmax_xent(net.forward(x, mode), labels).loss; };
    const auto xent = nn::softmax_xent(net.forward(x, mode), labels);
    const Tensor<double> gx = net.backward(xent.grad);
    auto params = net.params();
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad->values().begin(), p.grad->values().end());

    GradReport rep;
    rep.input = relative_error(gx.values(), numerical_gradient(loss, x.values(), h));
    for (std::size_t i = 0; i < params.size(); ++i) {
        rep.params.emplace_back(params[i].name, relative_error(analytic[i], numerical_gradient(loss, params[i].value->values(), h)));
    }
    return rep;
}

}  // namespace beacon::testing
