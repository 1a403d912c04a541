#include "beacon/nn/lstm.hpp"

#include <cmath>

namespace beacon::nn {

namespace {

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// Rows of an N*T x F matrix belonging to time step t.
template <typename T>
RowMatrix<T> step_rows(const RowMatrix<T>& m, std::size_t n, std::size_t steps, std::size_t t) {
    RowMatrix<T> out(static_cast<Eigen::Index>(n), m.cols());
    for (std::size_t s = 0; s < n; ++s) out.row(static_cast<Eigen::Index>(s)) = m.row(static_cast<Eigen::Index>(s * steps + t));
    return out;
}

}  // namespace

template <typename T>
Lstm<T>::Lstm(std::size_t input_size, std::size_t hidden, std::size_t layers, bool bidirectional)
    : input_size_(input_size), hidden_(hidden), layers_(layers), bidirectional_(bidirectional) {
    if (input_size == 0 || hidden == 0 || layers == 0) fail(ErrorKind::InvalidArgument, "lstm: sizes must be positive");
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? input_size : hidden * directions();
        for (std::size_t d = 0; d < directions(); ++d) {
            Cell c;
            c.w_ih = Tensor<T>({4 * hidden, in});
            c.w_hh = Tensor<T>({4 * hidden, hidden});
            c.b_ih = Tensor<T>({4 * hidden});
            c.b_hh = Tensor<T>({4 * hidden});
            c.gw_ih = Tensor<T>(c.w_ih.shape());
            c.gw_hh = Tensor<T>(c.w_hh.shape());
            c.gb_ih = Tensor<T>(c.b_ih.shape());
            c.gb_hh = Tensor<T>(c.b_hh.shape());
            cells_.push_back(std::move(c));
        }
    }
}

template <typename T>
void Lstm<T>::run_direction(const Cell& cell, const RowMatrix<T>& input, std::size_t n, std::size_t steps, bool reverse,
                            Trace& trace) const {
    const auto h4 = static_cast<Eigen::Index>(4 * hidden_);
    const auto hh = static_cast<Eigen::Index>(hidden_);
    const auto w_ih = as_matrix(cell.w_ih.data(), 4 * hidden_, cell.w_ih.dim(1));
    const auto w_hh = as_matrix(cell.w_hh.data(), 4 * hidden_, hidden_);
    const auto b_ih = as_matrix(cell.b_ih.data(), 1, 4 * hidden_);
    const auto b_hh = as_matrix(cell.b_hh.data(), 1, 4 * hidden_);

    trace.gates.assign(steps, RowMatrix<T>());
    trace.c.assign(steps, RowMatrix<T>());
    trace.h.assign(steps, RowMatrix<T>());
    RowMatrix<T> h = RowMatrix<T>::Zero(static_cast<Eigen::Index>(n), hh);
    RowMatrix<T> c = RowMatrix<T>::Zero(static_cast<Eigen::Index>(n), hh);
    for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = reverse ? steps - 1 - k : k;
        RowMatrix<T> a = step_rows(input, n, steps, t) * w_ih.transpose();
        a.noalias() += h * w_hh.transpose();
        a.rowwise() += b_ih.row(0) + b_hh.row(0);
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index j = 0; j < h4; ++j) {
                a(r, j) = (j >= 2 * hh && j < 3 * hh) ? std::tanh(a(r, j)) : sigmoid(a(r, j));
            }
        }
        const auto i = a.middleCols(0, hh).array();
        const auto f = a.middleCols(hh, hh).array();
        const auto g = a.middleCols(2 * hh, hh).array();
        const auto o = a.middleCols(3 * hh, hh).array();
        c = (f * c.array() + i * g).matrix();
        h = (o * c.array().tanh()).matrix();
        trace.gates[t] = std::move(a);
        trace.c[t] = c;
        trace.h[t] = h;
    }
}

template <typename T>
Tensor<T> Lstm<T>::forward(const Tensor<T>& x, Mode) {
    expect_shape(x.rank() == 3 && x.dim(2) == input_size_,
                 "lstm: expected N x T x " + std::to_string(input_size_) + " input, got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), steps = x.dim(1);
    expect_shape(steps >= 1, "lstm: empty sequence");
    const std::size_t dirs = directions();
    traces_.assign(layers_ * dirs, Trace{});

    RowMatrix<T> layer_in = as_matrix(x.data(), n * steps, input_size_);
    for (std::size_t l = 0; l < layers_; ++l) {
        RowMatrix<T> layer_out(static_cast<Eigen::Index>(n * steps), static_cast<Eigen::Index>(dirs * hidden_));
        for (std::size_t d = 0; d < dirs; ++d) {
            Trace& tr = traces_[l * dirs + d];
            tr.input = layer_in;
            run_direction(cells_[l * dirs + d], tr.input, n, steps, d == 1, tr);
            for (std::size_t t = 0; t < steps; ++t) {
                for (std::size_t s = 0; s < n; ++s) {
                    layer_out.block(static_cast<Eigen::Index>(s * steps + t), static_cast<Eigen::Index>(d * hidden_), 1,
                                    static_cast<Eigen::Index>(hidden_)) = tr.h[t].row(static_cast<Eigen::Index>(s));
                }
            }
        }
        layer_in = std::move(layer_out);
    }
    cached_n_ = n;
    cached_t_ = steps;
    have_cache_ = true;
    Tensor<T> out({n, steps, dirs * hidden_});
    as_matrix(out.data(), n * steps, dirs * hidden_) = layer_in;
    return out;
}

template <typename T>
RowMatrix<T> Lstm<T>::backprop_direction(Cell& cell, const Trace& trace, const RowMatrix<T>& grad_h, std::size_t n,
                                         std::size_t steps, bool reverse) const {
    const auto hh = static_cast<Eigen::Index>(hidden_);
    const auto in = static_cast<Eigen::Index>(cell.w_ih.dim(1));
    const auto w_ih = as_matrix(cell.w_ih.data(), 4 * hidden_, cell.w_ih.dim(1));
    const auto w_hh = as_matrix(cell.w_hh.data(), 4 * hidden_, hidden_);
    auto gw_ih = as_matrix(cell.gw_ih.data(), 4 * hidden_, cell.w_ih.dim(1));
    auto gw_hh = as_matrix(cell.gw_hh.data(), 4 * hidden_, hidden_);
    auto gb_ih = as_matrix(cell.gb_ih.data(), 1, 4 * hidden_);
    auto gb_hh = as_matrix(cell.gb_hh.data(), 1, 4 * hidden_);
    gw_ih.setZero();
    gw_hh.setZero();
    gb_ih.setZero();
    gb_hh.setZero();

    RowMatrix<T> grad_in = RowMatrix<T>::Zero(static_cast<Eigen::Index>(n * steps), in);
    const auto rows = static_cast<Eigen::Index>(n);
    RowMatrix<T> dh_next = RowMatrix<T>::Zero(rows, hh);
    RowMatrix<T> dc_next = RowMatrix<T>::Zero(rows, hh);
    const RowMatrix<T> zero = RowMatrix<T>::Zero(rows, hh);
    RowMatrix<T> da(rows, 4 * hh);

    for (std::size_t k = steps; k-- > 0;) {
        const std::size_t t = reverse ? steps - 1 - k : k;
        const bool first = k == 0;
        const std::size_t prev = reverse ? t + 1 : t - (first ? 0 : 1);
        const RowMatrix<T>& c_prev = first ? zero : trace.c[prev];
        const RowMatrix<T>& h_prev = first ? zero : trace.h[prev];
        const auto& a = trace.gates[t];
        const auto i = a.middleCols(0, hh).array();
        const auto f = a.middleCols(hh, hh).array();
        const auto g = a.middleCols(2 * hh, hh).array();
        const auto o = a.middleCols(3 * hh, hh).array();
        const auto tc = trace.c[t].array().tanh();

        const RowMatrix<T> dh = step_rows(grad_h, n, steps, t) + dh_next;
        const auto dha = dh.array();
        const RowMatrix<T> dc = (dha * o * (T(1) - tc * tc) + dc_next.array()).matrix();
        const auto dca = dc.array();
        da.middleCols(0, hh) = (dca * g * i * (T(1) - i)).matrix();
        da.middleCols(hh, hh) = (dca * c_prev.array() * f * (T(1) - f)).matrix();
        da.middleCols(2 * hh, hh) = (dca * i * (T(1) - g * g)).matrix();
        da.middleCols(3 * hh, hh) = (dha * tc * o * (T(1) - o)).matrix();

        const RowMatrix<T> x_t = step_rows(trace.input, n, steps, t);
        gw_ih.noalias() += da.transpose() * x_t;
        gw_hh.noalias() += da.transpose() * h_prev;
        gb_ih.row(0) += da.colwise().sum();
        const RowMatrix<T> dx = da * w_ih;
        for (std::size_t s = 0; s < n; ++s) {
            grad_in.row(static_cast<Eigen::Index>(s * steps + t)) += dx.row(static_cast<Eigen::Index>(s));
        }
        dh_next = da * w_hh;
        dc_next = (dca * f).matrix();
    }
    gb_hh = gb_ih;
    return grad_in;
}

template <typename T>
Tensor<T> Lstm<T>::backward(const Tensor<T>& grad_out) {
    if (!have_cache_) fail(ErrorKind::State, "lstm: backward called without a forward cache");
    const std::size_t n = cached_n_, steps = cached_t_, dirs = directions();
    expect_shape(grad_out.shape() == Shape{n, steps, dirs * hidden_}, "lstm backward: grad shape mismatch");

    RowMatrix<T> grad_layer = as_matrix(grad_out.data(), n * steps, dirs * hidden_);
    for (std::size_t l = layers_; l-- > 0;) {
        RowMatrix<T> grad_in;
        for (std::size_t d = 0; d < dirs; ++d) {
            const RowMatrix<T> gh = grad_layer.middleCols(static_cast<Eigen::Index>(d * hidden_), static_cast<Eigen::Index>(hidden_));
            RowMatrix<T> g = backprop_direction(cells_[l * dirs + d], traces_[l * dirs + d], gh, n, steps, d == 1);
            if (d == 0) {
                grad_in = std::move(g);
            } else {
                grad_in += g;
            }
        }
        grad_layer = std::move(grad_in);
    }
    Tensor<T> gx({n, steps, input_size_});
    as_matrix(gx.data(), n * steps, input_size_) = grad_layer;
    return gx;
}

template <typename T>
void Lstm<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>&) {
    for (std::size_t l = 0; l < layers_; ++l) {
        for (std::size_t d = 0; d < directions(); ++d) {
            Cell& c = cells_[l * directions() + d];
            const std::string p = prefix + "l" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
            params.push_back({p + "w_ih", &c.w_ih, &c.gw_ih});
            params.push_back({p + "w_hh", &c.w_hh, &c.gw_hh});
            params.push_back({p + "b_ih", &c.b_ih, &c.gb_ih});
            params.push_back({p + "b_hh", &c.b_hh, &c.gb_hh});
        }
    }
}

template <typename T>
void Lstm<T>::init(Rng& rng) {
    for (Cell& c : cells_) {
        for (Tensor<T>* w : {&c.w_ih, &c.w_hh}) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(w->dim(1)));
            for (auto& v : w->values()) v = static_cast<T>(rng.uniform(-bound, bound));
        }
        c.b_ih.fill(T(0));
        c.b_hh.fill(T(0));
    }
}

template class Lstm<float>;
template class Lstm<double>;

}  // namespace beacon::nn
