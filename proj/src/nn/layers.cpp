#include "beacon/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace beacon::nn {

namespace {

struct Ncl {
    std::size_t n, c, l;
};

// Accepts N x C x L, or N x C as L = 1.
Ncl ncl_of(const Shape& s, const char* who) {
    if (s.size() == 3) return {s[0], s[1], s[2]};
    if (s.size() == 2) return {s[0], s[1], 1};
    fail(ErrorKind::Shape, std::string(who) + ": expected N x C x L input, got " + shape_string(s));
}

std::size_t conv_out_len(std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (len + 2 * padding < kernel) fail(ErrorKind::Shape, "conv1d: input shorter than kernel");
    return (len + 2 * padding - kernel) / stride + 1;
}

// cols[(c*K + k), i] = x_pad[c][i*stride + k]
template <typename T>
void im2col(const T* x, std::size_t c_in, std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding,
            std::size_t out_len, T* cols) {
    for (std::size_t c = 0; c < c_in; ++c) {
        const T* xc = x + c * len;
        for (std::size_t k = 0; k < kernel; ++k) {
            T* row = cols + (c * kernel + k) * out_len;
            for (std::size_t i = 0; i < out_len; ++i) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(padding);
                row[i] = (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) ? xc[src] : T(0);
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, std::size_t c_in, std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding,
            std::size_t out_len, T* x) {
    std::fill(x, x + c_in * len, T(0));
    for (std::size_t c = 0; c < c_in; ++c) {
        T* xc = x + c * len;
        for (std::size_t k = 0; k < kernel; ++k) {
            const T* row = cols + (c * kernel + k) * out_len;
            for (std::size_t i = 0; i < out_len; ++i) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(padding);
                if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) xc[src] += row[i];
            }
        }
    }
}

template <typename T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
const Tensor<T>& require_cache(const std::optional<Tensor<T>>& cache, const char* who) {
    if (!cache) fail(ErrorKind::State, std::string(who) + ": backward called without a forward cache");
    return *cache;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t padding) {
    expect_shape(x.rank() == 3, "conv1d: expected N x C x L input, got " + shape_string(x.shape()));
    expect_shape(w.rank() == 3 && w.dim(1) == x.dim(1),
                 "conv1d: weight " + shape_string(w.shape()) + " does not match input " + shape_string(x.shape()));
    expect_shape(b.rank() == 1 && b.dim(0) == w.dim(0), "conv1d: bias does not match weight");
    if (stride == 0) fail(ErrorKind::InvalidArgument, "conv1d: stride must be positive");
    const std::size_t n = x.dim(0), c_in = x.dim(1), len = x.dim(2), c_out = w.dim(0), kernel = w.dim(2);
    const std::size_t out_len = conv_out_len(len, kernel, stride, padding);

    Tensor<T> out({n, c_out, out_len});
    typename Tensor<T>::Storage cols(c_in * kernel * out_len);
    const auto wm = as_matrix(w.data(), c_out, c_in * kernel);
    const auto cm = as_matrix(static_cast<const T*>(cols.data()), c_in * kernel, out_len);
    for (std::size_t s = 0; s < n; ++s) {
        im2col(x.data() + s * c_in * len, c_in, len, kernel, stride, padding, out_len, cols.data());
        auto om = as_matrix(out.data() + s * c_out * out_len, c_out, out_len);
        om.noalias() = wm * cm;
        for (std::size_t o = 0; o < c_out; ++o) om.row(static_cast<Eigen::Index>(o)).array() += b[o];
    }
    return out;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                               std::size_t padding) {
    expect_shape(x.rank() == 3 && w.rank() == 3 && w.dim(1) == x.dim(1), "conv1d backward: inconsistent shapes");
    const std::size_t n = x.dim(0), c_in = x.dim(1), len = x.dim(2), c_out = w.dim(0), kernel = w.dim(2);
    const std::size_t out_len = conv_out_len(len, kernel, stride, padding);
    expect_shape(grad_out.shape() == Shape{n, c_out, out_len},
                 "conv1d backward: grad " + shape_string(grad_out.shape()) + " does not match output");

    Conv1dGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({c_out})};
    typename Tensor<T>::Storage cols(c_in * kernel * out_len);
    typename Tensor<T>::Storage gcols(cols.size());
    const auto wm = as_matrix(w.data(), c_out, c_in * kernel);
    auto gwm = as_matrix(g.w.data(), c_out, c_in * kernel);
    for (std::size_t s = 0; s < n; ++s) {
        const auto gom = as_matrix(grad_out.data() + s * c_out * out_len, c_out, out_len);
        im2col(x.data() + s * c_in * len, c_in, len, kernel, stride, padding, out_len, cols.data());
        const auto cm = as_matrix(static_cast<const T*>(cols.data()), c_in * kernel, out_len);
        gwm.noalias() += gom * cm.transpose();
        auto gcm = as_matrix(gcols.data(), c_in * kernel, out_len);
        gcm.noalias() = wm.transpose() * gom;
        col2im(gcols.data(), c_in, len, kernel, stride, padding, out_len, g.x.data() + s * c_in * len);
        for (std::size_t o = 0; o < c_out; ++o) g.b[o] += gom.row(static_cast<Eigen::Index>(o)).sum();
    }
    return g;
}

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding)
    : stride_(stride),
      padding_(padding),
      w_({out_channels, in_channels, kernel}),
      b_({out_channels}),
      gw_(w_.shape()),
      gb_(b_.shape()) {
    if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
        fail(ErrorKind::InvalidArgument, "conv1d: channels, kernel and stride must be positive");
    }
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x, Mode) {
    auto out = conv1d_forward(x, w_, b_, stride_, padding_);
    cached_x_ = x;
    return out;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& grad_out) {
    auto g = conv1d_backward(grad_out, require_cache(cached_x_, "conv1d"), w_, stride_, padding_);
    gw_ = std::move(g.w);
    gb_ = std::move(g.b);
    return std::move(g.x);
}

template <typename T>
void Conv1d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>&) {
    params.push_back({prefix + "weight", &w_, &gw_});
    params.push_back({prefix + "bias", &b_, &gb_});
}

template <typename T>
void Conv1d<T>::init(Rng& rng) {
    he_uniform(w_, w_.dim(1) * w_.dim(2), rng);
    b_.fill(T(0));
}

// ---------------------------------------------------------------------------
// batchnorm

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}, T(1)),
      beta_({channels}),
      ggamma_({channels}),
      gbeta_({channels}),
      running_mean_({channels}),
      running_var_({channels}, T(1)) {
    if (channels == 0) fail(ErrorKind::InvalidArgument, "batchnorm: channel count must be positive");
}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& x, Mode mode) {
    const auto [n, c, l] = ncl_of(x.shape(), "batchnorm");
    expect_shape(c == channels_, "batchnorm: expected " + std::to_string(channels_) + " channels, got " + shape_string(x.shape()));
    const std::size_t m = n * l;
    Tensor<T> out(x.shape());
    xhat_ = Tensor<T>(x.shape());
    inv_std_.assign(c, 0.0);

    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean, var;
        if (mode == Mode::Train) {
            if (m <= 1) fail(ErrorKind::DegenerateBatch, "batchnorm: train mode needs more than one value per channel");
            double sum = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* p = x.data() + (s * c + ch) * l;
                for (std::size_t i = 0; i < l; ++i) sum += p[i];
            }
            mean = sum / static_cast<double>(m);
            double sq = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* p = x.data() + (s * c + ch) * l;
                for (std::size_t i = 0; i < l; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(m);
            const double unbiased = sq / static_cast<double>(m - 1);
            running_mean_[ch] = static_cast<T>((1.0 - momentum_) * running_mean_[ch] + momentum_ * mean);
            running_var_[ch] = static_cast<T>((1.0 - momentum_) * running_var_[ch] + momentum_ * unbiased);
        } else {
            mean = running_mean_[ch];
            var = running_var_[ch];
        }
        const double inv_std = 1.0 / std::sqrt(var + eps_);
        inv_std_[ch] = inv_std;
        const double g = gamma_[ch], bt = beta_[ch];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t off = (s * c + ch) * l;
            for (std::size_t i = 0; i < l; ++i) {
                const double xh = (x[off + i] - mean) * inv_std;
                xhat_[off + i] = static_cast<T>(xh);
                out[off + i] = static_cast<T>(g * xh + bt);
            }
        }
    }
    cached_mode_ = mode;
    have_cache_ = true;
    return out;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& grad_out) {
    if (!have_cache_) fail(ErrorKind::State, "batchnorm: backward called without a forward cache");
    expect_shape(grad_out.shape() == xhat_.shape(), "batchnorm backward: grad shape mismatch");
    const auto [n, c, l] = ncl_of(grad_out.shape(), "batchnorm");
    const double m = static_cast<double>(n * l);
    Tensor<T> gx(grad_out.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t off = (s * c + ch) * l;
            for (std::size_t i = 0; i < l; ++i) {
                sum_g += grad_out[off + i];
                sum_gx += static_cast<double>(grad_out[off + i]) * xhat_[off + i];
            }
        }
        ggamma_[ch] = static_cast<T>(sum_gx);
        gbeta_[ch] = static_cast<T>(sum_g);
        const double scale = static_cast<double>(gamma_[ch]) * inv_std_[ch];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t off = (s * c + ch) * l;
            for (std::size_t i = 0; i < l; ++i) {
                if (cached_mode_ == Mode::Train) {
                    gx[off + i] = static_cast<T>(scale * (grad_out[off + i] - sum_g / m - xhat_[off + i] * sum_gx / m));
                } else {
                    gx[off + i] = static_cast<T>(scale * grad_out[off + i]);
                }
            }
        }
    }
    return gx;
}

template <typename T>
void BatchNorm1d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) {
    params.push_back({prefix + "gamma", &gamma_, &ggamma_});
    params.push_back({prefix + "beta", &beta_, &gbeta_});
    buffers.push_back({prefix + "running_mean", &running_mean_});
    buffers.push_back({prefix + "running_var", &running_var_});
}

template <typename T>
void BatchNorm1d<T>::init(Rng&) {
    gamma_.fill(T(1));
    beta_.fill(T(0));
    running_mean_.fill(T(0));
    running_var_.fill(T(1));
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    cached_out_ = out;
    return out;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
    const auto& y = require_cache(cached_out_, "relu");
    expect_shape(grad_out.shape() == y.shape(), "relu backward: grad shape mismatch");
    Tensor<T> gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] > T(0) ? grad_out[i] : T(0);
    return gx;
}

// ---------------------------------------------------------------------------
// maxpool

template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& x, std::size_t kernel, std::size_t stride) {
    expect_shape(x.rank() == 3, "maxpool1d: expected N x C x L input, got " + shape_string(x.shape()));
    if (kernel == 0 || stride == 0) fail(ErrorKind::InvalidArgument, "maxpool1d: kernel and stride must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), len = x.dim(2);
    expect_shape(len >= kernel, "maxpool1d: input length " + std::to_string(len) + " shorter than kernel");
    const std::size_t out_len = (len - kernel) / stride + 1;
    MaxPoolResult<T> r{Tensor<T>({n, c, out_len}), std::vector<std::size_t>(n * c * out_len)};
    for (std::size_t row = 0; row < n * c; ++row) {
        const std::size_t base = row * len;
        for (std::size_t i = 0; i < out_len; ++i) {
            std::size_t best = base + i * stride;
            for (std::size_t k = 1; k < kernel; ++k) {
                const std::size_t idx = base + i * stride + k;
                if (x[idx] > x[best]) best = idx;
            }
            r.out[row * out_len + i] = x[best];
            r.argmax[row * out_len + i] = best;
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& grad_out, const Shape& input_shape, std::span<const std::size_t> argmax) {
    expect_shape(grad_out.size() == argmax.size(), "maxpool1d backward: grad does not match stored argmax");
    Tensor<T> gx(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
    return gx;
}

template <typename T>
Tensor<T> MaxPool1d<T>::forward(const Tensor<T>& x, Mode) {
    auto r = maxpool1d_forward(x, kernel_, stride_);
    input_shape_ = x.shape();
    argmax_ = std::move(r.argmax);
    have_cache_ = true;
    return std::move(r.out);
}

template <typename T>
Tensor<T> MaxPool1d<T>::backward(const Tensor<T>& grad_out) {
    if (!have_cache_) fail(ErrorKind::State, "maxpool1d: backward called without a forward cache");
    return maxpool1d_backward(grad_out, input_shape_, argmax_);
}

// ---------------------------------------------------------------------------
// flatten / reshape / last step

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode) {
    expect_shape(x.rank() >= 1, "flatten: scalar input");
    input_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / std::max<std::size_t>(x.dim(0), 1)});
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_out) {
    if (input_shape_.empty()) fail(ErrorKind::State, "flatten: backward called without a forward cache");
    return grad_out.reshaped(input_shape_);
}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Mode) {
    expect_shape(x.rank() >= 1, "reshape: scalar input");
    input_shape_ = x.shape();
    Shape s{x.dim(0)};
    s.insert(s.end(), per_sample_.begin(), per_sample_.end());
    return x.reshaped(std::move(s));
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& grad_out) {
    if (input_shape_.empty()) fail(ErrorKind::State, "reshape: backward called without a forward cache");
    return grad_out.reshaped(input_shape_);
}

template <typename T>
Tensor<T> LastStep<T>::forward(const Tensor<T>& x, Mode) {
    expect_shape(x.rank() == 3, "last_step: expected N x T x F input, got " + shape_string(x.shape()));
    input_shape_ = x.shape();
    const std::size_t n = x.dim(0), t = x.dim(1), f = x.dim(2);
    Tensor<T> out({n, f});
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(x.data() + (s * t + t - 1) * f, f, out.data() + s * f);
    }
    return out;
}

template <typename T>
Tensor<T> LastStep<T>::backward(const Tensor<T>& grad_out) {
    if (input_shape_.empty()) fail(ErrorKind::State, "last_step: backward called without a forward cache");
    const std::size_t n = input_shape_[0], t = input_shape_[1], f = input_shape_[2];
    expect_shape(grad_out.shape() == Shape{n, f}, "last_step backward: grad shape mismatch");
    Tensor<T> gx(input_shape_);
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(grad_out.data() + s * f, f, gx.data() + (s * t + t - 1) * f);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    expect_shape(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1),
                 "dense: input " + shape_string(x.shape()) + " does not match weight " + shape_string(w.shape()));
    expect_shape(b.rank() == 1 && b.dim(0) == w.dim(0), "dense: bias does not match weight");
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    Tensor<T> y({n, out});
    auto ym = as_matrix(y.data(), n, out);
    ym.noalias() = as_matrix(x.data(), n, in) * as_matrix(w.data(), out, in).transpose();
    ym.rowwise() += as_matrix(b.data(), 1, out).row(0);
    return y;
}

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : w_({out_features, in_features}), b_({out_features}), gw_(w_.shape()), gb_(b_.shape()) {
    if (in_features == 0 || out_features == 0) fail(ErrorKind::InvalidArgument, "dense: feature counts must be positive");
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
    auto y = dense_forward(x, w_, b_);
    cached_x_ = x;
    return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
    const auto& x = require_cache(cached_x_, "dense");
    const std::size_t n = x.dim(0), in = w_.dim(1), out = w_.dim(0);
    expect_shape(grad_out.shape() == Shape{n, out}, "dense backward: grad shape mismatch");
    const auto gm = as_matrix(grad_out.data(), n, out);
    as_matrix(gw_.data(), out, in).noalias() = gm.transpose() * as_matrix(x.data(), n, in);
    as_matrix(gb_.data(), 1, out).noalias() = gm.colwise().sum();
    Tensor<T> gx({n, in});
    as_matrix(gx.data(), n, in).noalias() = gm * as_matrix(w_.data(), out, in);
    return gx;
}

template <typename T>
void Dense<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>&) {
    params.push_back({prefix + "weight", &w_, &gw_});
    params.push_back({prefix + "bias", &b_, &gb_});
}

template <typename T>
void Dense<T>::init(Rng& rng) {
    he_uniform(w_, w_.dim(1), rng);
    b_.fill(T(0));
}

// ---------------------------------------------------------------------------
// dropout

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
    cached_mode_ = mode;
    if (mode == Mode::Eval || p_ <= 0.0) return x;
    if (p_ >= 1.0) {
        mask_.assign(x.size(), T(0));
        return Tensor<T>(x.shape());
    }
    if (!frozen_ || mask_.size() != x.size()) {
        mask_.resize(x.size());
        const T keep_scale = static_cast<T>(1.0 / (1.0 - p_));
        for (auto& m : mask_) m = rng_.uniform() < p_ ? T(0) : keep_scale;
    }
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask_[i];
    return out;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
    if (cached_mode_ == Mode::Eval || p_ <= 0.0) return grad_out;
    expect_shape(grad_out.size() == mask_.size(), "dropout backward: grad does not match mask");
    Tensor<T> gx(grad_out.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * mask_[i];
    return gx;
}

// ---------------------------------------------------------------------------
// softmax / cross-entropy

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    expect_shape(logits.rank() == 2, "softmax: expected N x K logits, got " + shape_string(logits.shape()));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor<T> p(logits.shape());
    for (std::size_t s = 0; s < n; ++s) {
        const T* row = logits.data() + s * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        for (std::size_t j = 0; j < k; ++j) p[s * k + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - mx) / z);
    }
    return p;
}

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, std::span<const std::size_t> labels) {
    expect_shape(logits.rank() == 2, "softmax_xent: expected N x K logits, got " + shape_string(logits.shape()));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (k < 2) fail(ErrorKind::InvalidArgument, "softmax_xent: need at least two classes");
    if (labels.size() != n) fail(ErrorKind::Shape, "softmax_xent: label count does not match batch");
    SoftmaxXent<T> r;
    r.grad = Tensor<T>(logits.shape());
    r.probabilities = Tensor<T>(logits.shape());
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        if (labels[s] >= k) fail(ErrorKind::Label, "softmax_xent: label " + std::to_string(labels[s]) + " out of range");
        const T* row = logits.data() + s * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        const double log_z = std::log(z);
        total += -(static_cast<double>(row[labels[s]]) - mx - log_z);
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(row[j]) - mx - log_z);
            r.probabilities[s * k + j] = static_cast<T>(p);
            r.grad[s * k + j] = static_cast<T>((p - (j == labels[s] ? 1.0 : 0.0)) / static_cast<double>(n));
        }
    }
    r.loss = total / static_cast<double>(n);
    return r;
}

#define BEACON_INSTANTIATE_LAYERS(T)                                                                                  \
    template Tensor<T> conv1d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
    template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,        \
                                            std::size_t);                                                             \
    template MaxPoolResult<T> maxpool1d_forward(const Tensor<T>&, std::size_t, std::size_t);                          \
    template Tensor<T> maxpool1d_backward(const Tensor<T>&, const Shape&, std::span<const std::size_t>);              \
    template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                           \
    template SoftmaxXent<T> softmax_xent(const Tensor<T>&, std::span<const std::size_t>);                             \
    template Tensor<T> softmax(const Tensor<T>&);                                                                     \
    template class Conv1d<T>;                                                                                         \
    template class BatchNorm1d<T>;                                                                                    \
    template class ReLU<T>;                                                                                           \
    template class MaxPool1d<T>;                                                                                      \
    template class Flatten<T>;                                                                                        \
    template class Reshape<T>;                                                                                        \
    template class LastStep<T>;                                                                                       \
    template class Dense<T>;                                                                                          \
    template class Dropout<T>;

BEACON_INSTANTIATE_LAYERS(float)
BEACON_INSTANTIATE_LAYERS(double)

#undef BEACON_INSTANTIATE_LAYERS

}  // namespace beacon::nn
