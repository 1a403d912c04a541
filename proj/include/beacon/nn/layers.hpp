#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beacon/nn/tensor.hpp"
#include "beacon/rng.hpp"

namespace beacon::nn {

enum class Mode { Train, Eval };

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
    std::string name;
    Tensor<T>* value;
};

// ---------------------------------------------------------------------------
// Functional kernels. Batched layouts: conv / pool / batchnorm take N x C x L,
// dense takes N x F.

template <typename T>
struct Conv1dGrads {
    Tensor<T> x, w, b;
};

// out[n][o][i] = b[o] + sum_c sum_k w[o][c][k] * x_pad[n][c][i*stride + k]
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride, std::size_t padding);
template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                               std::size_t padding);

template <typename T>
struct MaxPoolResult {
    Tensor<T> out;
    std::vector<std::size_t> argmax;  // flat index into the input, per output element
};

// Windows that would run past the end are dropped. Ties go to the lower index.
template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& x, std::size_t kernel, std::size_t stride);
template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& grad_out, const Shape& input_shape, std::span<const std::size_t> argmax);

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
struct SoftmaxXent {
    double loss = 0.0;       // mean over the batch of -log p[label]
    Tensor<T> grad;          // (p - onehot) / N
    Tensor<T> probabilities;
};

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, std::span<const std::size_t> labels);

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// ---------------------------------------------------------------------------

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    // Gradients of parameters are overwritten, not accumulated.
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual void collect(const std::string& /*prefix*/, std::vector<ParamRef<T>>& /*params*/,
                         std::vector<BufferRef<T>>& /*buffers*/) {}
    virtual void init(Rng& /*rng*/) {}
};

template <typename T>
class Conv1d final : public Layer<T> {
public:
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding);

    std::string kind() const override { return "conv1d"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) override;
    void init(Rng& rng) override;

    Tensor<T>& weight() { return w_; }
    Tensor<T>& bias() { return b_; }

private:
    std::size_t stride_, padding_;
    Tensor<T> w_, b_, gw_, gb_;
    std::optional<Tensor<T>> cached_x_;
};

template <typename T>
class BatchNorm1d final : public Layer<T> {
public:
    explicit BatchNorm1d(std::size_t channels, double momentum = 0.1, double eps = 1e-5);

    std::string kind() const override { return "batchnorm1d"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) override;
    void init(Rng& rng) override;

    Tensor<T>& gamma() { return gamma_; }
    Tensor<T>& beta() { return beta_; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }

private:
    std::size_t channels_;
    double momentum_, eps_;
    Tensor<T> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_;
    // forward cache
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
    Mode cached_mode_ = Mode::Eval;
    bool have_cache_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
    std::string kind() const override { return "relu"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
    std::optional<Tensor<T>> cached_out_;
};

template <typename T>
class MaxPool1d final : public Layer<T> {
public:
    MaxPool1d(std::size_t kernel, std::size_t stride) : kernel_(kernel), stride_(stride) {}

    std::string kind() const override { return "maxpool1d"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
    std::size_t kernel_, stride_;
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
    bool have_cache_ = false;
};

template <typename T>
class Flatten final : public Layer<T> {
public:
    std::string kind() const override { return "flatten"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
    Shape input_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::size_t in_features, std::size_t out_features);

    std::string kind() const override { return "dense"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params, std::vector<BufferRef<T>>& buffers) override;
    void init(Rng& rng) override;

    Tensor<T>& weight() { return w_; }
    Tensor<T>& bias() { return b_; }

private:
    Tensor<T> w_, b_, gw_, gb_;  // w: out x in
    std::optional<Tensor<T>> cached_x_;
};

// Inverted dropout: survivors are scaled by 1/(1-p) in training; identity in eval.
template <typename T>
class Dropout final : public Layer<T> {
public:
    explicit Dropout(double p, std::uint64_t seed = 0) : p_(p), rng_(seed) {}

    std::string kind() const override { return "dropout"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void init(Rng& rng) override { rng_ = Rng(rng.next()); }

    // Fixes the mask for the next forward call (finite-difference checks).
    void freeze_mask(bool frozen) { frozen_ = frozen; }

private:
    double p_;
    Rng rng_;
    std::vector<T> mask_;
    bool frozen_ = false;
    Mode cached_mode_ = Mode::Eval;
};

// N x T x F  ->  N x F (features of the last time step).
template <typename T>
class LastStep final : public Layer<T> {
public:
    std::string kind() const override { return "last_step"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
    Shape input_shape_;
};

// N x F  ->  N x 1 x F, so sequence layers can consume flat vectors.
template <typename T>
class Reshape final : public Layer<T> {
public:
    explicit Reshape(Shape per_sample) : per_sample_(std::move(per_sample)) {}

    std::string kind() const override { return "reshape"; }
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;

private:
    Shape per_sample_;
    Shape input_shape_;
};

}  // namespace beacon::nn
