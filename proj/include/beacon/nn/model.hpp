#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "beacon/nn/layers.hpp"
#include "beacon/nn/lstm.hpp"

namespace beacon::nn {

enum class ModelKind : std::uint8_t { Cnn = 0, Mlp = 1, BiLstm = 2 };

const char* to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(const std::string& s);

struct CnnConfig {
    std::size_t input_len = 8448;
    std::vector<std::size_t> conv_channels{32, 64, 128};
    std::size_t kernel = 5;
    std::size_t stride = 1;
    std::size_t padding = 2;
    std::size_t pool_kernel = 2;
    std::size_t pool_stride = 2;
    double bn_momentum = 0.1;
    std::size_t dense_hidden = 512;
    double dropout = 0.5;
    std::size_t classes = 10;
};

struct MlpConfig {
    std::size_t input_len = 8448;
    std::size_t hidden = 32;
    std::size_t classes = 10;
};

struct LstmConfig {
    std::size_t input_size = 8448;
    std::size_t hidden = 128;
    std::size_t layers = 2;
    bool bidirectional = true;
    std::size_t classes = 10;
    std::size_t seq_len = 1;
};

struct ModelSpec {
    ModelKind kind = ModelKind::Cnn;
    CnnConfig cnn;
    MlpConfig mlp;
    LstmConfig lstm;

    static ModelSpec make(ModelKind kind, std::size_t input_len, std::size_t classes);

    std::size_t input_len() const;
    std::size_t classes() const;
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ModelSpec from_json(const nlohmann::ordered_json& j);
};

struct ShapeTraceEntry {
    std::string layer;
    Shape shape;  // output shape, batch dimension included
};

template <typename T>
class Sequential {
public:
    void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, std::vector<ShapeTraceEntry>* trace = nullptr);
    Tensor<T> backward(const Tensor<T>& grad_out);

    // Names are "<index>.<kind>.<param>", stable for a given architecture.
    std::vector<ParamRef<T>> params();
    std::vector<BufferRef<T>> buffers();

    void init(std::uint64_t seed);
    void zero_grad();

    std::size_t size() const noexcept { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
Sequential<T> build_network(const ModelSpec& spec);

}  // namespace beacon::nn
