#include "beacon/nn/model.hpp"

namespace beacon::nn {

const char* to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::Cnn: return "cnn";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::BiLstm: return "bilstm";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "cnn") return ModelKind::Cnn;
    if (s == "mlp") return ModelKind::Mlp;
    if (s == "bilstm" || s == "lstm") return ModelKind::BiLstm;
    fail(ErrorKind::Config, "unknown model kind '" + s + "' (expected cnn, mlp or bilstm)");
}

ModelSpec ModelSpec::make(ModelKind kind, std::size_t input_len, std::size_t classes) {
    ModelSpec s;
    s.kind = kind;
    s.cnn.input_len = s.mlp.input_len = s.lstm.input_size = input_len;
    s.cnn.classes = s.mlp.classes = s.lstm.classes = classes;
    return s;
}

std::size_t ModelSpec::input_len() const {
    switch (kind) {
        case ModelKind::Cnn: return cnn.input_len;
        case ModelKind::Mlp: return mlp.input_len;
        case ModelKind::BiLstm: return lstm.input_size * lstm.seq_len;
    }
    return 0;
}

std::size_t ModelSpec::classes() const {
    switch (kind) {
        case ModelKind::Cnn: return cnn.classes;
        case ModelKind::Mlp: return mlp.classes;
        case ModelKind::BiLstm: return lstm.classes;
    }
    return 0;
}

void ModelSpec::validate() const {
    if (classes() < 2) fail(ErrorKind::Config, "model.classes: need at least two classes");
    if (input_len() == 0) fail(ErrorKind::Config, "model.input_len: must be positive");
    if (kind == ModelKind::Cnn) {
        if (cnn.conv_channels.empty()) fail(ErrorKind::Config, "model.cnn.conv_channels: empty");
        if (!(cnn.dropout >= 0.0 && cnn.dropout < 1.0)) fail(ErrorKind::Config, "model.cnn.dropout: must lie in [0, 1)");
        std::size_t len = cnn.input_len;
        for (std::size_t i = 0; i < cnn.conv_channels.size(); ++i) {
            if (len + 2 * cnn.padding < cnn.kernel) fail(ErrorKind::Config, "model.cnn: input too short for the conv stack");
            len = (len + 2 * cnn.padding - cnn.kernel) / cnn.stride + 1;
            if (len < cnn.pool_kernel) fail(ErrorKind::Config, "model.cnn: input too short for the pooling stack");
            len = (len - cnn.pool_kernel) / cnn.pool_stride + 1;
        }
    }
    if (kind == ModelKind::BiLstm && lstm.seq_len == 0) fail(ErrorKind::Config, "model.lstm.seq_len: must be positive");
}

nlohmann::ordered_json ModelSpec::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    switch (kind) {
        case ModelKind::Cnn:
            j["input_len"] = cnn.input_len;
            j["conv_channels"] = cnn.conv_channels;
            j["kernel"] = cnn.kernel;
            j["stride"] = cnn.stride;
            j["padding"] = cnn.padding;
            j["pool_kernel"] = cnn.pool_kernel;
            j["pool_stride"] = cnn.pool_stride;
            j["bn_momentum"] = cnn.bn_momentum;
            j["dense_hidden"] = cnn.dense_hidden;
            j["dropout"] = cnn.dropout;
            j["classes"] = cnn.classes;
            break;
        case ModelKind::Mlp:
            j["input_len"] = mlp.input_len;
            j["hidden"] = mlp.hidden;
            j["classes"] = mlp.classes;
            break;
        case ModelKind::BiLstm:
            j["input_size"] = lstm.input_size;
            j["hidden"] = lstm.hidden;
            j["layers"] = lstm.layers;
            j["bidirectional"] = lstm.bidirectional;
            j["classes"] = lstm.classes;
            j["seq_len"] = lstm.seq_len;
            break;
    }
    return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::ordered_json& j) {
    ModelSpec s;
    try {
        s.kind = parse_model_kind(j.at("kind").get<std::string>());
        switch (s.kind) {
            case ModelKind::Cnn:
                s.cnn.input_len = j.at("input_len");
                s.cnn.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
                s.cnn.kernel = j.at("kernel");
                s.cnn.stride = j.at("stride");
                s.cnn.padding = j.at("padding");
                s.cnn.pool_kernel = j.at("pool_kernel");
                s.cnn.pool_stride = j.at("pool_stride");
                s.cnn.bn_momentum = j.at("bn_momentum");
                s.cnn.dense_hidden = j.at("dense_hidden");
                s.cnn.dropout = j.at("dropout");
                s.cnn.classes = j.at("classes");
                break;
            case ModelKind::Mlp:
                s.mlp.input_len = j.at("input_len");
                s.mlp.hidden = j.at("hidden");
                s.mlp.classes = j.at("classes");
                break;
            case ModelKind::BiLstm:
                s.lstm.input_size = j.at("input_size");
                s.lstm.hidden = j.at("hidden");
                s.lstm.layers = j.at("layers");
                s.lstm.bidirectional = j.at("bidirectional");
                s.lstm.classes = j.at("classes");
                s.lstm.seq_len = j.at("seq_len");
                break;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("model architecture: ") + e.what());
    }
    s.validate();
    return s;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode, std::vector<ShapeTraceEntry>* trace) {
    Tensor<T> h = x;
    for (auto& layer : layers_) {
        h = layer->forward(h, mode);
        if (trace) trace->push_back({layer->kind(), h.shape()});
    }
    return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

template <typename T>
std::vector<ParamRef<T>> Sequential<T>::params() {
    std::vector<ParamRef<T>> params;
    std::vector<BufferRef<T>> buffers;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect(std::to_string(i) + "." + layers_[i]->kind() + ".", params, buffers);
    }
    return params;
}

template <typename T>
std::vector<BufferRef<T>> Sequential<T>::buffers() {
    std::vector<ParamRef<T>> params;
    std::vector<BufferRef<T>> buffers;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect(std::to_string(i) + "." + layers_[i]->kind() + ".", params, buffers);
    }
    return buffers;
}

template <typename T>
void Sequential<T>::init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) layer->init(rng);
}

template <typename T>
void Sequential<T>::zero_grad() {
    for (auto& p : params()) p.grad->fill(T(0));
}

template <typename T>
Sequential<T> build_network(const ModelSpec& spec) {
    spec.validate();
    Sequential<T> net;
    switch (spec.kind) {
        case ModelKind::Cnn: {
            const auto& c = spec.cnn;
            net.add(std::make_unique<Reshape<T>>(Shape{1, c.input_len}));
            std::size_t in_ch = 1, len = c.input_len;
            for (std::size_t out_ch : c.conv_channels) {
                net.add(std::make_unique<Conv1d<T>>(in_ch, out_ch, c.kernel, c.stride, c.padding));
                net.add(std::make_unique<BatchNorm1d<T>>(out_ch, c.bn_momentum));
                net.add(std::make_unique<ReLU<T>>());
                net.add(std::make_unique<MaxPool1d<T>>(c.pool_kernel, c.pool_stride));
                len = (len + 2 * c.padding - c.kernel) / c.stride + 1;
                len = (len - c.pool_kernel) / c.pool_stride + 1;
                in_ch = out_ch;
            }
            net.add(std::make_unique<Flatten<T>>());
            net.add(std::make_unique<Dense<T>>(in_ch * len, c.dense_hidden));
            net.add(std::make_unique<ReLU<T>>());
            net.add(std::make_unique<Dropout<T>>(c.dropout));
            net.add(std::make_unique<Dense<T>>(c.dense_hidden, c.classes));
            break;
        }
        case ModelKind::Mlp: {
            const auto& m = spec.mlp;
            net.add(std::make_unique<Dense<T>>(m.input_len, m.hidden));
            net.add(std::make_unique<ReLU<T>>());
            net.add(std::make_unique<Dense<T>>(m.hidden, m.classes));
            break;
        }
        case ModelKind::BiLstm: {
            const auto& l = spec.lstm;
            net.add(std::make_unique<Reshape<T>>(Shape{l.seq_len, l.input_size}));
            net.add(std::make_unique<Lstm<T>>(l.input_size, l.hidden, l.layers, l.bidirectional));
            net.add(std::make_unique<LastStep<T>>());
            net.add(std::make_unique<Dense<T>>(l.hidden * (l.bidirectional ? 2 : 1), l.classes));
            break;
        }
    }
    return net;
}

template class Sequential<float>;
template class Sequential<double>;
template Sequential<float> build_network<float>(const ModelSpec&);
template Sequential<double> build_network<double>(const ModelSpec&);

}  // namespace beacon::nn
