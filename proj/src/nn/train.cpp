#include "beacon/nn/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "beacon/binary_io.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/rng.hpp"

namespace beacon::nn {

void LabeledSet::add(std::span<const float> row, std::size_t label) {
    if (dim == 0 && labels.empty()) dim = row.size();
    if (row.size() != dim) fail(ErrorKind::Shape, "labeled set: row of length " + std::to_string(row.size()) + ", expected " + std::to_string(dim));
    features.insert(features.end(), row.begin(), row.end());
    labels.push_back(label);
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
    LabeledSet out;
    out.dim = dim;
    out.features.reserve(rows.size() * dim);
    for (std::size_t r : rows) {
        if (r >= size()) fail(ErrorKind::InvalidArgument, "labeled set: row index out of range");
        out.features.insert(out.features.end(), features.begin() + static_cast<std::ptrdiff_t>(r * dim),
                            features.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
        out.labels.push_back(labels[r]);
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(adam.lr >= 0.0) || !std::isfinite(adam.lr)) fail(ErrorKind::Config, "train.lr: must be a finite non-negative number");
    if (batch_size == 0) fail(ErrorKind::Config, "train.batch_size: must be at least 1");
}

namespace {

Tensor<float> batch_of(const LabeledSet& data, std::span<const std::size_t> rows) {
    Tensor<float> x({rows.size(), data.dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(data.features.begin() + static_cast<std::ptrdiff_t>(rows[i] * data.dim), data.dim, x.data() + i * data.dim);
    }
    return x;
}

void check_labels(const LabeledSet& data, std::size_t classes, const char* which) {
    for (std::size_t l : data.labels) {
        if (l >= classes) {
            fail(ErrorKind::Config, std::string(which) + " set holds label " + std::to_string(l) + " but the model has " +
                                        std::to_string(classes) + " classes");
        }
    }
}

double accuracy_of(const Tensor<float>& probs, std::span<const std::size_t> labels) {
    const auto pred = argmax_rows(probs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
    return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

TrainResult train(const ModelSpec& spec, std::vector<std::string> label_set, const LabeledSet& train_set,
                  const LabeledSet* val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    spec.validate();
    if (label_set.size() != spec.classes()) {
        fail(ErrorKind::Config, "label set has " + std::to_string(label_set.size()) + " families but the model expects " +
                                    std::to_string(spec.classes()));
    }
    if (train_set.size() == 0) fail(ErrorKind::EmptyInput, "train: empty training set");
    if (train_set.dim != spec.input_len()) {
        fail(ErrorKind::Shape, "train: vectors have length " + std::to_string(train_set.dim) + " but the model expects " +
                                   std::to_string(spec.input_len()));
    }
    check_labels(train_set, spec.classes(), "training");
    if (val_set) check_labels(*val_set, spec.classes(), "validation");

    TrainResult result{TrainedModel{spec, std::move(label_set), build_network<float>(spec)}, {}};
    auto& net = result.model.net;
    net.init(cfg.seed);
    const auto params = net.params();
    Adam<float> adam(cfg.adam, cfg.check_finite);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(mix_seed(cfg.seed, epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch_size, order.size() - start));
            std::vector<std::size_t> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = train_set.labels[rows[i]];

            const Tensor<float> logits = net.forward(batch_of(train_set, rows), Mode::Train);
            const auto xent = softmax_xent(logits, labels);
            if (cfg.check_finite && !std::isfinite(xent.loss)) {
                fail(ErrorKind::Numerical, "non-finite loss in epoch " + std::to_string(epoch));
            }
            net.backward(xent.grad);
            adam.step(params);

            loss_sum += xent.loss * static_cast<double>(rows.size());
            const auto pred = argmax_rows(xent.probabilities);
            for (std::size_t i = 0; i < rows.size(); ++i) hits += pred[i] == labels[i];
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_acc = static_cast<double>(hits) / static_cast<double>(train_set.size());
        rec.val_acc = std::numeric_limits<double>::quiet_NaN();
        if (val_set && val_set->size() > 0) rec.val_acc = accuracy_of(predict(result.model, *val_set), val_set->labels);
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

Tensor<float> predict(TrainedModel& model, std::span<const float> features, std::size_t batch_size) {
    const std::size_t dim = model.spec.input_len(), k = model.spec.classes();
    if (features.size() % dim != 0) {
        fail(ErrorKind::Shape, "predict: feature buffer is not a whole number of length-" + std::to_string(dim) + " vectors");
    }
    const std::size_t n = features.size() / dim;
    Tensor<float> out({n, k});
    batch_size = std::max<std::size_t>(batch_size, 1);
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t b = std::min(batch_size, n - start);
        Tensor<float> x({b, dim}, std::vector<float>(features.begin() + static_cast<std::ptrdiff_t>(start * dim),
                                                     features.begin() + static_cast<std::ptrdiff_t>((start + b) * dim)));
        const auto probs = softmax(model.net.forward(x, Mode::Eval));
        std::copy(probs.values().begin(), probs.values().end(), out.data() + start * k);
    }
    return out;
}

Tensor<float> predict(TrainedModel& model, const LabeledSet& data, std::size_t batch_size) {
    if (data.size() > 0 && data.dim != model.spec.input_len()) {
        fail(ErrorKind::Shape, "predict: vectors have length " + std::to_string(data.dim) + " but the model expects " +
                                   std::to_string(model.spec.input_len()));
    }
    return predict(model, std::span<const float>(data.features), batch_size);
}

std::vector<std::size_t> argmax_rows(const Tensor<float>& probabilities) {
    expect_shape(probabilities.rank() == 2, "argmax_rows: expected N x K");
    const std::size_t n = probabilities.dim(0), k = probabilities.dim(1);
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = probabilities.data() + i * k;
        out[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    }
    return out;
}

std::string epoch_log_csv(std::span<const EpochRecord> log) {
    std::ostringstream out;
    out.precision(9);
    out << "epoch,train_loss,train_acc,val_acc\n";
    for (const auto& r : log) {
        out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',';
        if (std::isnan(r.val_acc)) {
            out << "nan";
        } else {
            out << r.val_acc;
        }
        out << '\n';
    }
    return out.str();
}

namespace {
constexpr std::uint8_t kModelVersion = 1;

void write_tensor(std::ostream& out, const std::string& name, const Tensor<float>& t) {
    binio::write_string(out, name);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    binio::write_f32(out, t.values());
}
}  // namespace

void save_model(const std::filesystem::path& path, TrainedModel& model) {
    std::ostringstream out(std::ios::binary);
    binio::write_magic(out, "BEAM");
    binio::write_le<std::uint8_t>(out, kModelVersion);
    binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(model.spec.kind));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec.classes()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.label_set.size()));
    for (const auto& l : model.label_set) binio::write_string(out, l);
    binio::write_string(out, model.spec.to_json().dump());
    const auto params = model.net.params();
    const auto buffers = model.net.buffers();
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
    for (const auto& p : params) write_tensor(out, p.name, *p.value);
    for (const auto& b : buffers) write_tensor(out, b.name, *b.value);
    write_file_atomic(path, out.str());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingArtifact, "missing model file " + path.string());
    if (!binio::read_magic(in, "BEAM")) fail(ErrorKind::Parse, path.string() + ": not a BEAM model file");
    if (binio::read_le<std::uint8_t>(in) != kModelVersion) fail(ErrorKind::Parse, path.string() + ": unsupported BEAM version");
    const auto kind = binio::read_le<std::uint8_t>(in);
    const auto classes = binio::read_le<std::uint32_t>(in);
    const auto n_labels = binio::read_le<std::uint32_t>(in);
    std::vector<std::string> labels;
    for (std::uint32_t i = 0; i < n_labels; ++i) labels.push_back(binio::read_string(in));
    nlohmann::ordered_json arch;
    try {
        arch = nlohmann::ordered_json::parse(binio::read_string(in));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": bad architecture block: " + e.what());
    }
    ModelSpec spec = ModelSpec::from_json(arch);
    if (static_cast<std::uint8_t>(spec.kind) != kind || spec.classes() != classes || labels.size() != classes) {
        fail(ErrorKind::Parse, path.string() + ": header disagrees with architecture block");
    }

    TrainedModel model{spec, std::move(labels), build_network<float>(spec)};
    std::vector<std::pair<std::string, Tensor<float>*>> slots;
    for (const auto& p : model.net.params()) slots.emplace_back(p.name, p.value);
    for (const auto& b : model.net.buffers()) slots.emplace_back(b.name, b.value);

    const auto count = binio::read_le<std::uint32_t>(in);
    if (count != slots.size()) fail(ErrorKind::Parse, path.string() + ": tensor count does not match the architecture");
    for (auto& [name, tensor] : slots) {
        const std::string stored = binio::read_string(in);
        if (stored != name) fail(ErrorKind::Parse, path.string() + ": expected tensor " + name + ", found " + stored);
        const auto rank = binio::read_le<std::uint32_t>(in);
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(binio::read_le<std::uint32_t>(in));
        if (shape != tensor->shape()) {
            fail(ErrorKind::Parse, path.string() + ": tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                                       shape_string(tensor->shape()));
        }
        binio::read_f32(in, tensor->values());
    }
    return model;
}

}  // namespace beacon::nn
