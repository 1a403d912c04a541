#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "beacon/nn/adam.hpp"
#include "beacon/nn/model.hpp"

namespace beacon::nn {

// Row-major N x dim feature matrix with class indices.
struct LabeledSet {
    std::size_t dim = 0;
    std::vector<float> features;
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    void add(std::span<const float> row, std::size_t label);
    LabeledSet subset(std::span<const std::size_t> rows) const;
};

struct TrainConfig {
    AdamConfig adam;
    std::size_t batch_size = 64;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    bool check_finite = true;

    static std::size_t default_batch_size(ModelKind kind) noexcept { return kind == ModelKind::BiLstm ? 32 : 64; }
    void validate() const;
};

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> label_set;
    Sequential<float> net;
};

struct EpochRecord {
    std::size_t epoch = 0;      // 1-based
    double train_loss = 0.0;    // mean over the epoch's samples
    double train_acc = 0.0;     // train-mode predictions during the epoch
    double val_acc = 0.0;       // NaN when no validation set was given
};

struct TrainResult {
    TrainedModel model;
    std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Seeded init, per-epoch shuffle drawn from mix_seed(seed, epoch), the last
// partial batch included. Serial and deterministic for a given seed.
TrainResult train(const ModelSpec& spec, std::vector<std::string> label_set, const LabeledSet& train_set,
                  const LabeledSet* val_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// N x K softmax probabilities in eval mode.
Tensor<float> predict(TrainedModel& model, const LabeledSet& data, std::size_t batch_size = 64);
Tensor<float> predict(TrainedModel& model, std::span<const float> features, std::size_t batch_size = 64);

std::vector<std::size_t> argmax_rows(const Tensor<float>& probabilities);

std::string epoch_log_csv(std::span<const EpochRecord> log);

// "BEAM", version byte, kind byte, class count (u32), label set, architecture
// JSON, then named tensors: name, rank (u32), dims (u32 each), float32 data.
// Batchnorm running statistics are stored as ordinary named tensors.
void save_model(const std::filesystem::path& path, TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace beacon::nn
