#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "beacon/chunker.hpp"
#include "beacon/corpus.hpp"
#include "beacon/embed.hpp"
#include "beacon/metrics.hpp"
#include "beacon/nn/train.hpp"
#include "beacon/synthgen.hpp"

namespace beacon {

struct PipelineConfig {
    std::filesystem::path reports_dir = "reports";  // holds manifest.csv and the report files
    std::filesystem::path work_dir = "work";
    std::uint64_t seed = 1;  // drives synthesis, fold assignment, weight init and shuffling
    SynthConfig synth;
    ChunkBudget budget;
    ProviderConfig provider;
    std::optional<std::uint64_t> provider_seed;  // local hashing seed; defaults to `seed`
    double percentile = 0.75;
    double train_fraction = 0.76;
    std::size_t folds = 5;
    nn::ModelKind model = nn::ModelKind::Cnn;
    nn::TrainConfig train;           // train.batch_size == 0 selects the per-model default
    std::size_t parallel = 1;        // worker threads for chunking and embedding

    PipelineConfig();

    nlohmann::ordered_json to_json() const;
    // Unknown keys and bad values fail with ErrorKind::Config naming the field path.
    static PipelineConfig from_json(const nlohmann::ordered_json& j);
    void validate() const;

    // Resolved values actually used by the stages.
    SynthConfig effective_synth() const;
    ProviderConfig effective_provider() const;
    nn::TrainConfig effective_train() const;

    std::filesystem::path manifest_path() const { return reports_dir / "manifest.csv"; }
    std::filesystem::path chunks_dir() const { return work_dir / "chunks"; }
    std::filesystem::path embeddings_dir() const { return work_dir / "embeddings"; }
    std::filesystem::path vectors_dir() const { return work_dir / "vectors"; }
    std::filesystem::path models_dir() const { return work_dir / "models"; }
    std::filesystem::path reports_out_dir() const { return work_dir / "reports"; }
    std::filesystem::path model_path() const;
};

// Applies "dotted.key=value" overrides to a config document. The value is
// parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::ordered_json& doc, const std::string& assignment);

// Defaults, then the file (if given), then the overrides in order.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

struct StageResult {
    bool up_to_date = false;         // stamp matched; nothing was redone
    std::size_t processed = 0;
    std::size_t failed = 0;
    std::size_t provider_calls = 0;  // embed stage only
    std::vector<std::pair<std::string, std::string>> failures;
};

struct FoldResult {
    std::size_t fold = 0;  // 1-based
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    double val_acc = 0.0;
};

struct CvSummary {
    std::vector<FoldResult> folds;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
    nlohmann::ordered_json to_json() const;
};

struct TrainSummary {
    bool up_to_date = false;
    std::optional<CvSummary> cv;
    std::vector<nn::EpochRecord> log;  // final model, or the last fold under --cv
};

Manifest cmd_synth(const PipelineConfig& cfg);
StageResult cmd_chunk(const PipelineConfig& cfg);
// `provider` overrides the configured one (tests use it to count calls).
StageResult cmd_embed(const PipelineConfig& cfg, EmbeddingProvider* provider = nullptr);
StageResult cmd_aggregate(const PipelineConfig& cfg);
TrainSummary cmd_train(const PipelineConfig& cfg, bool cross_validate = false);
EvalReport cmd_eval(const PipelineConfig& cfg);
void cmd_report(const PipelineConfig& cfg);
// chunk -> embed -> aggregate -> train -> eval -> report (synth first when requested).
EvalReport cmd_run(const PipelineConfig& cfg, bool synthesize = false);

// Process exit status for an error kind: 2 config, 3 missing artifact,
// 4 provider failure, 5 numerical failure, 1 anything else.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace beacon
