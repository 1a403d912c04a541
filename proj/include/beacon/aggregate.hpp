#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "beacon/embed.hpp"

namespace beacon {

enum class AggregateMethod : std::uint8_t { Identity = 0, Padded = 1, Pca = 2 };

const char* to_string(AggregateMethod m) noexcept;

struct SampleVector {
    std::string sample_id;
    std::vector<float> values;
    std::size_t source_len = 0;  // n_chunks * 768 before reduction / padding
    AggregateMethod method = AggregateMethod::Identity;
};

struct AggregateStats {
    std::vector<std::size_t> lengths;  // concatenated lengths over the training split
    double percentile = 0.75;
    std::size_t target_length = 0;     // multiple of 768
};

// Fails with IncompleteSample unless ordinals are exactly 0..n-1 in order.
std::vector<double> concat(std::span<const ChunkEmbedding> embs);

// Nearest-rank percentile (1-based rank ceil(p*N)) rounded down to a multiple of 768.
std::size_t compute_target_length(std::span<const std::size_t> lengths, double percentile);
AggregateStats freeze_stats(std::vector<std::size_t> training_lengths, double percentile);

// 768 x n matrix whose column j is chunk j's embedding.
Eigen::MatrixXd embedding_matrix(std::span<const ChunkEmbedding> embs);

struct PcaResult {
    Eigen::MatrixXd projected;        // rows x k; column j is pseudo-chunk j
    Eigen::MatrixXd components;       // n x k principal directions over the chunk axis
    Eigen::VectorXd singular_values;  // k, descending
    Eigen::VectorXd row_means;        // per-row mean across the n columns
};

// Centres each row across columns, then projects onto the top-k right singular
// vectors. Each component is signed so its largest-magnitude loading is positive
// (first index wins ties).
PcaResult pca_decompose(const Eigen::MatrixXd& m, std::size_t k);

// Flattened column-major projection: k pseudo-chunks of 768 values.
std::vector<double> pca_reduce(std::span<const ChunkEmbedding> embs, std::size_t k);

// v followed by (target - |v|) copies of mean(v).
std::vector<double> mean_pad(std::span<const double> v, std::size_t target);

SampleVector build_sample_vector(const std::string& sample_id, std::span<const ChunkEmbedding> embs,
                                 std::size_t target_length);

struct DatasetBuild {
    std::vector<SampleVector> vectors;
    std::vector<std::pair<std::string, std::string>> failures;  // (sample_id, reason)
};

DatasetBuild build_dataset(const std::vector<std::pair<std::string, std::vector<ChunkEmbedding>>>& samples,
                           const AggregateStats& stats);

// "BEAV", version byte, L_target (u32), count (u32); per sample 32 raw sha256
// bytes, method byte, L_target little-endian float32 values.
void write_vectors(const std::filesystem::path& path, std::span<const SampleVector> vectors, std::size_t target_length);
std::vector<SampleVector> read_vectors(const std::filesystem::path& path);

}  // namespace beacon
