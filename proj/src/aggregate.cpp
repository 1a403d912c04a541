#include "beacon/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "beacon/binary_io.hpp"
#include "beacon/error.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/hash.hpp"

namespace beacon {

const char* to_string(AggregateMethod m) noexcept {
    switch (m) {
        case AggregateMethod::Identity: return "identity";
        case AggregateMethod::Padded: return "padded";
        case AggregateMethod::Pca: return "pca";
    }
    return "?";
}

std::vector<double> concat(std::span<const ChunkEmbedding> embs) {
    std::vector<double> out;
    out.reserve(embs.size() * kEmbeddingDim);
    for (std::size_t i = 0; i < embs.size(); ++i) {
        if (embs[i].ordinal != i) fail(ErrorKind::IncompleteSample, "concat: missing ordinal " + std::to_string(i));
        if (embs[i].values.size() != kEmbeddingDim) fail(ErrorKind::IncompleteSample, "concat: embedding " + std::to_string(i) + " has wrong length");
        out.insert(out.end(), embs[i].values.begin(), embs[i].values.end());
    }
    return out;
}

std::size_t compute_target_length(std::span<const std::size_t> lengths, double percentile) {
    if (lengths.empty()) fail(ErrorKind::EmptyInput, "compute_target_length: no lengths");
    if (!(percentile > 0.0 && percentile <= 1.0)) fail(ErrorKind::InvalidArgument, "compute_target_length: percentile must lie in (0, 1]");
    std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    const std::size_t target = sorted[rank - 1] / kEmbeddingDim * kEmbeddingDim;
    if (target == 0) fail(ErrorKind::InvalidArgument, "compute_target_length: percentile length below one chunk");
    return target;
}

AggregateStats freeze_stats(std::vector<std::size_t> training_lengths, double percentile) {
    AggregateStats s;
    s.target_length = compute_target_length(training_lengths, percentile);
    s.lengths = std::move(training_lengths);
    s.percentile = percentile;
    return s;
}

Eigen::MatrixXd embedding_matrix(std::span<const ChunkEmbedding> embs) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(kEmbeddingDim), static_cast<Eigen::Index>(embs.size()));
    for (std::size_t j = 0; j < embs.size(); ++j) {
        if (embs[j].values.size() != kEmbeddingDim) fail(ErrorKind::IncompleteSample, "embedding has wrong length");
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = embs[j].values[i];
        }
    }
    return m;
}

PcaResult pca_decompose(const Eigen::MatrixXd& m, std::size_t k) {
    const auto n = static_cast<std::size_t>(m.cols());
    if (k < 1 || k >= n) {
        fail(ErrorKind::InvalidArgument, "pca: k=" + std::to_string(k) + " must satisfy 1 <= k < n=" + std::to_string(n));
    }
    PcaResult r;
    r.row_means = m.rowwise().mean();
    const Eigen::MatrixXd centred = m.colwise() - r.row_means;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const auto kk = static_cast<Eigen::Index>(k);
    r.components = svd.matrixV().leftCols(kk);
    r.singular_values = svd.singularValues().head(kk);
    for (Eigen::Index c = 0; c < kk; ++c) {
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < r.components.rows(); ++i) {
            if (std::abs(r.components(i, c)) > std::abs(r.components(arg, c))) arg = i;
        }
        if (r.components(arg, c) < 0) r.components.col(c) *= -1.0;
    }
    r.projected = centred * r.components;
    return r;
}

std::vector<double> pca_reduce(std::span<const ChunkEmbedding> embs, std::size_t k) {
    for (std::size_t i = 0; i < embs.size(); ++i) {
        if (embs[i].ordinal != i) fail(ErrorKind::IncompleteSample, "pca_reduce: missing ordinal " + std::to_string(i));
    }
    const PcaResult r = pca_decompose(embedding_matrix(embs), k);
    // Eigen storage is column-major, so this is exactly the pseudo-chunk layout.
    return {r.projected.data(), r.projected.data() + r.projected.size()};
}

std::vector<double> mean_pad(std::span<const double> v, std::size_t target) {
    if (v.empty()) fail(ErrorKind::EmptyInput, "mean_pad: empty vector");
    if (v.size() > target) fail(ErrorKind::InvalidArgument, "mean_pad: vector longer than target length");
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::vector<double> out(v.begin(), v.end());
    out.resize(target, mean);
    return out;
}

SampleVector build_sample_vector(const std::string& sample_id, std::span<const ChunkEmbedding> embs, std::size_t target_length) {
    if (target_length == 0 || target_length % kEmbeddingDim != 0) {
        fail(ErrorKind::InvalidArgument, "target length must be a positive multiple of 768");
    }
    if (embs.empty()) fail(ErrorKind::EmptyInput, "sample " + sample_id + " has no embeddings");
    SampleVector sv;
    sv.sample_id = sample_id;
    sv.source_len = embs.size() * kEmbeddingDim;
    std::vector<double> values;
    if (sv.source_len < target_length) {
        values = mean_pad(concat(embs), target_length);
        sv.method = AggregateMethod::Padded;
    } else if (sv.source_len > target_length) {
        values = pca_reduce(embs, target_length / kEmbeddingDim);
        sv.method = AggregateMethod::Pca;
    } else {
        values = concat(embs);
        sv.method = AggregateMethod::Identity;
    }
    sv.values.assign(values.begin(), values.end());
    return sv;
}

DatasetBuild build_dataset(const std::vector<std::pair<std::string, std::vector<ChunkEmbedding>>>& samples,
                           const AggregateStats& stats) {
    DatasetBuild out;
    for (const auto& [id, embs] : samples) {
        try {
            out.vectors.push_back(build_sample_vector(id, embs, stats.target_length));
        } catch (const Error& e) {
            out.failures.emplace_back(id, e.what());
        }
    }
    return out;
}

namespace {
constexpr std::uint8_t kVectorsVersion = 1;
}

void write_vectors(const std::filesystem::path& path, std::span<const SampleVector> vectors, std::size_t target_length) {
    std::ostringstream out(std::ios::binary);
    binio::write_magic(out, "BEAV");
    binio::write_le<std::uint8_t>(out, kVectorsVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(target_length));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(vectors.size()));
    for (const auto& v : vectors) {
        if (v.values.size() != target_length) fail(ErrorKind::Shape, "write_vectors: sample " + v.sample_id + " has the wrong length");
        const auto digest = from_hex(v.sample_id);
        out.write(reinterpret_cast<const char*>(digest.data()), static_cast<std::streamsize>(digest.size()));
        binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(v.method));
        binio::write_f32(out, v.values);
    }
    write_file_atomic(path, out.str());
}

std::vector<SampleVector> read_vectors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingArtifact, "missing vector file " + path.string());
    if (!binio::read_magic(in, "BEAV")) fail(ErrorKind::Parse, path.string() + ": not a BEAV vector file");
    if (binio::read_le<std::uint8_t>(in) != kVectorsVersion) fail(ErrorKind::Parse, path.string() + ": unsupported BEAV version");
    const auto length = binio::read_le<std::uint32_t>(in);
    const auto count = binio::read_le<std::uint32_t>(in);
    std::vector<SampleVector> out(count);
    for (auto& v : out) {
        Sha256Digest digest{};
        if (!in.read(reinterpret_cast<char*>(digest.data()), static_cast<std::streamsize>(digest.size()))) {
            fail(ErrorKind::Parse, path.string() + ": truncated");
        }
        v.sample_id = to_hex(digest);
        const auto method = binio::read_le<std::uint8_t>(in);
        if (method > 2) fail(ErrorKind::Parse, path.string() + ": bad method byte");
        v.method = static_cast<AggregateMethod>(method);
        v.values.resize(length);
        binio::read_f32(in, v.values);
    }
    return out;
}

}  // namespace beacon
