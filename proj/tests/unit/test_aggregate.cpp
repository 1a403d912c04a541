#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "beacon/aggregate.hpp"
#include "beacon/error.hpp"
#include "beacon/rng.hpp"
#include "jacobi.hpp"
#include "temp_dir.hpp"

using namespace beacon;
using beacon::testing::TempDir;

namespace {

std::vector<ChunkEmbedding> random_chunks(std::size_t n, Rng& rng, const std::string& id = "s") {
    std::vector<ChunkEmbedding> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        out[j].sample_id = id;
        out[j].ordinal = j;
        out[j].values.resize(kEmbeddingDim);
        for (auto& v : out[j].values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return out;
}

// Row-major 768 x n copy of the chunk matrix for the oracle.
std::vector<double> row_major(const std::vector<ChunkEmbedding>& embs) {
    const std::size_t n = embs.size();
    std::vector<double> m(kEmbeddingDim * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < kEmbeddingDim; ++r) m[r * n + j] = embs[j].values[r];
    }
    return m;
}

// Nearest-rank percentile written directly from the definition.
std::size_t oracle_target(std::vector<std::size_t> lengths, double p) {
    std::sort(lengths.begin(), lengths.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(lengths.size())));
    return lengths[std::max<std::size_t>(rank, 1) - 1] / 768 * 768;
}

double projected_variance(const Eigen::MatrixXd& centred, const Eigen::MatrixXd& basis) {
    return (centred * basis).squaredNorm();
}

}  // namespace

TEST(Concat, LayoutAndMissingOrdinal) {
    Rng rng(1);
    auto one = random_chunks(1, rng);
    const auto c1 = concat(one);
    ASSERT_EQ(c1.size(), 768u);
    EXPECT_EQ(c1[5], one[0].values[5]);
    auto two = random_chunks(2, rng);
    const auto c2 = concat(two);
    ASSERT_EQ(c2.size(), 1536u);
    EXPECT_EQ(c2[767], two[0].values[767]);
    EXPECT_EQ(c2[768], two[1].values[0]);
    EXPECT_EQ(concat(random_chunks(11, rng)).size(), 8448u);
    two[1].ordinal = 2;
    EXPECT_THROW(concat(two), Error);
}

TEST(TargetLength, Examples) {
    const std::vector<std::size_t> four{768, 1536, 2304, 76800};
    EXPECT_EQ(compute_target_length(four, 0.75), 2304u);
    const std::vector<std::size_t> flat(9, 768);
    EXPECT_EQ(compute_target_length(flat, 0.75), 768u);
    EXPECT_THROW(compute_target_length(std::vector<std::size_t>{}, 0.75), Error);
}

TEST(TargetLength, MatchesNearestRankOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> lengths(1 + rng.below(60));
        for (auto& l : lengths) l = 768 * (1 + rng.below(30));
        const double p = 0.05 + 0.95 * rng.uniform();
        EXPECT_EQ(compute_target_length(lengths, p), oracle_target(lengths, p));
    }
}

TEST(MeanPad, Examples) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(mean_pad(a, 5), (std::vector<double>{1, 2, 3, 2, 2}));
    EXPECT_EQ(mean_pad(a, 3), a);
    const std::vector<double> b{-1, 1};
    EXPECT_EQ(mean_pad(b, 4), (std::vector<double>{-1, 1, 0, 0}));
    EXPECT_THROW(mean_pad(std::vector<double>{}, 4), Error);
}

TEST(MeanPad, PreservesMean) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng.below(3000));
        for (auto& x : v) x = rng.normal() * 10.0;
        const std::size_t target = v.size() + rng.below(5000);
        const auto out = mean_pad(v, target);
        ASSERT_EQ(out.size(), target);
        const double m_in = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        const double m_out = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
        EXPECT_NEAR(m_out, m_in, 1e-9);
    }
}

TEST(Pca, MatchesJacobiOracle) {
    Rng rng(12);
    auto embs = random_chunks(12, rng);
    const auto got = pca_reduce(embs, 11);
    const auto want = beacon::testing::oracle_pca(row_major(embs), kEmbeddingDim, 12, 11);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t c = 0; c < 11; ++c) {
        double dot = 0.0;
        for (std::size_t r = 0; r < kEmbeddingDim; ++r) dot += got[c * 768 + r] * want[c * 768 + r];
        const double sign = dot < 0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < kEmbeddingDim; ++r) ASSERT_NEAR(got[c * 768 + r], sign * want[c * 768 + r], 1e-6);
    }
}

TEST(Pca, SignRuleAndOrdering) {
    Rng rng(3);
    const auto embs = random_chunks(20, rng);
    const auto r = pca_decompose(embedding_matrix(embs), 11);
    for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
        Eigen::Index arg;
        r.components.col(c).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(r.components(arg, c), 0.0);
        if (c > 0) EXPECT_GE(r.singular_values(c - 1), r.singular_values(c));
    }
}

TEST(Pca, RankOneReconstructsExactly) {
    Rng rng(5);
    Eigen::VectorXd base(768), d(768);
    for (Eigen::Index i = 0; i < 768; ++i) {
        base(i) = rng.uniform(-1, 1);
        d(i) = rng.uniform(-1, 1);
    }
    Eigen::MatrixXd m(768, 3);
    const double t[3] = {-0.5, 0.25, 1.5};
    for (int j = 0; j < 3; ++j) m.col(j) = base + t[j] * d;
    const auto r = pca_decompose(m, 1);
    const Eigen::MatrixXd recon = (r.projected * r.components.transpose()).colwise() + r.row_means;
    EXPECT_LT((recon - m).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, TwoPointComponent) {
    Eigen::MatrixXd m(768, 2);
    Rng rng(6);
    for (Eigen::Index i = 0; i < 768; ++i) {
        m(i, 0) = rng.uniform(-1, 1);
        m(i, 1) = rng.uniform(-1, 1);
    }
    const auto r = pca_decompose(m, 1);
    // Over the chunk axis the direction is (1, -1)/sqrt(2) up to the sign rule.
    EXPECT_NEAR(std::abs(r.components(0, 0)), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(r.components(0, 0), -r.components(1, 0), 1e-12);
    const double sign = r.components(0, 0) > 0 ? 1.0 : -1.0;
    EXPECT_LT((r.projected.col(0) - sign * (m.col(0) - m.col(1)) / std::sqrt(2.0)).norm(), 1e-9);
}

TEST(Pca, InvalidK) {
    Rng rng(1);
    const auto embs = random_chunks(4, rng);
    EXPECT_THROW(pca_reduce(embs, 4), Error);
    EXPECT_THROW(pca_reduce(embs, 0), Error);
}

TEST(Pca, BeatsRandomProjections) {
    Rng rng(21);
    const auto embs = random_chunks(15, rng);
    const Eigen::MatrixXd m = embedding_matrix(embs);
    const Eigen::MatrixXd centred = m.colwise() - m.rowwise().mean();
    const auto r = pca_decompose(m, 4);
    const double best = projected_variance(centred, r.components);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::MatrixXd g(15, 4);
        for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(15, 4);
        EXPECT_GE(best, projected_variance(centred, q) - 1e-9);
    }
}

TEST(Pca, ReconstructionErrorNonIncreasingInK) {
    Rng rng(22);
    const auto embs = random_chunks(10, rng);
    const Eigen::MatrixXd m = embedding_matrix(embs);
    double prev = INFINITY;
    for (std::size_t k = 1; k < 10; ++k) {
        const auto r = pca_decompose(m, k);
        const Eigen::MatrixXd recon = (r.projected * r.components.transpose()).colwise() + r.row_means;
        const double err = (recon - m).norm() / m.norm();
        EXPECT_LE(err, prev + 1e-12);
        prev = err;
    }
}

TEST(BuildDataset, MethodsAndUniformLength) {
    Rng rng(9);
    std::vector<std::pair<std::string, std::vector<ChunkEmbedding>>> samples;
    for (std::size_t n : {11u, 3u, 20u}) samples.emplace_back("n" + std::to_string(n), random_chunks(n, rng));
    samples.emplace_back("empty", std::vector<ChunkEmbedding>{});
    AggregateStats stats = freeze_stats({8448, 2304, 15360}, 0.75);
    stats.target_length = 8448;
    const auto built = build_dataset(samples, stats);
    ASSERT_EQ(built.vectors.size(), 3u);
    ASSERT_EQ(built.failures.size(), 1u);
    EXPECT_EQ(built.failures[0].first, "empty");
    for (const auto& v : built.vectors) EXPECT_EQ(v.values.size(), 8448u);
    EXPECT_EQ(built.vectors[0].method, AggregateMethod::Identity);
    EXPECT_EQ(built.vectors[1].method, AggregateMethod::Padded);
    EXPECT_EQ(built.vectors[2].method, AggregateMethod::Pca);
    EXPECT_EQ(built.vectors[2].source_len, 20u * 768u);

    const auto flat = concat(samples[1].second);
    const double mean = std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(flat.size());
    for (std::size_t i = 2304; i < 8448; ++i) EXPECT_EQ(built.vectors[1].values[i], static_cast<float>(mean));
}

TEST(Vectors, FileRoundTrip) {
    Rng rng(10);
    std::vector<SampleVector> vs;
    for (int s = 0; s < 3; ++s) {
        SampleVector v;
        v.sample_id = std::string(63, 'a') + static_cast<char>('0' + s);
        v.values.resize(1536);
        for (auto& x : v.values) x = static_cast<float>(rng.normal());
        v.method = static_cast<AggregateMethod>(s);
        vs.push_back(v);
    }
    TempDir dir;
    write_vectors(dir / "v.bin", vs, 1536);
    EXPECT_EQ(std::filesystem::file_size(dir / "v.bin"), 4u + 1u + 4u + 4u + 3u * (32u + 1u + 1536u * 4u));
    const auto back = read_vectors(dir / "v.bin");
    ASSERT_EQ(back.size(), 3u);
    for (int s = 0; s < 3; ++s) {
        EXPECT_EQ(back[s].sample_id, vs[s].sample_id);
        EXPECT_EQ(back[s].method, vs[s].method);
        EXPECT_EQ(back[s].values, vs[s].values);
    }
    try {
        read_vectors(dir / "missing.bin");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingArtifact);
    }
}
