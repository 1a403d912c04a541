#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <thread>

#include <gtest/gtest.h>

#include "beacon/embed.hpp"
#include "beacon/error.hpp"
#include "temp_dir.hpp"

using namespace beacon;
using beacon::testing::TempDir;

namespace {

// Reference signed-hash projection written from the published FNV-1a constants.
std::vector<double> reference_embed(const std::string& text, std::uint64_t seed) {
    std::vector<double> v(768, 0.0);
    static const std::regex word("[A-Za-z0-9]+");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), word); it != std::sregex_iterator(); ++it) {
        std::uint64_t h = 14695981039346656037ULL;
        auto mix = [&](unsigned char byte) {
            h ^= byte;
            h *= 1099511628211ULL;
        };
        for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
        for (unsigned char c : it->str()) mix(c);
        v[h % 768] += (h & (1ULL << 63)) ? -1.0 : 1.0;
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n > 0) {
        for (double& x : v) x /= std::sqrt(n);
    }
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    return d;
}

// Fails on the n-th call (1-based) when fail_at > 0.
class FlakyProvider final : public EmbeddingProvider {
public:
    explicit FlakyProvider(std::size_t fail_at) : fail_at_(fail_at) {}
    std::vector<float> embed(std::string_view text) override {
        count_calls(1);
        if (calls() == fail_at_) fail(ErrorKind::ProviderUnavailable, "injected failure");
        const auto v = local_embed(text, 1);
        return {v.begin(), v.end()};
    }
    std::string fingerprint() const override { return "flaky"; }

private:
    std::size_t fail_at_;
};

std::vector<Chunk> chunks_of(const std::string& id, std::size_t n) {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({id, i, R"({"k":"chunk text )" + std::to_string(i) + R"("})", 5});
    return out;
}

}  // namespace

TEST(LocalEmbed, MatchesReferenceOracle) {
    for (const std::string text : {"abc", R"({"behavior":{"summary":{"files":{"0":"C:\\Temp\\x.exe"}}}})", "a a a b"}) {
        const auto v = local_embed(text, 7);
        const auto ref = reference_embed(text, 7);
        ASSERT_EQ(v.size(), 768u);
        for (std::size_t i = 0; i < 768; ++i) EXPECT_DOUBLE_EQ(v[i], ref[i]);
    }
}

TEST(LocalEmbed, NormAndEmpty) {
    const auto empty = local_embed("", 7);
    for (double x : empty) EXPECT_EQ(x, 0.0);
    EXPECT_NEAR(cosine(local_embed("abc", 7), local_embed("abc", 7)), 1.0, 1e-9);
    EXPECT_NEAR(cosine(local_embed("one two three", 3), local_embed("one two three", 3)), 1.0, 1e-9);
}

TEST(LocalEmbed, OneTokenChangeLowersSimilarity) {
    const std::string a = "CreateFileW CreateFileW CreateFileW RegOpenKeyExW mutex";
    const std::string b = "CreateFileW CreateFileW CreateFileW RegOpenKeyExW event";
    EXPECT_LT(cosine(local_embed(a, 7), local_embed(b, 7)), 1.0 - 1e-6);
    EXPECT_NE(local_embed(a, 7), local_embed(a, 8));
}

TEST(LocalProvider, DeterministicFloatVector) {
    LocalProvider p(7);
    const auto a = embed_chunk(p, "same text");
    const auto b = embed_chunk(p, "same text");
    EXPECT_EQ(a, b);
    EXPECT_EQ(p.calls(), 2u);
}

TEST(EmbeddingCache, GetPutAndFingerprintIsolation) {
    TempDir dir;
    EmbeddingCache cache(dir.path());
    const std::string id(64, 'a');
    LocalProvider p7(7), p8(8);
    EXPECT_NE(p7.fingerprint(), p8.fingerprint());
    EXPECT_FALSE(cache.get(id, 0, p7.fingerprint()));

    std::vector<float> v(768);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::nextafter(static_cast<float>(i) * 0.1f, 1e9f);
    cache.put(id, 0, p7.fingerprint(), v);
    const auto got = cache.get(id, 0, p7.fingerprint());
    ASSERT_TRUE(got);
    EXPECT_EQ(std::memcmp(got->data(), v.data(), v.size() * sizeof(float)), 0);
    EXPECT_FALSE(cache.get(id, 0, p8.fingerprint()));
    EXPECT_FALSE(cache.get(id, 1, p7.fingerprint()));
}

TEST(EmbeddingCache, RecordLayoutAndCorruption) {
    TempDir dir;
    EmbeddingCache cache(dir.path());
    std::vector<float> v(768, 0.5f);
    cache.put("s", 3, "fp", v);
    const auto path = cache.record_path("s", 3, "fp");
    EXPECT_EQ(std::filesystem::file_size(path), 4u + 1u + 768u * 4u);
    {
        std::ifstream in(path, std::ios::binary);
        char magic[4];
        in.read(magic, 4);
        EXPECT_EQ(std::string(magic, 4), "BEAC");
    }
    std::filesystem::resize_file(path, 100);
    EXPECT_FALSE(cache.get("s", 3, "fp"));
}

TEST(EmbedSample, ArityCacheHitAndAtomicity) {
    TempDir dir;
    EmbeddingCache cache(dir.path());
    LocalProvider p(7);
    const auto chunks = chunks_of("sample", 3);
    const auto out = embed_sample(p, &cache, chunks);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(out[i].ordinal, i);
        EXPECT_EQ(out[i].values.size(), 768u);
    }
    const auto before = p.calls();
    const auto again = embed_sample(p, &cache, chunks);
    EXPECT_EQ(p.calls(), before);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again[i].values, out[i].values);

    FlakyProvider flaky(2);
    try {
        embed_sample(flaky, &cache, chunks_of("other", 3));
        FAIL() << "expected the sample to fail";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SampleFailed);
    }
    EXPECT_FALSE(load_cached_sample(cache, "other", 3, flaky.fingerprint()));
    EXPECT_TRUE(load_cached_sample(cache, "sample", 3, p.fingerprint()));
}

TEST(EmbedSample, ConcurrentFillMatchesSerial) {
    TempDir serial_dir, parallel_dir;
    EmbeddingCache serial(serial_dir.path()), parallel(parallel_dir.path());
    LocalProvider p(7);
    for (int s = 0; s < 8; ++s) embed_sample(p, &serial, chunks_of("s" + std::to_string(s), 4));
    std::vector<std::thread> pool;
    for (int s = 0; s < 8; ++s) {
        pool.emplace_back([&, s] { embed_sample(p, &parallel, chunks_of("s" + std::to_string(s), 4)); });
    }
    for (auto& t : pool) t.join();
    for (int s = 0; s < 8; ++s) {
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(serial.get("s" + std::to_string(s), i, p.fingerprint()),
                      parallel.get("s" + std::to_string(s), i, p.fingerprint()));
        }
    }
}

TEST(ProviderConfig, Validation) {
    ProviderConfig cfg;
    cfg.max_in_flight = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.kind = ProviderKind::Remote;
    ::unsetenv("BEACON_EMBED_ENDPOINT");
    EXPECT_THROW(cfg.validate(), Error);
    ::setenv("BEACON_EMBED_ENDPOINT", "http://127.0.0.1:9/embed", 1);
    ::setenv("BEACON_EMBED_TOKEN", "secret", 1);
    cfg.apply_environment();
    EXPECT_EQ(cfg.endpoint, "http://127.0.0.1:9/embed");
    EXPECT_EQ(cfg.auth_token, "secret");
    ::unsetenv("BEACON_EMBED_ENDPOINT");
    ::unsetenv("BEACON_EMBED_TOKEN");
}
