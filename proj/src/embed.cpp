#include "beacon/embed.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "beacon/binary_io.hpp"
#include "beacon/error.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/hash.hpp"
#include "beacon/remote_provider.hpp"

namespace beacon {

namespace fs = std::filesystem;

void ProviderConfig::validate() const {
    if (max_in_flight < 1) fail(ErrorKind::Config, "provider.max_in_flight: must be at least 1");
    if (batch_size < 1) fail(ErrorKind::Config, "provider.batch_size: must be at least 1");
    if (kind == ProviderKind::Remote && endpoint.empty()) {
        fail(ErrorKind::Config, "provider.endpoint: required for the remote provider (or set BEACON_EMBED_ENDPOINT)");
    }
}

void ProviderConfig::apply_environment() {
    if (endpoint.empty()) {
        if (const char* e = std::getenv("BEACON_EMBED_ENDPOINT")) endpoint = e;
    }
    if (auth_token.empty()) {
        if (const char* t = std::getenv("BEACON_EMBED_TOKEN")) auth_token = t;
    }
}

std::vector<std::string_view> tokenize(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

std::vector<double> local_embed(std::string_view text, std::uint64_t seed) {
    std::vector<double> v(kEmbeddingDim, 0.0);
    for (auto tok : tokenize(text)) {
        const std::uint64_t h = fnv1a64_seeded(seed, tok);
        v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::string provider_fingerprint(ProviderKind kind, std::string_view model_identity, std::uint64_t seed) {
    std::ostringstream key;
    key << (kind == ProviderKind::Local ? "local" : "remote") << '\n' << model_identity << '\n' << seed;
    return sha256_hex(key.str()).substr(0, 16);
}

std::vector<std::vector<float>> EmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

std::vector<float> LocalProvider::embed(std::string_view text) {
    count_calls(1);
    const auto v = local_embed(text, seed_);
    return {v.begin(), v.end()};
}

std::string LocalProvider::fingerprint() const {
    return provider_fingerprint(ProviderKind::Local, "signed-hash-fnv1a64-768", seed_);
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& cfg) {
    cfg.validate();
    if (cfg.kind == ProviderKind::Local) return std::make_unique<LocalProvider>(cfg.seed);
    return std::make_unique<RemoteProvider>(cfg);
}

namespace {

void check_embedding(const std::vector<float>& v) {
    if (v.size() != kEmbeddingDim) {
        fail(ErrorKind::Protocol, "embedding has " + std::to_string(v.size()) + " values, expected 768");
    }
    for (float x : v) {
        if (!std::isfinite(x)) fail(ErrorKind::Protocol, "embedding contains a non-finite value");
    }
}

}  // namespace

std::vector<float> embed_chunk(EmbeddingProvider& provider, std::string_view text) {
    auto v = provider.embed(text);
    check_embedding(v);
    return v;
}

EmbeddingCache::EmbeddingCache(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(ErrorKind::Io, "cannot create cache directory " + root_.string() + ": " + ec.message());
}

fs::path EmbeddingCache::record_path(const std::string& sample_id, std::size_t ordinal, const std::string& fingerprint) const {
    return root_ / fingerprint / sample_id / (std::to_string(ordinal) + ".bin");
}

std::optional<std::vector<float>> EmbeddingCache::get(const std::string& sample_id, std::size_t ordinal,
                                                      const std::string& fingerprint) const {
    const auto path = record_path(sample_id, ordinal, fingerprint);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        if (!binio::read_magic(in, "BEAC")) fail(ErrorKind::Parse, "bad magic");
        const auto version = binio::read_le<std::uint8_t>(in);
        if (version != kVersion) fail(ErrorKind::Parse, "unsupported version " + std::to_string(version));
        std::vector<float> values(kEmbeddingDim);
        binio::read_f32(in, values);
        if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Parse, "trailing bytes");
        for (float x : values) {
            if (!std::isfinite(x)) fail(ErrorKind::Parse, "non-finite value");
        }
        return values;
    } catch (const Error& e) {
        spdlog::warn("ignoring corrupt cache record {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

void EmbeddingCache::put(const std::string& sample_id, std::size_t ordinal, const std::string& fingerprint,
                         std::span<const float> values) const {
    if (values.size() != kEmbeddingDim) fail(ErrorKind::InvalidArgument, "cache put: embedding must have 768 values");
    std::ostringstream out(std::ios::binary);
    binio::write_magic(out, "BEAC");
    binio::write_le<std::uint8_t>(out, kVersion);
    binio::write_f32(out, values);
    write_file_atomic(record_path(sample_id, ordinal, fingerprint), out.str());
}

void EmbeddingCache::drop_sample(const std::string& sample_id, const std::string& fingerprint) const {
    std::error_code ec;
    fs::remove_all(root_ / fingerprint / sample_id, ec);
}

std::vector<ChunkEmbedding> embed_sample(EmbeddingProvider& provider, const EmbeddingCache* cache,
                                         const std::vector<Chunk>& chunks) {
    const std::string fp = provider.fingerprint();
    std::vector<ChunkEmbedding> out(chunks.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& c = chunks[i];
        if (c.ordinal != i) fail(ErrorKind::SampleFailed, "sample " + c.sample_id + ": chunk ordinals are not contiguous");
        out[i].sample_id = c.sample_id;
        out[i].ordinal = c.ordinal;
        if (cache) {
            if (auto hit = cache->get(c.sample_id, c.ordinal, fp)) {
                out[i].values = std::move(*hit);
                continue;
            }
        }
        misses.push_back(i);
    }

    const std::size_t batch = std::max<std::size_t>(provider.batch_size(), 1);
    for (std::size_t start = 0; start < misses.size(); start += batch) {
        const std::size_t end = std::min(misses.size(), start + batch);
        std::vector<std::string> texts;
        for (std::size_t m = start; m < end; ++m) texts.push_back(chunks[misses[m]].text);
        std::vector<std::vector<float>> vectors;
        try {
            vectors = batch == 1 ? std::vector<std::vector<float>>{provider.embed(texts.front())} : provider.embed_batch(texts);
            if (vectors.size() != texts.size()) fail(ErrorKind::Protocol, "provider returned a short batch");
            for (const auto& v : vectors) check_embedding(v);
        } catch (const Error& e) {
            const auto& first = chunks[misses[start]];
            throw Error(ErrorKind::SampleFailed,
                        "sample " + first.sample_id + " failed at chunk " + std::to_string(first.ordinal) + ": " + e.what());
        }
        for (std::size_t m = start; m < end; ++m) {
            auto& slot = out[misses[m]];
            slot.values = std::move(vectors[m - start]);
            if (cache) cache->put(slot.sample_id, slot.ordinal, fp, slot.values);
        }
    }
    return out;
}

std::optional<std::vector<ChunkEmbedding>> load_cached_sample(const EmbeddingCache& cache, const std::string& sample_id,
                                                              std::size_t n_chunks, const std::string& fingerprint) {
    std::vector<ChunkEmbedding> out;
    out.reserve(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) {
        auto v = cache.get(sample_id, i, fingerprint);
        if (!v) return std::nullopt;
        out.push_back(ChunkEmbedding{sample_id, i, std::move(*v)});
    }
    return out;
}

}  // namespace beacon
