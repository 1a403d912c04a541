#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beacon/chunker.hpp"

namespace beacon {

inline constexpr std::size_t kEmbeddingDim = 768;

struct ChunkEmbedding {
    std::string sample_id;
    std::size_t ordinal = 0;
    std::vector<float> values;  // kEmbeddingDim finite entries
};

enum class ProviderKind { Local, Remote };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Local;
    std::string endpoint;     // remote: full URL of the prediction endpoint
    std::string model;        // remote: model identity for cache fingerprints (defaults to endpoint)
    std::string auth_token;   // remote: bearer token; normally taken from the environment
    std::size_t max_in_flight = 4;
    std::size_t max_retries = 5;
    std::chrono::milliseconds backoff_base{200};
    std::chrono::milliseconds timeout{60000};
    std::size_t batch_size = 1;
    std::uint64_t seed = 7;   // local only

    void validate() const;
    // Fills endpoint / auth_token from BEACON_EMBED_ENDPOINT / BEACON_EMBED_TOKEN when unset.
    void apply_environment();
};

// Maximal runs of ASCII alphanumerics.
std::vector<std::string_view> tokenize(std::string_view text);

// Signed feature hashing: each token adds sign(h) to bucket h mod 768, where
// h = fnv1a64_seeded(seed, token) and the sign is taken from bit 63 (set => -1).
// The result is L2-normalised; empty input gives the zero vector.
std::vector<double> local_embed(std::string_view text, std::uint64_t seed);

std::string provider_fingerprint(ProviderKind kind, std::string_view model_identity, std::uint64_t seed);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::vector<float> embed(std::string_view text) = 0;
    virtual std::vector<std::vector<float>> embed_batch(std::span<const std::string> texts);
    virtual std::string fingerprint() const = 0;
    virtual std::size_t batch_size() const { return 1; }

    // Number of texts sent to the underlying model so far.
    std::size_t calls() const noexcept { return calls_.load(); }

protected:
    void count_calls(std::size_t n) noexcept { calls_.fetch_add(n); }

private:
    std::atomic<std::size_t> calls_{0};
};

class LocalProvider final : public EmbeddingProvider {
public:
    explicit LocalProvider(std::uint64_t seed) : seed_(seed) {}

    std::vector<float> embed(std::string_view text) override;
    std::string fingerprint() const override;

private:
    std::uint64_t seed_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& cfg);

// Embed one chunk and validate the result (length 768, all finite).
std::vector<float> embed_chunk(EmbeddingProvider& provider, std::string_view text);

// One file per (fingerprint, sample, ordinal):
//   <root>/<fingerprint>/<sample_id>/<ordinal>.bin
//   = "BEAC", version byte, 768 little-endian float32.
class EmbeddingCache {
public:
    static constexpr std::uint8_t kVersion = 1;

    explicit EmbeddingCache(std::filesystem::path root);

    std::optional<std::vector<float>> get(const std::string& sample_id, std::size_t ordinal,
                                          const std::string& fingerprint) const;
    void put(const std::string& sample_id, std::size_t ordinal, const std::string& fingerprint,
             std::span<const float> values) const;
    void drop_sample(const std::string& sample_id, const std::string& fingerprint) const;

    std::filesystem::path record_path(const std::string& sample_id, std::size_t ordinal,
                                      const std::string& fingerprint) const;
    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

// All-or-nothing: returns one embedding per chunk in ordinal order or throws
// ErrorKind::SampleFailed. Successful chunks may remain in the cache.
std::vector<ChunkEmbedding> embed_sample(EmbeddingProvider& provider, const EmbeddingCache* cache,
                                         const std::vector<Chunk>& chunks);

// Cache-only read of a sample's embeddings; nullopt if any ordinal is missing.
std::optional<std::vector<ChunkEmbedding>> load_cached_sample(const EmbeddingCache& cache, const std::string& sample_id,
                                                              std::size_t n_chunks, const std::string& fingerprint);

}  // namespace beacon
