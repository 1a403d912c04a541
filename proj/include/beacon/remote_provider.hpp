#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>

#include "beacon/embed.hpp"
#include "beacon/rng.hpp"

namespace beacon {

struct Endpoint {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path;    // starts with '/'
};

Endpoint parse_endpoint(const std::string& url);

// Wire protocol:
//   POST {endpoint}  Authorization: Bearer <token>
//   {"instances":[{"content":"..."}, ...]}
//   -> {"predictions":[{"embeddings":{"values":[...768 floats...]}}, ...]}
std::string encode_embed_request(std::span<const std::string> texts);
std::vector<std::vector<float>> decode_embed_response(const std::string& body, std::size_t expected);

class RemoteProvider final : public EmbeddingProvider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit RemoteProvider(ProviderConfig cfg, Sleeper sleeper = {});

    std::vector<float> embed(std::string_view text) override;
    std::vector<std::vector<float>> embed_batch(std::span<const std::string> texts) override;
    std::string fingerprint() const override;
    std::size_t batch_size() const override { return cfg_.batch_size; }

private:
    std::vector<std::vector<float>> post_with_retry(std::span<const std::string> texts);
    std::chrono::milliseconds backoff(std::size_t attempt);
    void acquire();
    void release();

    ProviderConfig cfg_;
    Endpoint endpoint_;
    Sleeper sleeper_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    Rng jitter_{0x6a177e5ULL};
};

}  // namespace beacon
