#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "beacon/remote_provider.hpp"

#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "beacon/error.hpp"

namespace beacon {

Endpoint parse_endpoint(const std::string& url) {
    Endpoint ep;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::Config, "provider.endpoint: missing scheme in '" + url + "'");
    ep.scheme = url.substr(0, scheme_end);
    if (ep.scheme != "http" && ep.scheme != "https") fail(ErrorKind::Config, "provider.endpoint: unsupported scheme '" + ep.scheme + "'");
    const auto rest = url.substr(scheme_end + 3);
    const auto slash = rest.find('/');
    const std::string authority = rest.substr(0, slash);
    ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        ep.host = authority.substr(0, colon);
        try {
            ep.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            fail(ErrorKind::Config, "provider.endpoint: bad port in '" + url + "'");
        }
    } else {
        ep.host = authority;
        ep.port = ep.scheme == "https" ? 443 : 80;
    }
    if (ep.host.empty()) fail(ErrorKind::Config, "provider.endpoint: missing host in '" + url + "'");
    return ep;
}

std::string encode_embed_request(std::span<const std::string> texts) {
    nlohmann::json body;
    auto& instances = body["instances"] = nlohmann::json::array();
    for (const auto& t : texts) instances.push_back({{"content", t}});
    return body.dump();
}

std::vector<std::vector<float>> decode_embed_response(const std::string& body, std::size_t expected) {
    std::vector<std::vector<float>> out;
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& predictions = j.at("predictions");
        if (!predictions.is_array() || predictions.size() != expected) {
            fail(ErrorKind::Protocol, "response carries " + std::to_string(predictions.size()) + " predictions, expected " +
                                          std::to_string(expected));
        }
        for (const auto& p : predictions) {
            const auto& values = p.at("embeddings").at("values");
            if (!values.is_array()) fail(ErrorKind::Protocol, "embeddings.values is not an array");
            std::vector<float> v;
            v.reserve(values.size());
            for (const auto& x : values) {
                if (!x.is_number()) fail(ErrorKind::Protocol, "embeddings.values holds a non-number");
                v.push_back(x.get<float>());
            }
            if (v.size() != kEmbeddingDim) {
                fail(ErrorKind::Protocol, "embedding has " + std::to_string(v.size()) + " values, expected 768");
            }
            out.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Protocol, std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

RemoteProvider::RemoteProvider(ProviderConfig cfg, Sleeper sleeper)
    : cfg_(std::move(cfg)), sleeper_(std::move(sleeper)) {
    cfg_.validate();
    endpoint_ = parse_endpoint(cfg_.endpoint);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RemoteProvider::fingerprint() const {
    return provider_fingerprint(ProviderKind::Remote, cfg_.model.empty() ? cfg_.endpoint : cfg_.model, 0);
}

std::vector<float> RemoteProvider::embed(std::string_view text) {
    const std::string t(text);
    return std::move(post_with_retry(std::span<const std::string>(&t, 1)).front());
}

std::vector<std::vector<float>> RemoteProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out;
    for (std::size_t start = 0; start < texts.size(); start += cfg_.batch_size) {
        const auto n = std::min(cfg_.batch_size, texts.size() - start);
        for (auto& v : post_with_retry(texts.subspan(start, n))) out.push_back(std::move(v));
    }
    return out;
}

void RemoteProvider::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
    ++in_flight_;
}

void RemoteProvider::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

// Full jitter: uniform in [0, base * 2^attempt].
std::chrono::milliseconds RemoteProvider::backoff(std::size_t attempt) {
    const double cap = static_cast<double>(cfg_.backoff_base.count()) * std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(attempt, 30)));
    std::lock_guard lock(mu_);
    return std::chrono::milliseconds(static_cast<long long>(jitter_.uniform() * cap));
}

std::vector<std::vector<float>> RemoteProvider::post_with_retry(std::span<const std::string> texts) {
    const std::string body = encode_embed_request(texts);
    httplib::Headers headers;
    if (!cfg_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.auth_token);

    std::string last_error;
    for (std::size_t attempt = 0;; ++attempt) {
        httplib::Result res{nullptr, httplib::Error::Unknown};
        acquire();
        try {
            httplib::Client client(endpoint_.scheme + "://" + endpoint_.host + ":" + std::to_string(endpoint_.port));
            const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count();
            client.set_connection_timeout(std::max<long long>(secs / 6, 1), 0);
            client.set_read_timeout(std::max<long long>(secs, 1), 0);
            res = client.Post(endpoint_.path, headers, body, "application/json");
        } catch (...) {
            release();
            throw;
        }
        release();
        count_calls(texts.size());

        bool retryable = false;
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status == 200) {
            return decode_embed_response(res->body, texts.size());
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            retryable = true;
        } else {
            fail(ErrorKind::ProviderUnavailable, "embedding endpoint rejected the request: HTTP " + std::to_string(res->status));
        }

        if (!retryable || attempt >= cfg_.max_retries) break;
        const auto wait = backoff(attempt);
        spdlog::debug("embedding request failed ({}), retry {}/{} in {} ms", last_error, attempt + 1, cfg_.max_retries, wait.count());
        sleeper_(wait);
    }
    fail(ErrorKind::ProviderUnavailable, "embedding endpoint unavailable after " + std::to_string(cfg_.max_retries) +
                                             " retries: " + last_error);
}

}  // namespace beacon
