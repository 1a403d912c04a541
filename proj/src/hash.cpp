#include "beacon/hash.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <vector>

#include "beacon/error.hpp"

namespace beacon {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_update(std::uint64_t h, std::string_view data) noexcept {
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_sha256_ctx() {
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::State, "sha256: cannot initialise digest context");
    }
    return ctx;
}

Sha256Digest finish(EVP_MD_CTX* ctx) {
    Sha256Digest out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
        fail(ErrorKind::State, "sha256: digest finalisation failed");
    }
    return out;
}

}  // namespace

Sha256Digest sha256(std::string_view data) {
    auto ctx = new_sha256_ctx();
    EVP_DigestUpdate(ctx.get(), data.data(), data.size());
    return finish(ctx.get());
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    auto ctx = new_sha256_ctx();
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return to_hex(finish(ctx.get()));
}

std::string to_hex(const Sha256Digest& digest) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : digest) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

bool is_sha256_hex(std::string_view hex) noexcept {
    if (hex.size() != 64) return false;
    for (char c : hex) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

Sha256Digest from_hex(std::string_view hex) {
    if (!is_sha256_hex(hex)) fail(ErrorKind::Parse, "not a lowercase sha256 hex string: '" + std::string(hex) + "'");
    auto nibble = [](char c) -> std::uint8_t {
        return static_cast<std::uint8_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    };
    Sha256Digest out{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data) noexcept { return fnv_update(kFnvOffset, data); }

std::uint64_t fnv1a64_seeded(std::uint64_t seed, std::string_view data) noexcept {
    char le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
    return fnv_update(fnv_update(kFnvOffset, std::string_view(le, 8)), data);
}

}  // namespace beacon
