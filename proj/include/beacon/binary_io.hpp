#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "beacon/error.hpp"

// Little-endian helpers shared by the cache, vector and model file formats.
namespace beacon::binio {

template <typename U>
void write_le(std::ostream& out, U value) {
    static_assert(std::is_unsigned_v<U>);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(buf, sizeof(U));
}

template <typename U>
U read_le(std::istream& in) {
    static_assert(std::is_unsigned_v<U>);
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) fail(ErrorKind::Parse, "unexpected end of binary stream");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
    return value;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline bool read_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4];
    if (!in.read(buf, 4)) return false;
    return std::memcmp(buf, magic, 4) == 0;
}

inline void write_f32(std::ostream& out, std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (float v : values) write_le(out, std::bit_cast<std::uint32_t>(v));
    }
}

inline void read_f32(std::istream& in, std::span<float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
            fail(ErrorKind::Parse, "unexpected end of float32 payload");
        }
    } else {
        for (float& v : values) v = std::bit_cast<float>(read_le<std::uint32_t>(in));
    }
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t max_len = 1 << 24) {
    const auto len = read_le<std::uint32_t>(in);
    if (len > max_len) fail(ErrorKind::Parse, "string length " + std::to_string(len) + " exceeds limit");
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) fail(ErrorKind::Parse, "unexpected end of string payload");
    return s;
}

}  // namespace beacon::binio
