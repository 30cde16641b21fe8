#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "semqa/error.hpp"

namespace semqa::bin {

// Little-endian encode/decode helpers used by the params and index file
// formats. Byte-composed rather than memcpy'd so the on-disk layout does
// not depend on host endianness.

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_bytes(std::string& out, std::string_view bytes) { out.append(bytes); }

/// Sequential reader over an in-memory buffer. Any read past the end
/// throws a truncation error naming the requesting context.
class Reader {
  public:
    Reader(std::string_view buf, std::string context) : buf_(buf), context_(std::move(context)) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(raw(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }
    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(buf_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

    void expect_end() const {
        if (pos_ != buf_.size()) {
            throw Error(context_ + ": trailing bytes after payload");
        }
    }

  private:
    std::uint64_t raw(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw Error(context_ + ": truncated file");
    }

    std::string_view buf_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace semqa::bin
