#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cog3d/types.hpp"

// Little-endian buffer codecs shared by the on-disk formats. Writers append to
// a byte vector; the reader tracks its offset so format errors can report the
// exact byte position.

namespace cog3d::detail {

inline void put_u8(std::vector<uint8_t>& buf, uint8_t v) { buf.push_back(v); }

inline void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    buf.push_back(uint8_t(v));
    buf.push_back(uint8_t(v >> 8));
    buf.push_back(uint8_t(v >> 16));
    buf.push_back(uint8_t(v >> 24));
}

inline void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
    put_u32(buf, uint32_t(v));
    put_u32(buf, uint32_t(v >> 32));
}

inline void put_f32(std::vector<uint8_t>& buf, float v) {
    put_u32(buf, std::bit_cast<uint32_t>(v));
}

inline void put_f64(std::vector<uint8_t>& buf, double v) {
    put_u64(buf, std::bit_cast<uint64_t>(v));
}

inline void put_f32_array(std::vector<uint8_t>& buf, const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_f32(buf, data[i]);
}

class Reader {
public:
    Reader(const uint8_t* data, std::size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    void require(std::size_t n) const {
        if (pos_ + n > size_)
            throw FormatError(what_ + ": truncated, need " + std::to_string(n) + " more bytes",
                              size_);
    }

    uint8_t u8() {
        require(1);
        return data_[pos_++];
    }

    uint32_t u32() {
        require(4);
        const uint32_t v = uint32_t(data_[pos_]) | uint32_t(data_[pos_ + 1]) << 8 |
                           uint32_t(data_[pos_ + 2]) << 16 | uint32_t(data_[pos_ + 3]) << 24;
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        const uint64_t lo = u32();
        const uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void f32_array(float* dst, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = f32();
    }

    void bytes(uint8_t* dst, std::size_t n) {
        require(n);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg, pos_); }

private:
    const uint8_t* data_;
    std::size_t size_;
    std::string what_;
    std::size_t pos_ = 0;
};

// CRC-32 (IEEE 802.3, reflected 0xEDB88320), the usual table-driven form.
uint32_t crc32(const uint8_t* data, std::size_t n);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace cog3d::detail
