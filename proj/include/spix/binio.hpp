// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Little-endian byte buffers shared by the SPIP / SPIM / SPCK formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "spix/error.hpp"

namespace spix::binio {

class Writer {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& buffer() const noexcept { return buf_; }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError(path, "cannot open for writing");
        os.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!os) throw IoError(path, "write failed");
    }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}

    static Reader load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError(path, "cannot open for reading");
        return Reader(std::vector<char>(std::istreambuf_iterator<char>(is), {}));
    }

    std::uint64_t offset() const noexcept { return pos_; }
    std::uint64_t remaining() const noexcept { return buf_.size() - pos_; }

    void expect_magic(std::string_view magic) {
        need(magic.size(), "magic");
        if (std::string_view(buf_.data() + pos_, magic.size()) != magic) {
            throw FormatError(pos_, "bad magic, expected \"" + std::string(magic) + "\"");
        }
        pos_ += magic.size();
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(buf_[pos_++])} << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(buf_[pos_++])} << (8 * i);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    // Random access read that leaves the cursor untouched.
    double f64_at(std::uint64_t at) const {
        if (at > buf_.size() || buf_.size() - at < 8) throw FormatError(at, "truncated file while reading f64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(buf_[at + i])} << (8 * i);
        return std::bit_cast<double>(v);
    }

    void expect_end() const {
        if (pos_ != buf_.size()) throw FormatError(pos_, "trailing bytes after payload");
    }

private:
    void need(std::size_t n, const char* what) const {
        if (buf_.size() - pos_ < n) throw FormatError(pos_, std::string("truncated file while reading ") + what);
    }

    std::vector<char> buf_;
    std::uint64_t pos_ = 0;
};

// FNV-1a, used to fingerprint manifests inside checkpoints.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace spix::binio
