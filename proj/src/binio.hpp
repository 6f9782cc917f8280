#pragma once

// Little-endian binary encoding and atomic file writes, shared by the
// archive/model/tree serializers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "radseq/errors.hpp"

namespace radseq::binio {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t len) {
        buf_.append(static_cast<const char*>(p), len);
    }

    const std::string& buffer() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    template <class T>
    void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& data, std::string what)
        : data_(data), what_(std::move(what)) {}

    std::uint64_t offset() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

    std::string str(std::size_t len) {
        const char* p = take(len);
        return std::string(p, len);
    }

    void require_end() const {
        if (!at_end()) {
            throw ParseError(what_ + ": trailing bytes after end of content at offset " +
                                 std::to_string(pos_),
                             pos_);
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(what_ + ": " + msg + " at offset " + std::to_string(pos_), pos_);
    }

    [[noreturn]] void fail_at(const std::string& msg, std::uint64_t at) const {
        throw ParseError(what_ + ": " + msg + " at offset " + std::to_string(at), at);
    }

private:
    const char* take(std::size_t len) {
        if (data_.size() - pos_ < len) {
            throw ParseError(what_ + ": truncated, needed " + std::to_string(len) +
                                 " bytes at offset " + std::to_string(pos_),
                             pos_);
        }
        const char* p = data_.data() + pos_;
        pos_ += len;
        return p;
    }

    template <class T>
    T get_le() {
        const char* p = take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
        }
        return v;
    }

    const std::string& data_;
    std::string what_;
    std::size_t pos_ = 0;
};

/// Reads a whole file; throws ParseError (offset 0) if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes content to a temporary file in the target directory, then renames it
/// over the destination, so interrupted writes never leave partial artifacts.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace radseq::binio
