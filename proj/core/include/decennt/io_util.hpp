#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decennt/tensor.hpp"

namespace decennt {

// All outputs go through write-then-rename so an interrupted run never
// leaves a truncated artifact at the final path.
void atomic_write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
void atomic_write_text(const std::string& path, const std::string& text);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

// FNV-1a over a canonical text rendering; embedded in every artifact.
std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);

// 17-significant-digit rendering, enough to round-trip any double.
std::string format_full(double v);

// CSV matrix with a leading `#` header line carrying the direction
// convention plus config hash and seed.
std::string matrix_csv(const Matrix& m, const std::string& header_comment);
std::string vector_csv(const std::vector<double>& v, const std::string& header_comment);

// Little-endian scalar packing for the binary formats.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    bool exhausted() const { return pos_ >= size_; }
    std::size_t remaining() const { return size_ - pos_; }
    std::size_t position() const { return pos_; }

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    double f64();
    void bytes(std::uint8_t* dst, std::size_t n);

private:
    void need(std::size_t n) const;
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace decennt
