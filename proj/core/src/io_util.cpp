#include "decennt/io_util.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "decennt/error.hpp"

namespace decennt {

namespace fs = std::filesystem;

void atomic_write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error::io("cannot open for writing: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error::io("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error::io("rename failed for: " + path);
    }
}

void atomic_write_text(const std::string& path, const std::string& text) {
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    atomic_write_bytes(path, bytes);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string matrix_csv(const Matrix& m, const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) {
        out += "# " + header_comment + "\n";
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out += ',';
            out += format_full(m.at(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string vector_csv(const std::vector<double>& v, const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) {
        out += "# " + header_comment + "\n";
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_full(v[i]);
    }
    out += '\n';
    return out;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

void ByteReader::need(std::size_t n) const {
    if (pos_ + n > size_) throw Error::format("unexpected end of file");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

double ByteReader::f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
}

void ByteReader::bytes(std::uint8_t* dst, std::size_t n) {
    need(n);
    std::copy(data_ + pos_, data_ + pos_ + n, dst);
    pos_ += n;
}

}  // namespace decennt
