// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace limfb::detail {

void ByteWriter::put_le(std::uint64_t v, int width)
{
    for (int i = 0; i < width; ++i)
        buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

void ByteWriter::put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
void ByteWriter::put_u8(std::uint8_t v) { buf_.push_back(v); }
void ByteWriter::put_u16(std::uint16_t v) { put_le(v, 2); }
void ByteWriter::put_u32(std::uint32_t v) { put_le(v, 4); }
void ByteWriter::put_u64(std::uint64_t v) { put_le(v, 8); }
void ByteWriter::put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }
void ByteWriter::put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

void ByteWriter::write_to(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out)
        throw std::runtime_error("write to '" + path.string() + "' failed");
}

ByteReader ByteReader::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data));
}

std::uint64_t ByteReader::get_le(int width)
{
    if (remaining() < static_cast<std::size_t>(width))
        throw ShortRead("unexpected end of data");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
        v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
}

std::string ByteReader::get_bytes(std::size_t n)
{
    if (remaining() < n)
        throw ShortRead("unexpected end of data");
    std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
}

std::uint8_t ByteReader::get_u8() { return static_cast<std::uint8_t>(get_le(1)); }
std::uint16_t ByteReader::get_u16() { return static_cast<std::uint16_t>(get_le(2)); }
std::uint32_t ByteReader::get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
std::uint64_t ByteReader::get_u64() { return get_le(8); }
float ByteReader::get_f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4))); }
double ByteReader::get_f64() { return std::bit_cast<double>(get_le(8)); }

} // namespace limfb::detail
