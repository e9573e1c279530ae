// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte packing shared by the dataset and model containers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace limfb::detail {

class ByteWriter {
  public:
    void put_bytes(std::string_view s);
    void put_u8(std::uint8_t v);
    void put_u16(std::uint16_t v);
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f32(float v);
    void put_f64(double v);

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    void write_to(const std::filesystem::path& path) const;

  private:
    void put_le(std::uint64_t v, int width);
    std::vector<std::uint8_t> buf_;
};

/// Thrown by ByteReader when the buffer ends before a requested field.
class ShortRead : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}
    static ByteReader from_file(const std::filesystem::path& path);

    std::string get_bytes(std::size_t n);
    std::uint8_t get_u8();
    std::uint16_t get_u16();
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32();
    double get_f64();

    std::size_t remaining() const { return buf_.size() - pos_; }

  private:
    std::uint64_t get_le(int width);
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

} // namespace limfb::detail
