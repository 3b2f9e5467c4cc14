#pragma once

// Little-endian framing helpers shared by records.bin and the index format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <zlib.h>

namespace resrag::io {

static_assert(std::endian::native == std::endian::little, "big-endian hosts need byte swapping");

struct Truncated : std::runtime_error
{
  Truncated()
    : std::runtime_error("unexpected end of data")
  {
  }
};

class Writer
{
public:
  template <typename T> void pod(T v)
  {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<char const *>(&v), sizeof(T));
  }
  void bytes(void const *p, std::size_t n) { buf_.append(static_cast<char const *>(p), n); }
  void str(std::string_view s)
  {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  std::string &buffer() { return buf_; }
  std::size_t size() const { return buf_.size(); }

private:
  std::string buf_;
};

class Reader
{
public:
  explicit Reader(std::string_view data)
    : data_(data)
  {
  }
  template <typename T> T pod()
  {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void *out, std::size_t n)
  {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string str()
  {
    auto const n = pod<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

private:
  void need(std::size_t n) const
  {
    if (n > data_.size() - pos_) { throw Truncated(); }
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32(std::string_view data)
{
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t off = 0;
  while (off < data.size()) {
    auto const n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<Bytef const *>(data.data() + off), n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string read_file(std::filesystem::path const &path);
void write_file_atomic(std::filesystem::path const &path, std::string_view data);

} // namespace resrag::io
