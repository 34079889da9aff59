#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ism/core.hpp"

namespace ism::test {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("ism_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

private:
  static unsigned& counter() {
    static unsigned c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Minimal multi-page TIFF writer: one strip per page, no compression.
/// sample_format 1 = unsigned, 3 = IEEE float.
inline void write_tiff(const std::filesystem::path& path, const std::vector<Image>& pages, int bits, int sample_format,
                       bool little_endian = true) {
  std::string b;
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<char>((v >> (8 * (little_endian ? i : n - 1 - i))) & 0xff));
  };
  auto patch32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * (little_endian ? i : 3 - i))) & 0xff);
  };
  b += little_endian ? "II" : "MM";
  put(42, 2);
  std::size_t next_slot = b.size();
  put(0, 4);
  for (const auto& img : pages) {
    const std::size_t data_at = b.size();
    for (double v : img.values()) {
      if (sample_format == 3 && bits == 32) {
        float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put(u, 4);
      } else if (sample_format == 3 && bits == 64) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        put(u, 8);
      } else {
        put(static_cast<std::uint64_t>(v), bits / 8);
      }
    }
    const std::size_t nbytes = b.size() - data_at;
    if (b.size() % 2) b.push_back(0);
    const std::size_t ifd_at = b.size();
    patch32(next_slot, static_cast<std::uint32_t>(ifd_at));
    struct Tag {
      int tag, type;
      std::uint32_t value;
    };
    const std::vector<Tag> tags{{256, 4, static_cast<std::uint32_t>(img.nx())},
                                {257, 4, static_cast<std::uint32_t>(img.ny())},
                                {258, 3, static_cast<std::uint32_t>(bits)},
                                {259, 3, 1},
                                {262, 3, 1},
                                {273, 4, static_cast<std::uint32_t>(data_at)},
                                {277, 3, 1},
                                {278, 4, static_cast<std::uint32_t>(img.ny())},
                                {279, 4, static_cast<std::uint32_t>(nbytes)},
                                {339, 3, static_cast<std::uint32_t>(sample_format)}};
    put(tags.size(), 2);
    for (const auto& t : tags) {
      put(static_cast<std::uint64_t>(t.tag), 2);
      put(static_cast<std::uint64_t>(t.type), 2);
      put(1, 4);
      if (t.type == 3) {
        put(t.value, 2);
        put(0, 2);
      } else {
        put(t.value, 4);
      }
    }
    next_slot = b.size();
    put(0, 4);
  }
  std::ofstream(path, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace ism::test
