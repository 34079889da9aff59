#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ism/core.hpp"

namespace ism {

/// Failure while reading or writing a file; the message carries the path.
class IoError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Reads a binary (P5) or plain (P2) grayscale PGM, 8- or 16-bit.
inline Image read_pgm(const std::filesystem::path& path) {
  const std::string raw = detail::read_all(path);
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    for (;;) {
      while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
      if (pos < raw.size() && raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::size_t start = pos;
    while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    return raw.substr(start, pos - start);
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw IoError("'" + path.string() + "' is not a grayscale PGM");
  std::size_t w = 0, h = 0;
  unsigned long maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw IoError("'" + path.string() + "' has a malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw IoError("'" + path.string() + "' has a malformed PGM header");
  Image img(h, w);
  if (magic == "P2") {
    for (std::size_t i = 0; i < img.size(); ++i) {
      std::string t = token();
      if (t.empty()) throw IoError("'" + path.string() + "' ends before all pixels were read");
      img[i] = std::stod(t);
    }
    return img;
  }
  ++pos;  // single whitespace after maxval
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (raw.size() < pos + img.size() * bpp) throw IoError("'" + path.string() + "' ends before all pixels were read");
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data() + pos + i * bpp);
    img[i] = bpp == 1 ? p[0] : static_cast<double>((p[0] << 8) | p[1]);  // PGM is big-endian
  }
  return img;
}

/// Reads a comma- or whitespace-separated grid of numbers, one image row per line.
inline Image read_csv_image(const std::filesystem::path& path) {
  std::istringstream in(detail::read_all(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw IoError("'" + path.string() + "' contains a non-numeric cell '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path.string() + "' holds no data");
  Image img(rows.size(), rows.front().size());
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != img.nx()) throw IoError("'" + path.string() + "' has rows of unequal length");
    for (std::size_t x = 0; x < img.nx(); ++x) img(y, x) = rows[y][x];
  }
  return img;
}

/// Dispatches on extension: .pgm is read as PGM, anything else as CSV.
inline Image read_grayscale(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".pgm" ? read_pgm(path) : read_csv_image(path);
}

}  // namespace ism
