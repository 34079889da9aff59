#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ism/container.hpp"
#include "ism/core.hpp"
#include "ism/dataset.hpp"
#include "ism/image_io.hpp"
#include "ism/optics.hpp"

namespace ism {

/// One decoded page of a grayscale TIFF.
struct TiffPage {
  Image image;
  bool integer = true;  // integer sample format (counts) vs floating point
  int bits = 0;
};

namespace detail {

class TiffReader {
public:
  TiffReader(std::string bytes, std::string name) : b_(std::move(bytes)), name_(std::move(name)) {
    if (b_.size() < 8) fail("file too short for a TIFF header");
    if (b_[0] == 'I' && b_[1] == 'I')
      le_ = true;
    else if (b_[0] == 'M' && b_[1] == 'M')
      le_ = false;
    else
      fail("not a TIFF file");
    if (u(2, 2) != 42) fail("unsupported TIFF variant (BigTIFF is not read)");
  }

  std::vector<TiffPage> pages() {
    std::vector<TiffPage> out;
    std::uint64_t ifd = u(4, 4);
    std::size_t guard = 0;
    while (ifd != 0) {
      if (++guard > 100000) fail("IFD chain does not terminate");
      out.push_back(page(ifd, ifd));
    }
    if (out.empty()) fail("no image pages");
    return out;
  }

private:
  [[noreturn]] void fail(const std::string& what) const { throw IoError("'" + name_ + "': " + what); }

  std::uint64_t u(std::uint64_t off, int n) const {
    if (off + static_cast<std::uint64_t>(n) > b_.size()) fail("offset beyond end of file");
    std::uint64_t v = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(b_.data() + off);
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[le_ ? i : n - 1 - i]) << (8 * i);
    return v;
  }

  // Values of one IFD entry (types BYTE, SHORT, LONG).
  std::vector<std::uint64_t> entry_values(std::uint64_t e) const {
    const auto type = u(e + 2, 2);
    const auto count = u(e + 4, 4);
    int w = 0;
    switch (type) {
      case 1: w = 1; break;
      case 3: w = 2; break;
      case 4: w = 4; break;
      default: return {};
    }
    const std::uint64_t base = count * static_cast<std::uint64_t>(w) <= 4 ? e + 8 : u(e + 8, 4);
    std::vector<std::uint64_t> v;
    for (std::uint64_t i = 0; i < count; ++i) v.push_back(u(base + i * static_cast<std::uint64_t>(w), w));
    return v;
  }

  TiffPage page(std::uint64_t off, std::uint64_t& next) const {
    const auto n = u(off, 2);
    std::map<std::uint64_t, std::vector<std::uint64_t>> tags;
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t e = off + 2 + 12 * i;
      tags[u(e, 2)] = entry_values(e);
    }
    next = u(off + 2 + 12 * n, 4);
    auto one = [&](std::uint64_t tag, std::uint64_t dflt) {
      auto it = tags.find(tag);
      return it == tags.end() || it->second.empty() ? dflt : it->second.front();
    };
    const auto width = one(256, 0), height = one(257, 0);
    if (width == 0 || height == 0) fail("page without image dimensions");
    if (one(259, 1) != 1) fail("compressed TIFF pages are not supported");
    if (one(277, 1) != 1) fail("only single-sample (grayscale) pages are supported");
    const auto bits = static_cast<int>(one(258, 1));
    const auto fmt = one(339, 1);
    if (!tags.count(273) || !tags.count(279)) fail("page without strip offsets");
    const auto& offs = tags.at(273);
    const auto& counts = tags.at(279);
    if (offs.size() != counts.size()) fail("strip offset and byte-count tables differ in length");

    TiffPage pg;
    pg.bits = bits;
    pg.integer = fmt != 3;
    if (fmt == 3 && bits != 32 && bits != 64) fail("floating-point pages must be 32 or 64 bit");
    if (fmt != 3 && bits != 8 && bits != 16 && bits != 32) fail("integer pages must be 8, 16 or 32 bit");
    const int w = bits / 8;
    pg.image = Image(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
    std::size_t idx = 0;
    for (std::size_t s = 0; s < offs.size() && idx < pg.image.size(); ++s) {
      for (std::uint64_t p = offs[s]; p + static_cast<std::uint64_t>(w) <= offs[s] + counts[s] && idx < pg.image.size();
           p += static_cast<std::uint64_t>(w)) {
        const std::uint64_t raw = u(p, w);
        double v;
        if (fmt == 3)
          v = w == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw))) : std::bit_cast<double>(raw);
        else if (fmt == 2)
          v = w == 1 ? static_cast<std::int8_t>(raw) : w == 2 ? static_cast<std::int16_t>(raw) : static_cast<std::int32_t>(raw);
        else
          v = static_cast<double>(raw);
        pg.image[idx++] = v;
      }
    }
    if (idx != pg.image.size()) fail("strips hold fewer samples than the page dimensions");
    return pg;
  }

  std::string b_;
  std::string name_;
  bool le_ = true;
};

}  // namespace detail

/// Uncompressed baseline TIFF pages (8/16/32-bit integer, 32/64-bit float), either byte order.
inline std::vector<TiffPage> read_tiff(const std::filesystem::path& path) {
  return detail::TiffReader(detail::read_all(path), path.string()).pages();
}

/// One page per detector channel. `grid` supplies the scan steps; its ny/nx must match
/// the pages or be zero to take them from the file. Integer pages become counts.
inline Container import_tiff_stack(const std::filesystem::path& path, ScanGrid grid, const DetectorMap& detector) {
  const auto pages = read_tiff(path);
  if (pages.size() != detector.channels())
    throw ValidationError("'" + path.string() + "' holds " + std::to_string(pages.size()) + " pages but the detector has " +
                          std::to_string(detector.channels()) + " channels");
  const std::size_t ny = pages.front().image.ny(), nx = pages.front().image.nx();
  bool integer = true;
  for (const auto& p : pages) {
    if (p.image.ny() != ny || p.image.nx() != nx) throw ValidationError("'" + path.string() + "' has pages of different shapes");
    integer = integer && p.integer;
  }
  if (grid.ny == 0 && grid.nx == 0) {
    grid.ny = ny;
    grid.nx = nx;
  }
  if (grid.ny != ny || grid.nx != nx) throw ValidationError("declared scan grid does not match the page shape");
  IsmDataset d;
  d.grid = grid;
  d.detector = detector;
  d.dtype = integer ? DataType::counts : DataType::intensity;
  for (const auto& p : pages) d.channels.push_back(p.image);
  d.provenance = {{"source", "tiff"}, {"file", path.filename().string()}, {"bits", pages.front().bits}};
  return to_container(d);
}

}  // namespace ism
