#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ism/core.hpp"
#include "ism/dataset.hpp"
#include "ism/fft.hpp"
#include "ism/optics.hpp"
#include "ism/random.hpp"

namespace ism {

enum class PhantomKind { point_sources, line_pairs, siemens_star, imported };

inline std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::point_sources: return "point_sources";
    case PhantomKind::line_pairs: return "line_pairs";
    case PhantomKind::siemens_star: return "siemens_star";
    case PhantomKind::imported: return "imported";
  }
  return "?";
}

inline PhantomKind phantom_kind_from_string(std::string s) {
  for (auto& c : s)
    if (c == '-') c = '_';
  if (s == "point_sources") return PhantomKind::point_sources;
  if (s == "line_pairs") return PhantomKind::line_pairs;
  if (s == "siemens_star") return PhantomKind::siemens_star;
  if (s == "imported") return PhantomKind::imported;
  throw ValidationError("unknown phantom kind '" + s + "'");
}

struct PhantomParams {
  // point_sources: explicit positions (nm from the grid centre). When empty, `count`
  // random positions are drawn from `seed`; with count == 0 a single central point.
  std::vector<Vec2> points_nm;
  std::size_t count = 0;
  double margin_nm = 0.0;
  // line_pairs: two parallel vertical lines `spacing_nm` apart, `line_length_nm` long.
  double spacing_nm = 150.0;
  double line_length_nm = 1000.0;
  // siemens_star
  int spokes = 8;
  double radius_nm = 0.0;  // 0 selects 40% of the smaller field extent
  // Photon budget: each unit of raster value receives this many photons unless
  // total_photons overrides the whole budget.
  double photons_per_emitter = 1e4;
  std::optional<double> total_photons;
  std::uint64_t seed = 0;
};

/// Ground-truth object o(x_s), scaled to its expected photon budget.
struct Phantom {
  Image image;
  ScanGrid grid;
  PhantomKind kind = PhantomKind::point_sources;
  double total_photons = 0.0;
};

namespace detail {

inline Phantom finish_phantom(Image raw, const ScanGrid& grid, PhantomKind kind, const PhantomParams& p) {
  for (double v : raw.values())
    if (!(v >= 0.0)) throw ValidationError("phantom values must be non-negative");
  const double raw_sum = raw.sum();
  if (!(raw_sum > 0.0)) throw ValidationError("phantom parameters produce an empty image");
  const double budget = p.total_photons.value_or(p.photons_per_emitter * raw_sum);
  if (!(budget > 0.0)) throw ValidationError("photon budget must be positive");
  raw *= budget / raw_sum;
  return {std::move(raw), grid, kind, budget};
}

inline long long nearest_index(double coord_nm, double step, std::size_t center) {
  return static_cast<long long>(std::llround(coord_nm / step)) + static_cast<long long>(center);
}

}  // namespace detail

inline Phantom make_phantom(PhantomKind kind, const ScanGrid& grid, const PhantomParams& p = {}) {
  grid.validate();
  Image img(grid.ny, grid.nx);
  switch (kind) {
    case PhantomKind::point_sources: {
      std::vector<Vec2> pts = p.points_nm;
      if (pts.empty() && p.count == 0) pts.push_back({});
      if (pts.empty()) {
        const double hy = 0.5 * static_cast<double>(grid.ny - 1) * grid.step_y - p.margin_nm;
        const double hx = 0.5 * static_cast<double>(grid.nx - 1) * grid.step_x - p.margin_nm;
        if (hy < 0.0 || hx < 0.0) throw ValidationError("margin leaves no room for point sources");
        for (std::size_t i = 0; i < p.count; ++i) {
          CounterRng rng(p.seed, i);
          pts.push_back({(2.0 * rng.uniform() - 1.0) * hy, (2.0 * rng.uniform() - 1.0) * hx});
        }
      }
      for (auto pt : pts) {
        long long y = detail::nearest_index(pt.y, grid.step_y, grid.center_y());
        long long x = detail::nearest_index(pt.x, grid.step_x, grid.center_x());
        if (y < 0 || x < 0 || y >= static_cast<long long>(grid.ny) || x >= static_cast<long long>(grid.nx))
          throw ValidationError("point source lies outside the scan grid");
        img(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += 1.0;
      }
      break;
    }
    case PhantomKind::line_pairs: {
      if (!(p.spacing_nm > 0.0) || !(p.line_length_nm > 0.0)) throw ValidationError("line spacing and length must be positive");
      for (double offset : {-0.5 * p.spacing_nm, 0.5 * p.spacing_nm}) {
        // Split each line between the two nearest columns so sub-pixel spacings survive rasterisation.
        const double u = offset / grid.step_x + static_cast<double>(grid.center_x());
        const double fl = std::floor(u);
        const double w = u - fl;
        for (std::size_t y = 0; y < grid.ny; ++y) {
          if (std::abs(grid.coord_y(y)) > 0.5 * p.line_length_nm) continue;
          for (auto [col, weight] : {std::pair{fl, 1.0 - w}, std::pair{fl + 1.0, w}}) {
            if (weight <= 0.0 || col < 0.0 || col >= static_cast<double>(grid.nx)) continue;
            img(y, static_cast<std::size_t>(col)) += weight;
          }
        }
      }
      break;
    }
    case PhantomKind::siemens_star: {
      if (p.spokes < 1) throw ValidationError("siemens star needs at least one spoke");
      const double extent = std::min(static_cast<double>(grid.ny) * grid.step_y, static_cast<double>(grid.nx) * grid.step_x);
      const double radius = p.radius_nm > 0.0 ? p.radius_nm : 0.4 * extent;
      for (std::size_t y = 0; y < grid.ny; ++y) {
        for (std::size_t x = 0; x < grid.nx; ++x) {
          const double cy = grid.coord_y(y), cx = grid.coord_x(x);
          if (std::hypot(cy, cx) > radius) continue;
          if (std::cos(p.spokes * std::atan2(cy, cx)) > 1e-9) img(y, x) = 1.0;
        }
      }
      break;
    }
    case PhantomKind::imported:
      throw ValidationError("imported phantoms are built with phantom_from_image");
  }
  return detail::finish_phantom(std::move(img), grid, kind, p);
}

/// Wraps an externally supplied image (e.g. from read_grayscale) as a phantom.
inline Phantom phantom_from_image(Image img, const ScanGrid& grid, const PhantomParams& p = {}) {
  grid.validate();
  if (img.ny() != grid.ny || img.nx() != grid.nx) throw ValidationError("imported image does not match the scan grid");
  return detail::finish_phantom(std::move(img), grid, PhantomKind::imported, p);
}

namespace detail {

// Non-periodic "same"-size convolution: pads to twice the size so nothing wraps into
// the kept window; the kernel origin is its centre pixel.
inline Spectrum padded_kernel_spectrum(const Image& kernel, std::size_t py, std::size_t px) {
  Image k(py, px);
  const auto cy = static_cast<long long>(kernel.ny() / 2), cx = static_cast<long long>(kernel.nx() / 2);
  for (std::size_t y = 0; y < kernel.ny(); ++y)
    for (std::size_t x = 0; x < kernel.nx(); ++x)
      k(wrap_index(static_cast<long long>(y) - cy, py), wrap_index(static_cast<long long>(x) - cx, px)) = kernel(y, x);
  return fft2(k);
}

}  // namespace detail

/// i(x_s | x_d) = o * h(. | x_d) for every channel of the stack.
inline IsmDataset forward(const Phantom& object, const PsfStack& stack) {
  if (!(object.grid == stack.grid) || object.image.ny() != stack.grid.ny || object.image.nx() != stack.grid.nx)
    throw ValidationError("object and PSF stack must share a scan grid");
  const std::size_t py = 2 * stack.grid.ny, px = 2 * stack.grid.nx;
  const Spectrum obj = fft2(zero_pad(object.image, py, px));

  IsmDataset out;
  out.grid = stack.grid;
  out.detector = stack.detector;
  out.dtype = DataType::intensity;
  out.channels.resize(stack.size());
  parallel_for(stack.size(), [&](std::size_t c) {
    Spectrum s = detail::padded_kernel_spectrum(stack.channels[c], py, px);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= obj[i];
    Image full = ifft2_real(std::move(s));
    Image ch = crop(full, 0, 0, stack.grid.ny, stack.grid.nx);
    for (auto& v : ch.values()) v = std::max(v, 0.0);
    out.channels[c] = std::move(ch);
  });
  out.provenance = {{"generator", "forward"}, {"phantom", to_string(object.kind)}, {"photons", object.total_photons}};
  return out;
}

/// b(x_s | x_d): per-channel constant rates or a full per-pixel array.
struct BackgroundModel {
  std::vector<double> per_channel;
  std::vector<Image> full;

  static BackgroundModel constant(std::size_t channels, double rate) { return {std::vector<double>(channels, rate), {}}; }

  bool is_full() const { return !full.empty(); }

  void validate(const ScanGrid& grid, std::size_t channels) const {
    if (is_full()) {
      if (full.size() != channels) throw ValidationError("background channel count does not match the dataset");
      for (const auto& b : full) {
        if (b.ny() != grid.ny || b.nx() != grid.nx) throw ValidationError("background shape does not match the scan grid");
        for (double v : b.values())
          if (!(v >= 0.0)) throw ValidationError("background must be non-negative");
      }
    } else {
      if (per_channel.size() != channels) throw ValidationError("background channel count does not match the dataset");
      for (double v : per_channel)
        if (!(v >= 0.0)) throw ValidationError("background must be non-negative");
    }
  }

  double at(std::size_t c, std::size_t i) const { return is_full() ? full[c][i] : per_channel[c]; }
};

/// Forward model with an additive background term.
inline IsmDataset forward_with_background(const Phantom& object, const PsfStack& stack, const BackgroundModel& bkg) {
  bkg.validate(stack.grid, stack.size());
  IsmDataset out = forward(object, stack);
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t i = 0; i < out.channels[c].size(); ++i) out.channels[c][i] += bkg.at(c, i);
  out.provenance["background"] = true;
  return out;
}

/// Independent Poisson draw per pixel and channel. Pixel (y, x, c) uses counter
/// (y * nx + x) * N_d + c, so the result depends only on the seed.
inline IsmDataset add_poisson(const IsmDataset& in, std::uint64_t seed) {
  if (in.dtype != DataType::intensity) throw ValidationError("shot noise is applied to intensity datasets only");
  for (const auto& ch : in.channels)
    for (double v : ch.values())
      if (!(v >= 0.0)) throw ValidationError("intensity must be non-negative to draw Poisson counts");
  IsmDataset out = in;
  out.dtype = DataType::counts;
  const std::size_t nc = in.size();
  parallel_for(nc, [&](std::size_t c) {
    for (std::size_t i = 0; i < in.channels[c].size(); ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i) * nc + c);
      out.channels[c][i] = static_cast<double>(poisson_sample(in.channels[c][i], rng));
    }
  });
  out.provenance["noise"] = {{"model", "poisson"}, {"seed", seed}};
  return out;
}

}  // namespace ism
