#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ism/core.hpp"
#include "ism/dataset.hpp"
#include "ism/fft.hpp"
#include "ism/optics.hpp"
#include "ism/simulate.hpp"

namespace ism {

enum class Method { sum, apr, rl, rl_background };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::sum: return "sum";
    case Method::apr: return "apr";
    case Method::rl: return "rl";
    case Method::rl_background: return "rl_background";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "sum") return Method::sum;
  if (s == "apr") return Method::apr;
  if (s == "rl") return Method::rl;
  if (s == "rl_background") return Method::rl_background;
  throw ValidationError("unknown reconstruction method '" + s + "'");
}

/// A reconstructed 2-D image plus how it was obtained.
struct ReconOutput {
  Image image;
  ScanGrid grid;
  Method method = Method::sum;
  int iterations = 0;
  std::optional<ShiftVectors> shifts_used;
  double flux_in = 0.0;
  double flux_out = 0.0;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Pixel-wise sum over channels: the image of a pinhole as large as the whole array.
inline ReconOutput sum_image(const IsmDataset& data) {
  data.validate();
  ReconOutput out;
  out.grid = data.grid;
  out.method = Method::sum;
  out.image = Image(data.grid.ny, data.grid.nx);
  for (const auto& c : data.channels) out.image += c;
  out.flux_in = data.total();
  out.flux_out = out.image.sum();
  return out;
}

/// Per-channel totals on the detector lattice (alpha * f(x_d) for noise-free data).
inline Fingerprint fingerprint_from_data(const IsmDataset& data) {
  std::vector<double> totals;
  for (const auto& c : data.channels) totals.push_back(c.sum());
  return fingerprint_from_totals(data.detector, totals);
}

/// Phase correlation of one channel against a reference. Zero lag sits at the centre
/// pixel (floor(n/2)), so lag = index - centre.
struct Correlogram {
  Image image;
  std::size_t channel = 0;
  std::size_t reference = 0;

  std::pair<long long, long long> lag_of(std::size_t y, std::size_t x) const {
    return {static_cast<long long>(y) - static_cast<long long>(image.ny() / 2),
            static_cast<long long>(x) - static_cast<long long>(image.nx() / 2)};
  }
};

/// Bins where |cross-spectrum| falls below this fraction of its maximum carry no phase.
inline constexpr double kSpectralZeroFraction = 1e-12;

inline Image phase_correlation(const Image& moving, const Image& reference) {
  if (!moving.same_shape(reference)) throw ValidationError("phase correlation needs images of equal shape");
  Spectrum a = fft2(moving);
  const Spectrum b = fft2(reference);
  double peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] *= std::conj(b[i]);
    peak = std::max(peak, std::abs(a[i]));
  }
  const double floor = kSpectralZeroFraction * peak;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = std::abs(a[i]);
    a[i] = m > floor && m > 0.0 ? a[i] / m : cplx{};
  }
  Image r = ifft2_real(std::move(a));
  return roll(r, static_cast<long long>(r.ny() / 2), static_cast<long long>(r.nx() / 2));
}

inline Correlogram correlogram(const IsmDataset& data, std::size_t channel, std::size_t reference) {
  if (channel >= data.size() || reference >= data.size()) throw ValidationError("channel index out of range");
  if (!(data.channels[channel].sum() > 0.0) || !(data.channels[reference].sum() > 0.0))
    throw ValidationError("empty channel");
  return {phase_correlation(data.channels[channel], data.channels[reference]), channel, reference};
}

struct ShiftEstimationOptions {
  bool subpixel = true;
  double reliability_factor = 3.0;  // peak must exceed this multiple of the median |R|
};

/// Shift-vectors from the data: argmax of each channel's correlogram against the
/// central channel, optionally refined by a periodic 3-point parabola. Channels whose
/// peak is not distinct are imputed from the least-squares fit mu = s * x_d.
inline ShiftVectors estimate_shifts(const IsmDataset& data, const ShiftEstimationOptions& opt = {}) {
  data.validate();
  if (!data.detector.central) throw ValidationError("shift estimation needs a central reference channel");
  const std::size_t ref = *data.detector.central;
  if (!(data.channels[ref].sum() > 0.0)) throw ValidationError("empty channel");

  const std::size_t n = data.size();
  std::vector<Vec2> px(n);
  std::vector<ShiftStatus> status(n, ShiftStatus::ok);
  parallel_for(n, [&](std::size_t c) {
    if (c == ref) return;
    if (!(data.channels[c].sum() > 0.0)) {
      status[c] = ShiftStatus::unreliable;
      return;
    }
    const Image r = phase_correlation(data.channels[c], data.channels[ref]);
    const PeakLocation p = locate_peak(r, opt.subpixel, true);
    std::vector<double> mags;
    mags.reserve(r.size());
    for (double v : r.values()) mags.push_back(std::abs(v));
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    if (!(p.value >= opt.reliability_factor * *mid)) status[c] = ShiftStatus::unreliable;
    px[c] = {p.y - static_cast<double>(r.ny() / 2), p.x - static_cast<double>(r.nx() / 2)};
  });

  // mu = s * x_d, x_d in pixels, fitted over the reliable channels.
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (c == ref || status[c] != ShiftStatus::ok) continue;
    const Vec2 xd = data.detector.positions[c];
    const double dy = xd.y / data.grid.step_y, dx = xd.x / data.grid.step_x;
    num += px[c].y * dy + px[c].x * dx;
    den += dy * dy + dx * dx;
  }
  const double slope = den > 0.0 ? num / den : 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (status[c] != ShiftStatus::unreliable) continue;
    const Vec2 xd = data.detector.positions[c];
    px[c] = {slope * xd.y / data.grid.step_y, slope * xd.x / data.grid.step_x};
  }
  px[ref] = {};

  ShiftVectors out = ShiftVectors::from_pixels(px, data.grid);
  out.status = std::move(status);
  out.refinement = opt.subpixel ? "parabolic" : "none";
  return out;
}

inline bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-12; }

/// Translates every channel by its shift-vector, i(x_s + mu | x_d), and sums.
/// Integer shifts use a circular roll; fractional ones the Fourier shift theorem.
inline ReconOutput apr(const IsmDataset& data, const ShiftVectors& shifts) {
  data.validate();
  if (shifts.size() != data.size()) throw ValidationError("shift-vectors do not cover every channel");
  const std::vector<Vec2> px = shifts.in_pixels(data.grid);
  std::vector<Image> moved(data.size());
  parallel_for(data.size(), [&](std::size_t c) {
    const Vec2 d = px[c];
    if (is_integral(d.y) && is_integral(d.x))
      moved[c] = roll(data.channels[c], -std::llround(d.y), -std::llround(d.x));
    else
      moved[c] = fourier_shift(data.channels[c], -d.y, -d.x);
  });
  ReconOutput out;
  out.grid = data.grid;
  out.method = Method::apr;
  out.image = Image(data.grid.ny, data.grid.nx);
  for (const auto& m : moved) out.image += m;
  out.shifts_used = shifts;
  out.flux_in = data.total();
  out.flux_out = out.image.sum();
  return out;
}

/// h(-x_s | x_d): reflection about the centre pixel, periodic on the grid.
inline Image mirror_psf(const Image& h) {
  Image m(h.ny(), h.nx());
  const auto cy = static_cast<long long>(h.ny() / 2), cx = static_cast<long long>(h.nx() / 2);
  for (std::size_t y = 0; y < h.ny(); ++y)
    for (std::size_t x = 0; x < h.nx(); ++x)
      m(wrap_index(2 * cy - static_cast<long long>(y), h.ny()), wrap_index(2 * cx - static_cast<long long>(x), h.nx())) = h(y, x);
  return m;
}

namespace detail {

inline void check_stack_for(const IsmDataset& data, const PsfStack& stack) {
  if (stack.size() != data.size()) throw ValidationError("PSF stack and dataset have different channel counts");
  if (!same_shape(stack.grid, data.grid)) throw ValidationError("PSF stack and dataset must share the scan grid shape");
}

inline std::vector<Spectrum> kernel_spectra(const std::vector<Image>& kernels) {
  std::vector<Spectrum> out(kernels.size());
  parallel_for(kernels.size(), [&](std::size_t c) { out[c] = centered_kernel_spectrum(kernels[c]); });
  return out;
}

}  // namespace detail

/// Periodic forward model o * h(. | x_d) + b, one image per channel.
inline std::vector<Image> forward_model(const Image& estimate, const PsfStack& stack, const BackgroundModel* bkg = nullptr) {
  const Spectrum obj = fft2(estimate);
  const auto kernels = detail::kernel_spectra(stack.channels);
  std::vector<Image> out(stack.size());
  parallel_for(stack.size(), [&](std::size_t c) {
    Spectrum s = obj;
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= kernels[c][i];
    Image m = ifft2_real(std::move(s));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max(m[i], 0.0) + (bkg ? bkg->at(c, i) : 0.0);
    out[c] = std::move(m);
  });
  return out;
}

/// Poisson negative log-likelihood without the factorial term:
/// sum over channels and pixels of m - i ln m, m = o * h + b.
inline double negative_log_likelihood(const IsmDataset& data, const PsfStack& stack, const Image& estimate,
                                      const BackgroundModel* bkg = nullptr) {
  detail::check_stack_for(data, stack);
  for (double v : estimate.values())
    if (!(v >= 0.0)) throw ValidationError("estimate must be non-negative");
  if (bkg) bkg->validate(data.grid, data.size());
  const auto model = forward_model(estimate, stack, bkg);
  std::vector<double> terms;
  terms.reserve(data.size() * data.grid.pixels());
  for (std::size_t c = 0; c < data.size(); ++c) {
    for (std::size_t i = 0; i < model[c].size(); ++i) {
      const double m = model[c][i], d = data.channels[c][i];
      if (d > 0.0) {
        if (!(m > 0.0)) throw ValidationError("model is zero where photons were detected");
        terms.push_back(m - d * std::log(m));
      } else {
        terms.push_back(m);
      }
    }
  }
  return accurate_sum(terms);
}

struct RlOptions {
  int iterations = 5;
  const BackgroundModel* background = nullptr;
  std::optional<Image> initial;
  /// Called after each update with the iteration number (1-based) and the estimate.
  std::function<void(int, const Image&)> on_iteration;
};

/// Multi-image Richardson-Lucy:
///   o_{k+1} = o_k * sum_c h(-x_s | x_d_c) * ( i_c / (o_k * h_c + b_c) )
/// with periodic convolutions on the scan grid. Requires a jointly normalised stack.
inline ReconOutput rl_deconvolve(const IsmDataset& data, const PsfStack& stack, const RlOptions& opt = {}) {
  data.validate();
  detail::check_stack_for(data, stack);
  if (opt.iterations < 0) throw ValidationError("iteration count must be non-negative");
  if (!stack.normalized || std::abs(stack.total() - 1.0) > 1e-9)
    throw ValidationError("PSF stack must be normalised to unit total");
  if (opt.background) opt.background->validate(data.grid, data.size());

  const std::size_t n_pix = data.grid.pixels();
  const double flux_in = data.total();
  Image o;
  if (opt.initial) {
    if (opt.initial->ny() != data.grid.ny || opt.initial->nx() != data.grid.nx)
      throw ValidationError("initial estimate does not match the scan grid");
    for (double v : opt.initial->values())
      if (!(v >= 0.0)) throw ValidationError("initial estimate must be non-negative");
    o = *opt.initial;
  } else {
    o = Image(data.grid.ny, data.grid.nx, flux_in / static_cast<double>(n_pix));
  }

  double data_max = 0.0;
  for (const auto& c : data.channels) data_max = std::max(data_max, c.max());
  const double eps = 1e-12 * data_max;

  std::vector<Image> mirrored;
  for (const auto& h : stack.channels) mirrored.push_back(mirror_psf(h));
  const auto fwd = detail::kernel_spectra(stack.channels);
  const auto bwd = detail::kernel_spectra(mirrored);

  std::vector<Spectrum> partial(data.size());
  for (int k = 0; k < opt.iterations; ++k) {
    const Spectrum obj = fft2(o);
    parallel_for(data.size(), [&](std::size_t c) {
      Spectrum s = obj;
      for (std::size_t i = 0; i < s.size(); ++i) s[i] *= fwd[c][i];
      Image ratio = ifft2_real(std::move(s));
      const Image& meas = data.channels[c];
      for (std::size_t i = 0; i < ratio.size(); ++i) {
        const double den = std::max(ratio[i], 0.0) + (opt.background ? opt.background->at(c, i) : 0.0);
        const double num = meas[i];
        ratio[i] = (num < eps && den < eps) ? 0.0 : num / std::max(den, eps);
      }
      Spectrum r = fft2(ratio);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] *= bwd[c][i];
      partial[c] = std::move(r);
    });
    // Fixed reduction order keeps results independent of the worker count.
    Spectrum acc = std::move(partial[0]);
    for (std::size_t c = 1; c < partial.size(); ++c)
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += partial[c][i];
    const Image corr = ifft2_real(std::move(acc));
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] > 0.0 ? std::max(o[i] * corr[i], 0.0) : 0.0;
    if (opt.on_iteration) opt.on_iteration(k + 1, o);
  }

  ReconOutput out;
  out.grid = data.grid;
  out.method = opt.background ? Method::rl_background : Method::rl;
  out.iterations = opt.iterations;
  out.flux_in = flux_in;
  out.flux_out = o.sum();
  out.image = std::move(o);
  return out;
}

}  // namespace ism
