#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ism/core.hpp"
#include "ism/fft.hpp"

namespace ism {

enum class PsfModel { gaussian, airy_scalar };

inline std::string to_string(PsfModel m) { return m == PsfModel::gaussian ? "gaussian" : "airy_scalar"; }

inline PsfModel psf_model_from_string(const std::string& s) {
  if (s == "gaussian") return PsfModel::gaussian;
  if (s == "airy_scalar" || s == "airy") return PsfModel::airy_scalar;
  throw ValidationError("unknown PSF model '" + s + "'");
}

/// Microscope and detector-array description. Physical detector lengths are in the
/// detector plane; everything else is in the sample plane.
struct OpticalConfig {
  double lambda_exc_nm = 635.0;
  double lambda_em_nm = 660.0;
  double numerical_aperture = 1.4;
  double refractive_index = 1.5;
  double magnification = 450.0;
  int array_side = 5;
  double element_size_nm = 50'000.0;
  double element_pitch_nm = 75'000.0;
  PsfModel psf_model = PsfModel::gaussian;

  void validate() const {
    if (!(lambda_exc_nm > 0.0)) throw ValidationError("excitation wavelength must be positive");
    if (!(lambda_em_nm >= lambda_exc_nm)) throw ValidationError("emission wavelength must not be shorter than excitation");
    if (!(numerical_aperture > 0.0) || !(numerical_aperture <= refractive_index))
      throw ValidationError("numerical aperture must lie in (0, refractive index]");
    if (!(magnification > 0.0)) throw ValidationError("magnification must be positive");
    if (array_side < 1 || array_side % 2 == 0) throw ValidationError("detector array side must be a positive odd number");
    if (!(element_size_nm >= 0.0) || !(element_pitch_nm > 0.0)) throw ValidationError("detector element geometry must be positive");
    if (element_size_nm > element_pitch_nm) throw ValidationError("detector element size exceeds its pitch");
  }

  /// Side of one detector element projected onto the sample plane.
  double pinhole_side_nm() const { return element_size_nm / magnification; }
  /// Detector pitch projected onto the sample plane.
  double pitch_sample_nm() const { return element_pitch_nm / magnification; }
  /// Full physical width of the detector array.
  double array_width_nm() const { return (array_side - 1) * element_pitch_nm + element_size_nm; }
};

/// Scan-plane positions of the detector elements. Channels are numbered row-major
/// over the lattice starting from the top-left element.
struct DetectorMap {
  int side = 1;
  double pitch_nm = 0.0;
  std::vector<Vec2> positions;
  std::vector<std::pair<int, int>> lattice;  // (row, col)
  std::optional<std::size_t> central;

  std::size_t channels() const { return positions.size(); }

  std::optional<std::size_t> channel_at(int row, int col) const {
    for (std::size_t c = 0; c < lattice.size(); ++c)
      if (lattice[c] == std::pair{row, col}) return c;
    return std::nullopt;
  }

  friend bool operator==(const DetectorMap&, const DetectorMap&) = default;
};

/// Square detector lattice with `side` elements per row and the given sample-plane pitch.
inline DetectorMap square_detector(int side, double pitch_nm) {
  if (side < 1) throw ValidationError("detector side must be positive");
  DetectorMap map;
  map.side = side;
  map.pitch_nm = pitch_nm;
  const int half = side / 2;
  for (int r = 0; r < side; ++r) {
    for (int q = 0; q < side; ++q) {
      map.lattice.emplace_back(r, q);
      map.positions.push_back({(r - half) * pitch_nm, (q - half) * pitch_nm});
    }
  }
  if (side % 2 == 1) map.central = static_cast<std::size_t>(half * side + half);
  return map;
}

inline DetectorMap make_detector_map(const OpticalConfig& cfg) {
  cfg.validate();
  return square_detector(cfg.array_side, cfg.pitch_sample_nm());
}

/// FWHM of the Gaussian PSF model, 0.51 lambda / NA.
inline double gaussian_fwhm_nm(double lambda_nm, double na) { return 0.51 * lambda_nm / na; }

inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

/// Radius of the first dark ring of the Airy pattern (3.8317 / 2 pi = 0.61 lambda / NA).
inline double airy_first_zero_nm(double lambda_nm, double na) {
  constexpr double j11 = 3.8317059702075125;
  return j11 * lambda_nm / (2.0 * std::numbers::pi * na);
}

/// Peak-normalised radial intensity profile of the selected model.
inline double psf_profile(PsfModel model, double lambda_nm, double na, double r_nm) {
  if (model == PsfModel::gaussian) {
    double s = fwhm_to_sigma(gaussian_fwhm_nm(lambda_nm, na));
    return std::exp(-0.5 * r_nm * r_nm / (s * s));
  }
  double v = 2.0 * std::numbers::pi * na * r_nm / lambda_nm;
  if (v < 1e-8) return 1.0;
  double a = 2.0 * std::cyl_bessel_j(1.0, v) / v;
  return a * a;
}

/// Warnings raised while building PSFs (non-fatal).
struct Diagnostics {
  std::vector<std::string> warnings;
};

namespace detail {

inline Image sample_profile(PsfModel model, double lambda_nm, double na, const ScanGrid& grid, Vec2 center, double sign) {
  Image img(grid.ny, grid.nx);
  for (std::size_t y = 0; y < grid.ny; ++y) {
    double dy = sign * grid.coord_y(y) - center.y;
    for (std::size_t x = 0; x < grid.nx; ++x) {
      double dx = sign * grid.coord_x(x) - center.x;
      img(y, x) = psf_profile(model, lambda_nm, na, std::hypot(dy, dx));
    }
  }
  return img;
}

// Fraction of PSF energy inside the grid, using the largest centred inscribed square/disc.
inline double energy_inside(PsfModel model, double lambda_nm, double na, const ScanGrid& grid) {
  double ay = (static_cast<double>(grid.center_y()) + 0.5) * grid.step_y;
  double ay2 = (static_cast<double>(grid.ny - grid.center_y()) - 0.5) * grid.step_y;
  double ax = (static_cast<double>(grid.center_x()) + 0.5) * grid.step_x;
  double ax2 = (static_cast<double>(grid.nx - grid.center_x()) - 0.5) * grid.step_x;
  double a = std::min({ay, ay2, ax, ax2});
  if (model == PsfModel::gaussian) {
    double s = fwhm_to_sigma(gaussian_fwhm_nm(lambda_nm, na));
    double e = std::erf(a / (s * std::numbers::sqrt2));
    return e * e;
  }
  double v = 2.0 * std::numbers::pi * na * a / lambda_nm;
  double j0 = std::cyl_bessel_j(0.0, v), j1 = std::cyl_bessel_j(1.0, v);
  return 1.0 - j0 * j0 - j1 * j1;
}

// Radius beyond which the emission profile is negligible (1e-9 of peak for the Gaussian).
inline double support_radius_nm(PsfModel model, double lambda_nm, double na) {
  if (model == PsfModel::gaussian) {
    double s = fwhm_to_sigma(gaussian_fwhm_nm(lambda_nm, na));
    return s * std::sqrt(2.0 * std::log(1e9));
  }
  return 8.0 * airy_first_zero_nm(lambda_nm, na);
}

inline double sinc(double u) {
  if (std::abs(u) < 1e-12) return 1.0;
  double p = std::numbers::pi * u;
  return std::sin(p) / p;
}

}  // namespace detail

/// Excitation PSF h_exc sampled on the grid, peak-normalised, peak at the centre pixel.
inline Image excitation_psf(const OpticalConfig& cfg, const ScanGrid& grid, Diagnostics* diag = nullptr) {
  cfg.validate();
  grid.validate();
  if (diag) {
    double frac = detail::energy_inside(cfg.psf_model, cfg.lambda_exc_nm, cfg.numerical_aperture, grid);
    if (frac < 0.99)
      diag->warnings.push_back("scan grid holds only " + std::to_string(frac * 100.0) + "% of the excitation PSF energy");
  }
  return detail::sample_profile(cfg.psf_model, cfg.lambda_exc_nm, cfg.numerical_aperture, grid, {}, 1.0);
}

/// Emission PSF centred on `center`, peak-normalised.
inline Image emission_psf(const OpticalConfig& cfg, const ScanGrid& grid, Vec2 center = {}) {
  cfg.validate();
  grid.validate();
  return detail::sample_profile(cfg.psf_model, cfg.lambda_em_nm, cfg.numerical_aperture, grid, center, 1.0);
}

/// Detection PSF: emission PSF convolved with the square element aperture, centred at x_d.
///
/// The emission PSF is sampled analytically at the exact (sub-pixel) offset x_d on a
/// zero-margin grid; the aperture is applied through its continuous transfer function
/// sinc(f s) per axis, so apertures smaller than a pixel are handled without rounding.
inline Image detection_psf(const OpticalConfig& cfg, const ScanGrid& grid, Vec2 x_d) {
  cfg.validate();
  grid.validate();
  const double lo_y = grid.coord_y(0), hi_y = grid.coord_y(grid.ny - 1);
  const double lo_x = grid.coord_x(0), hi_x = grid.coord_x(grid.nx - 1);
  if (x_d.y < lo_y || x_d.y > hi_y || x_d.x < lo_x || x_d.x > hi_x)
    throw ValidationError("detector position lies outside the scan grid support");

  const double side = cfg.pinhole_side_nm();
  if (side <= 0.0) return emission_psf(cfg, grid, x_d);

  const double reach = 0.5 * side + detail::support_radius_nm(cfg.psf_model, cfg.lambda_em_nm, cfg.numerical_aperture);
  const auto pad_y = static_cast<std::size_t>(std::ceil(reach / grid.step_y)) + 2;
  const auto pad_x = static_cast<std::size_t>(std::ceil(reach / grid.step_x)) + 2;

  // Padded grid keeps the original pixel coordinates: index i maps to i + pad.
  ScanGrid big{grid.ny + 2 * pad_y, grid.nx + 2 * pad_x, grid.step_y, grid.step_x};
  Image em(big.ny, big.nx);
  for (std::size_t y = 0; y < big.ny; ++y) {
    double cy = (static_cast<double>(y) - static_cast<double>(pad_y + grid.center_y())) * grid.step_y - x_d.y;
    for (std::size_t x = 0; x < big.nx; ++x) {
      double cx = (static_cast<double>(x) - static_cast<double>(pad_x + grid.center_x())) * grid.step_x - x_d.x;
      em(y, x) = psf_profile(cfg.psf_model, cfg.lambda_em_nm, cfg.numerical_aperture, std::hypot(cy, cx));
    }
  }

  Spectrum s = fft2(em);
  std::vector<double> tx(big.nx);
  for (std::size_t kx = 0; kx < big.nx; ++kx)
    tx[kx] = detail::sinc(signed_frequency(kx, big.nx) / (static_cast<double>(big.nx) * grid.step_x) * side);
  for (std::size_t ky = 0; ky < big.ny; ++ky) {
    double ty = detail::sinc(signed_frequency(ky, big.ny) / (static_cast<double>(big.ny) * grid.step_y) * side);
    for (std::size_t kx = 0; kx < big.nx; ++kx) s(ky, kx) *= ty * tx[kx];
  }
  Image det = crop(ifft2_real(std::move(s)), pad_y, pad_x, grid.ny, grid.nx);
  for (auto& v : det.values()) v = std::max(v, 0.0);
  return det;
}

/// The per-channel complete PSFs h(x_s | x_d) on one scan grid.
struct PsfStack {
  ScanGrid grid;
  DetectorMap detector;
  std::vector<Image> channels;
  bool normalized = false;

  std::size_t size() const { return channels.size(); }

  double total() const {
    std::vector<double> sums;
    for (const auto& c : channels) sums.push_back(c.sum());
    return accurate_sum(sums);
  }

  /// Rescales so that all channels together sum to one.
  void normalize() {
    double t = total();
    if (!(t > 0.0)) throw ValidationError("cannot normalise an all-zero PSF stack");
    for (auto& c : channels) c *= 1.0 / t;
    normalized = true;
  }
};

/// h(x_s | x_d) = h_exc(-x_s) * h_det(x_s - x_d) for every detector element.
inline PsfStack psf_stack(const OpticalConfig& cfg, const ScanGrid& grid, bool normalize = true, Diagnostics* diag = nullptr) {
  cfg.validate();
  grid.validate();
  PsfStack stack;
  stack.grid = grid;
  stack.detector = make_detector_map(cfg);
  if (diag) (void)excitation_psf(cfg, grid, diag);
  const Image exc = detail::sample_profile(cfg.psf_model, cfg.lambda_exc_nm, cfg.numerical_aperture, grid, {}, -1.0);
  stack.channels.resize(stack.detector.channels());
  parallel_for(stack.channels.size(), [&](std::size_t c) {
    Image h = detection_psf(cfg, grid, stack.detector.positions[c]);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= exc[i];
    stack.channels[c] = std::move(h);
  });
  if (normalize) stack.normalize();
  return stack;
}

/// Per-channel signal arranged on the detector lattice; absent elements hold zero.
struct Fingerprint {
  int side = 1;
  std::vector<double> values;  // side * side, row-major

  double at(int row, int col) const { return values[static_cast<std::size_t>(row * side + col)]; }
  double total() const { return accurate_sum(values); }
};

inline Fingerprint fingerprint_from_totals(const DetectorMap& det, const std::vector<double>& totals) {
  Fingerprint f;
  f.side = det.side;
  f.values.assign(static_cast<std::size_t>(det.side * det.side), 0.0);
  for (std::size_t c = 0; c < det.channels(); ++c) {
    auto [r, q] = det.lattice[c];
    f.values[static_cast<std::size_t>(r * det.side + q)] = totals[c];
  }
  return f;
}

/// f(x_d) = integral of h(x_s | x_d) over the scan plane.
inline Fingerprint fingerprint_from_psf(const PsfStack& stack) {
  std::vector<double> totals;
  for (const auto& c : stack.channels) totals.push_back(c.sum());
  return fingerprint_from_totals(stack.detector, totals);
}

enum class ShiftStatus { ok, ill_posed, unreliable };

inline std::string to_string(ShiftStatus s) {
  switch (s) {
    case ShiftStatus::ok: return "ok";
    case ShiftStatus::ill_posed: return "ill_posed";
    case ShiftStatus::unreliable: return "unreliable";
  }
  return "?";
}

/// Shift-vectors mu(x_d) in scan-plane nanometres, one per channel.
struct ShiftVectors {
  std::vector<Vec2> vectors;
  std::vector<ShiftStatus> status;
  std::string refinement = "parabolic";

  std::size_t size() const { return vectors.size(); }

  std::vector<Vec2> in_pixels(const ScanGrid& grid) const {
    std::vector<Vec2> px;
    for (auto v : vectors) px.push_back({v.y / grid.step_y, v.x / grid.step_x});
    return px;
  }

  static ShiftVectors from_pixels(const std::vector<Vec2>& px, const ScanGrid& grid) {
    ShiftVectors s;
    for (auto v : px) s.vectors.push_back({v.y * grid.step_y, v.x * grid.step_x});
    s.status.assign(px.size(), ShiftStatus::ok);
    return s;
  }

  bool reliable(std::size_t c) const { return status[c] == ShiftStatus::ok; }
};

/// Peak of an image located to sub-pixel precision (pixels, absolute indices).
struct PeakLocation {
  double y = 0.0;
  double x = 0.0;
  double value = 0.0;
  bool unique = true;
};

/// Argmax with optional 3-point parabolic refinement on each axis. `periodic` selects
/// wrap-around neighbours; otherwise border peaks are left unrefined on that axis.
/// `unique` is false when a pixel outside the 8-neighbourhood of the argmax reaches
/// the maximum within `tie_tolerance` relative.
inline PeakLocation locate_peak(const Image& img, bool subpixel, bool periodic = false, double tie_tolerance = 1e-6) {
  auto [py, px] = img.argmax();
  PeakLocation p{static_cast<double>(py), static_cast<double>(px), img(py, px), true};
  const double thresh = p.value - tie_tolerance * std::abs(p.value);
  for (std::size_t y = 0; y < img.ny() && p.unique; ++y) {
    for (std::size_t x = 0; x < img.nx(); ++x) {
      if (img(y, x) < thresh) continue;
      auto dist = [](std::size_t a, std::size_t b, std::size_t n, bool wrap) {
        std::size_t d = a > b ? a - b : b - a;
        return wrap ? std::min(d, n - d) : d;
      };
      if (dist(y, py, img.ny(), periodic) > 1 || dist(x, px, img.nx(), periodic) > 1) {
        p.unique = false;
        break;
      }
    }
  }
  if (!subpixel) return p;
  auto at = [&](long long y, long long x) { return img(wrap_index(y, img.ny()), wrap_index(x, img.nx())); };
  const auto iy = static_cast<long long>(py), ix = static_cast<long long>(px);
  if (img.ny() >= 3 && (periodic || (py > 0 && py + 1 < img.ny())))
    p.y += parabolic_offset(at(iy - 1, ix), p.value, at(iy + 1, ix));
  if (img.nx() >= 3 && (periodic || (px > 0 && px + 1 < img.nx())))
    p.x += parabolic_offset(at(iy, ix - 1), p.value, at(iy, ix + 1));
  return p;
}

/// Theoretical shift-vectors: the maximum position of each complete PSF.
inline ShiftVectors shift_vectors_from_psf(const PsfStack& stack, bool subpixel = true) {
  ShiftVectors out;
  out.refinement = subpixel ? "parabolic" : "none";
  for (const auto& h : stack.channels) {
    PeakLocation p = locate_peak(h, subpixel);
    out.vectors.push_back({(p.y - static_cast<double>(stack.grid.center_y())) * stack.grid.step_y,
                           (p.x - static_cast<double>(stack.grid.center_x())) * stack.grid.step_x});
    out.status.push_back(p.unique ? ShiftStatus::ok : ShiftStatus::ill_posed);
  }
  return out;
}

/// Overlap between adjacent micro-images, (D - M step) / D.
inline double overlap_ratio(const OpticalConfig& cfg, double step_nm) {
  cfg.validate();
  if (!(step_nm > 0.0)) throw ValidationError("scan step must be positive");
  const double d = cfg.array_width_nm();
  return (d - cfg.magnification * step_nm) / d;
}

}  // namespace ism
