#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ism/core.hpp"
#include "ism/fft.hpp"

namespace ism {

/// A * exp(-(x - mean)^2 / (2 sigma^2)) with 1-sigma parameter uncertainties.
struct GaussianFit {
  double amplitude = 0.0;
  double mean = 0.0;   // nm
  double sigma = 0.0;  // nm
  double fwhm = 0.0;   // nm
  double amplitude_err = 0.0;
  double mean_err = 0.0;
  double sigma_err = 0.0;
  double fwhm_err = 0.0;
  double rss = 0.0;
  int iterations = 0;
};

inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

/// Difference of two fitted means with its quadrature uncertainty.
struct Measurement {
  double value = 0.0;
  double uncertainty = 0.0;
};

class FitError : public Error {
public:
  using Error::Error;
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline bool invert3(const Mat3& a, Mat3& inv) {
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
  inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return true;
}

struct GaussEval {
  double rss = 0.0;
  Mat3 jtj{};
  std::array<double, 3> jtr{};
};

inline GaussEval gauss_eval(std::span<const double> xs, std::span<const double> ys, const std::array<double, 3>& p) {
  GaussEval e;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double u = (xs[i] - p[1]) / p[2];
    const double g = std::exp(-0.5 * u * u);
    const double r = ys[i] - p[0] * g;
    const std::array<double, 3> j{g, p[0] * g * u / p[2], p[0] * g * u * u / p[2]};
    e.rss += r * r;
    for (int a = 0; a < 3; ++a) {
      e.jtr[a] += j[a] * r;
      for (int b = 0; b < 3; ++b) e.jtj[a][b] += j[a] * j[b];
    }
  }
  return e;
}

}  // namespace detail

/// Levenberg-Marquardt fit of a Gaussian to samples (xs, ys). Starts from A = peak,
/// mean = argmax, sigma = HWHM / 1.177. Uncertainties are sqrt(diag(s^2 (J^T J)^-1))
/// with s^2 = RSS / (n - 3).
inline GaussianFit fit_gaussian(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 4) throw FitError("Gaussian fit needs at least four samples");
  std::size_t ip = 0;
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i] > ys[ip]) ip = i;
  const double peak = ys[ip];
  if (!(peak > 0.0)) throw FitError("profile has no positive peak");

  auto half_cross = [&](int dir) {
    long long i = static_cast<long long>(ip);
    const auto n = static_cast<long long>(ys.size());
    while (i + dir >= 0 && i + dir < n && ys[static_cast<std::size_t>(i + dir)] > 0.5 * peak) i += dir;
    if (i + dir < 0 || i + dir >= n) return std::abs(xs[static_cast<std::size_t>(i)] - xs[ip]);
    const double y0 = ys[static_cast<std::size_t>(i)], y1 = ys[static_cast<std::size_t>(i + dir)];
    const double x0 = xs[static_cast<std::size_t>(i)], x1 = xs[static_cast<std::size_t>(i + dir)];
    const double t = (y0 - 0.5 * peak) / (y0 - y1);
    return std::abs(x0 + t * (x1 - x0) - xs[ip]);
  };
  double hwhm = 0.5 * (half_cross(-1) + half_cross(+1));
  if (!(hwhm > 0.0)) hwhm = std::abs(xs.size() > 1 ? xs[1] - xs[0] : 1.0);

  std::array<double, 3> p{peak, xs[ip], hwhm / 1.1774100225154747};
  detail::GaussEval cur = detail::gauss_eval(xs, ys, p);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < 500; ++it) {
    detail::Mat3 a = cur.jtj;
    for (int d = 0; d < 3; ++d) a[d][d] += lambda * std::max(cur.jtj[d][d], 1e-300);
    detail::Mat3 inv;
    if (!detail::invert3(a, inv)) {
      lambda *= 10.0;
      continue;
    }
    std::array<double, 3> step{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) step[r] += inv[r][c] * cur.jtr[c];
    std::array<double, 3> trial{p[0] + step[0], p[1] + step[1], std::abs(p[2] + step[2])};
    const detail::GaussEval next = detail::gauss_eval(xs, ys, trial);
    if (next.rss <= cur.rss) {
      const double rel = std::abs(step[0]) / std::max(std::abs(p[0]), 1e-300) + std::abs(step[1]) / std::max(p[2], 1e-300) +
                         std::abs(step[2]) / std::max(p[2], 1e-300);
      const double drop = cur.rss - next.rss;
      p = trial;
      cur = next;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < 1e-12 || drop <= 1e-15 * std::max(cur.rss, 1e-300) || cur.rss == 0.0) {
        converged = true;
        ++it;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        converged = true;  // no further descent possible: at a minimum to working precision
        ++it;
        break;
      }
    }
  }
  if (!converged || !(p[2] > 0.0) || !std::isfinite(p[0] + p[1] + p[2])) {
    std::ostringstream msg;
    msg << "Gaussian fit did not converge after " << it << " iterations (rss = " << cur.rss << ", A = " << p[0]
        << ", mean = " << p[1] << ", sigma = " << p[2] << ")";
    throw FitError(msg.str());
  }

  GaussianFit fit;
  fit.amplitude = p[0];
  fit.mean = p[1];
  fit.sigma = p[2];
  fit.fwhm = kFwhmPerSigma * p[2];
  fit.rss = cur.rss;
  fit.iterations = it;
  detail::Mat3 cov;
  if (xs.size() > 3 && detail::invert3(cur.jtj, cov)) {
    const double s2 = cur.rss / static_cast<double>(xs.size() - 3);
    fit.amplitude_err = std::sqrt(std::max(0.0, s2 * cov[0][0]));
    fit.mean_err = std::sqrt(std::max(0.0, s2 * cov[1][1]));
    fit.sigma_err = std::sqrt(std::max(0.0, s2 * cov[2][2]));
    fit.fwhm_err = kFwhmPerSigma * fit.sigma_err;
  }
  return fit;
}

enum class Axis { x, y };

/// Fits the line profile through the integer argmax of `img` along `axis`. Sample
/// positions are scan-plane coordinates in nm (origin at the centre pixel).
inline GaussianFit fit_gaussian_profile(const Image& img, const ScanGrid& grid, Axis axis = Axis::x) {
  if (img.ny() != grid.ny || img.nx() != grid.nx) throw ValidationError("image does not match the scan grid");
  const auto [py, px] = img.argmax();
  std::vector<double> xs, ys;
  if (axis == Axis::x) {
    for (std::size_t x = 0; x < img.nx(); ++x) {
      xs.push_back(grid.coord_x(x));
      ys.push_back(img(py, x));
    }
  } else {
    for (std::size_t y = 0; y < img.ny(); ++y) {
      xs.push_back(grid.coord_y(y));
      ys.push_back(img(y, px));
    }
  }
  const double half = 0.5 * img(py, px);
  std::size_t above = 0;
  for (double v : ys) above += v > half ? 1 : 0;
  if (above < 5) throw FitError("profile has fewer than 5 samples above half maximum; sample more finely");
  return fit_gaussian(xs, ys);
}

inline Measurement measure_shift(const GaussianFit& a, const GaussianFit& b) {
  return {b.mean - a.mean, std::hypot(a.mean_err, b.mean_err)};
}

/// |angular mean of the spectrum| per radial frequency bin.
struct RadialSpectrum {
  std::vector<double> k;       // cycles / nm
  std::vector<double> values;

  std::string to_csv() const {
    std::ostringstream s;
    s.precision(17);
    s << "k_per_nm,spectrum\n";
    for (std::size_t i = 0; i < k.size(); ++i) s << k[i] << ',' << values[i] << '\n';
    return s.str();
  }
};

/// Unitary DFT (1/sqrt(N)) with the spatial origin at the centre pixel, averaged over
/// annuli one frequency pixel wide. Complex values are averaged first and the modulus
/// is taken last.
inline RadialSpectrum radial_spectrum(const Image& img, const ScanGrid& grid) {
  if (img.ny() != grid.ny || img.nx() != grid.nx) throw ValidationError("image does not match the scan grid");
  Spectrum s = fft2(roll(img, -static_cast<long long>(grid.center_y()), -static_cast<long long>(grid.center_x())));
  const double scale = 1.0 / std::sqrt(static_cast<double>(img.size()));
  const double fy0 = 1.0 / (static_cast<double>(grid.ny) * grid.step_y);
  const double fx0 = 1.0 / (static_cast<double>(grid.nx) * grid.step_x);
  const double df = std::max(fy0, fx0);
  const double kmax = std::min(0.5 / grid.step_y, 0.5 / grid.step_x);
  const auto nbins = static_cast<std::size_t>(std::floor(kmax / df + 1e-9)) + 1;
  std::vector<cplx> acc(nbins);
  std::vector<std::size_t> count(nbins, 0);
  for (std::size_t ky = 0; ky < grid.ny; ++ky) {
    const double fy = signed_frequency(ky, grid.ny) * fy0;
    for (std::size_t kx = 0; kx < grid.nx; ++kx) {
      const double fx = signed_frequency(kx, grid.nx) * fx0;
      const auto bin = static_cast<std::size_t>(std::llround(std::hypot(fy, fx) / df));
      if (bin >= nbins) continue;
      acc[bin] += s(ky, kx) * scale;
      ++count[bin];
    }
  }
  RadialSpectrum out;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (count[b] == 0) continue;
    out.k.push_back(static_cast<double>(b) * df);
    out.values.push_back(std::abs(acc[b] / static_cast<double>(count[b])));
  }
  return out;
}

}  // namespace ism
