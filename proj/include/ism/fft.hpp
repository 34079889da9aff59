#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include "ism/core.hpp"

namespace ism {

using cplx = std::complex<double>;

/// Complex 2-D array in unshifted DFT layout (zero frequency at index 0).
class Spectrum {
public:
  Spectrum() = default;
  Spectrum(std::size_t ny, std::size_t nx) : ny_(ny), nx_(nx), data_(ny * nx) {}

  std::size_t ny() const { return ny_; }
  std::size_t nx() const { return nx_; }
  std::size_t size() const { return data_.size(); }
  cplx& operator()(std::size_t y, std::size_t x) { return data_[y * nx_ + x]; }
  cplx operator()(std::size_t y, std::size_t x) const { return data_[y * nx_ + x]; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  cplx operator[](std::size_t i) const { return data_[i]; }
  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }

private:
  std::size_t ny_ = 0;
  std::size_t nx_ = 0;
  std::vector<cplx> data_;
};

namespace detail {

// FFTW planning is not thread-safe; execution through fftw_execute_dft is.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t ny, std::size_t nx, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(ny, nx, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<cplx> scratch(ny * nx);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

inline void execute(Spectrum& s, int sign) {
  fftw_plan plan = PlanCache::instance().get(s.ny(), s.nx(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(s.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace detail

/// Forward DFT, no scaling.
inline Spectrum fft2(const Image& img) {
  Spectrum s(img.ny(), img.nx());
  for (std::size_t i = 0; i < img.size(); ++i) s[i] = img[i];
  detail::execute(s, FFTW_FORWARD);
  return s;
}

/// Inverse DFT scaled by 1/N, in place.
inline void ifft2_inplace(Spectrum& s) {
  detail::execute(s, FFTW_BACKWARD);
  double scale = 1.0 / static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= scale;
}

/// Real part of the scaled inverse DFT.
inline Image ifft2_real(Spectrum s) {
  ifft2_inplace(s);
  Image out(s.ny(), s.nx());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i].real();
  return out;
}

/// Signed frequency index of DFT bin k for length n, in [-n/2, n/2).
inline double signed_frequency(std::size_t k, std::size_t n) {
  auto kk = static_cast<double>(k);
  return k < (n + 1) / 2 ? kk : kk - static_cast<double>(n);
}

inline std::size_t wrap_index(long long i, std::size_t n) {
  long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

/// Circular translation: out(y, x) = in(y - dy, x - dx).
inline Image roll(const Image& in, long long dy, long long dx) {
  Image out(in.ny(), in.nx());
  for (std::size_t y = 0; y < in.ny(); ++y) {
    std::size_t ty = wrap_index(static_cast<long long>(y) + dy, in.ny());
    for (std::size_t x = 0; x < in.nx(); ++x) {
      out(ty, wrap_index(static_cast<long long>(x) + dx, in.nx())) = in(y, x);
    }
  }
  return out;
}

/// Multiplies a spectrum by the phase ramp of a translation by (dy, dx) pixels.
inline void apply_shift_phase(Spectrum& s, double dy, double dx) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<cplx> px(s.nx());
  for (std::size_t kx = 0; kx < s.nx(); ++kx) {
    double f = signed_frequency(kx, s.nx()) / static_cast<double>(s.nx());
    px[kx] = std::polar(1.0, -two_pi * f * dx);
  }
  for (std::size_t ky = 0; ky < s.ny(); ++ky) {
    double f = signed_frequency(ky, s.ny()) / static_cast<double>(s.ny());
    cplx py = std::polar(1.0, -two_pi * f * dy);
    for (std::size_t kx = 0; kx < s.nx(); ++kx) s(ky, kx) *= py * px[kx];
  }
}

/// Periodic sub-pixel translation via the shift theorem: out(r) = in(r - d).
/// The zero-frequency term is untouched, so the total is preserved.
inline Image fourier_shift(const Image& in, double dy, double dx) {
  Spectrum s = fft2(in);
  apply_shift_phase(s, dy, dx);
  return ifft2_real(std::move(s));
}

/// Spectrum of a kernel whose origin is the centre pixel (floor(n/2)) of the image.
inline Spectrum centered_kernel_spectrum(const Image& kernel) {
  return fft2(roll(kernel, -static_cast<long long>(kernel.ny() / 2), -static_cast<long long>(kernel.nx() / 2)));
}

/// Periodic convolution of an image with a kernel given by its centred spectrum.
inline Image circular_convolve(const Image& img, const Spectrum& kernel) {
  Spectrum s = fft2(img);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= kernel[i];
  return ifft2_real(std::move(s));
}

/// Copies `in` into the top-left corner of a zero image of the given size.
inline Image zero_pad(const Image& in, std::size_t ny, std::size_t nx) {
  Image out(ny, nx);
  for (std::size_t y = 0; y < in.ny(); ++y)
    for (std::size_t x = 0; x < in.nx(); ++x) out(y, x) = in(y, x);
  return out;
}

/// Extracts the ny x nx window starting at (y0, x0).
inline Image crop(const Image& in, std::size_t y0, std::size_t x0, std::size_t ny, std::size_t nx) {
  Image out(ny, nx);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) out(y, x) = in(y0 + y, x0 + x);
  return out;
}

}  // namespace ism
