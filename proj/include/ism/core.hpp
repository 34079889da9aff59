#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ism {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Point or displacement in the scan plane, nanometres unless stated otherwise.
struct Vec2 {
  double y = 0.0;
  double x = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.y + b.y, a.x + b.x}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.y - b.y, a.x - b.x}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.y, s * a.x}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(y, x); }
};

/// Dense row-major real image.
class Image {
public:
  Image() = default;
  Image(std::size_t ny, std::size_t nx, double fill = 0.0) : ny_(ny), nx_(nx), data_(ny * nx, fill) {}

  std::size_t ny() const { return ny_; }
  std::size_t nx() const { return nx_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t y, std::size_t x) { return data_[y * nx_ + x]; }
  double operator()(std::size_t y, std::size_t x) const { return data_[y * nx_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& o) const { return ny_ == o.ny_ && nx_ == o.nx_; }

  double sum() const;
  double max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }
  double min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }

  /// Index of the largest value; ties resolve to the first in row-major order.
  std::pair<std::size_t, std::size_t> argmax() const {
    auto it = std::max_element(data_.begin(), data_.end());
    auto i = static_cast<std::size_t>(it - data_.begin());
    return {i / nx_, i % nx_};
  }

  Image& operator+=(const Image& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Image& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t ny_ = 0;
  std::size_t nx_ = 0;
  std::vector<double> data_;
};

/// Compensated (Neumaier) summation.
inline double accurate_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  return s + c;
}

inline double Image::sum() const { return accurate_sum(data_); }

/// Sampling of the scan plane. Pixel (floor(ny/2), floor(nx/2)) sits at the origin.
struct ScanGrid {
  std::size_t ny = 1;
  std::size_t nx = 1;
  double step_y = 1.0;  // nm
  double step_x = 1.0;  // nm

  void validate() const {
    if (ny < 1 || nx < 1) throw ValidationError("scan grid must have at least one pixel per axis");
    if (!(step_y > 0.0) || !(step_x > 0.0)) throw ValidationError("scan grid steps must be positive");
  }
  std::size_t center_y() const { return ny / 2; }
  std::size_t center_x() const { return nx / 2; }
  double coord_y(std::size_t iy) const { return (static_cast<double>(iy) - static_cast<double>(center_y())) * step_y; }
  double coord_x(std::size_t ix) const { return (static_cast<double>(ix) - static_cast<double>(center_x())) * step_x; }
  std::size_t pixels() const { return ny * nx; }

  friend bool operator==(const ScanGrid&, const ScanGrid&) = default;
};

inline bool same_shape(const ScanGrid& a, const ScanGrid& b) { return a.ny == b.ny && a.nx == b.nx; }

// Worker cap shared by the channel-parallel loops. Results never depend on it.
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}

inline void set_max_threads(unsigned n) { thread_cap().store(n); }

inline unsigned max_threads() {
  unsigned cap = thread_cap().load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

/// Runs fn(i) for i in [0, n). Each index must write only to its own output slot.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::size_t workers = std::min<std::size_t>(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Vertex offset of the parabola through (-1, ym), (0, y0), (+1, yp), clamped to [-0.5, 0.5].
inline double parabolic_offset(double ym, double y0, double yp) {
  double den = ym - 2.0 * y0 + yp;
  if (!(den < 0.0)) return 0.0;
  double d = 0.5 * (ym - yp) / den;
  return std::clamp(d, -0.5, 0.5);
}

}  // namespace ism
