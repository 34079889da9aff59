#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ism/core.hpp"
#include "ism/fft.hpp"
#include "ism/random.hpp"

using namespace ism;

namespace {

Image ramp(std::size_t ny, std::size_t nx) {
  Image img(ny, nx);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::sin(0.37 * static_cast<double>(i)) + 1.5;
  return img;
}

}  // namespace

TEST(Image, RowMajorIndexing) {
  Image img(2, 3);
  img(1, 2) = 7.0;
  EXPECT_EQ(img[5], 7.0);
  EXPECT_EQ(img.argmax(), (std::pair<std::size_t, std::size_t>{1, 2}));
}

TEST(AccurateSum, CompensatesCancellation) {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  EXPECT_EQ(accurate_sum(v), 2.0);
}

TEST(ScanGrid, CentreIsFloorHalf) {
  ScanGrid g{5, 4, 10.0, 20.0};
  EXPECT_EQ(g.center_y(), 2u);
  EXPECT_EQ(g.center_x(), 2u);
  EXPECT_DOUBLE_EQ(g.coord_y(0), -20.0);
  EXPECT_DOUBLE_EQ(g.coord_x(3), 20.0);
  EXPECT_THROW((ScanGrid{0, 4, 1.0, 1.0}.validate()), ValidationError);
  EXPECT_THROW((ScanGrid{4, 4, -1.0, 1.0}.validate()), ValidationError);
}

TEST(ParallelFor, PropagatesExceptions) {
  set_max_threads(4);
  EXPECT_THROW(parallel_for(16, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  std::vector<int> hit(32, 0);
  parallel_for(hit.size(), [&](std::size_t i) { hit[i] = 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  set_max_threads(0);
}

TEST(Parabolic, VertexOfSampledParabola) {
  auto f = [](double x) { return 3.0 - (x - 0.3) * (x - 0.3); };
  EXPECT_NEAR(parabolic_offset(f(-1), f(0), f(1)), 0.3, 1e-12);
  EXPECT_EQ(parabolic_offset(1.0, 1.0, 1.0), 0.0);
}

TEST(Fft, RoundTrip) {
  const Image img = ramp(6, 10);
  const Image back = ifft2_real(fft2(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 1e-12);
}

TEST(Fft, MatchesDirectDft) {
  const Image img = ramp(3, 5);
  const Spectrum s = fft2(img);
  for (std::size_t ky = 0; ky < 3; ++ky) {
    for (std::size_t kx = 0; kx < 5; ++kx) {
      cplx acc = 0.0;
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 5; ++x)
          acc += img(y, x) * std::polar(1.0, -2.0 * std::numbers::pi * (static_cast<double>(ky * y) / 3.0 + static_cast<double>(kx * x) / 5.0));
      EXPECT_NEAR(std::abs(s(ky, kx) - acc), 0.0, 1e-12);
    }
  }
}

TEST(Roll, MovesContentForward) {
  Image img(4, 4);
  img(0, 0) = 1.0;
  const Image r = roll(img, 1, -1);
  EXPECT_EQ(r(1, 3), 1.0);
  EXPECT_EQ(r.sum(), 1.0);
}

TEST(FourierShift, IntegerShiftEqualsRoll) {
  const Image img = ramp(8, 6);
  const Image a = fourier_shift(img, 2.0, -3.0);
  const Image b = roll(img, 2, -3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(FourierShift, HalfPixelOfBandlimitedCosine) {
  const std::size_t n = 16;
  Image img(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) img(y, x) = std::cos(2.0 * std::numbers::pi * 2.0 * static_cast<double>(x) / n);
  const Image s = fourier_shift(img, 0.0, 0.5);
  for (std::size_t x = 0; x < n; ++x)
    EXPECT_NEAR(s(3, x), std::cos(2.0 * std::numbers::pi * 2.0 * (static_cast<double>(x) - 0.5) / n), 1e-12);
}

TEST(CircularConvolve, MatchesBruteForce) {
  const Image img = ramp(5, 6);
  Image k(3, 3);
  for (std::size_t i = 0; i < 9; ++i) k[i] = 0.1 * static_cast<double>(i + 1);
  const Image fast = circular_convolve(img, centered_kernel_spectrum(zero_pad(k, 5, 6)));
  // Kernel centre after zero_pad stays at (1, 1); the spectrum helper shifts the kernel by floor(n/2).
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      double acc = 0.0;
      for (std::size_t ky = 0; ky < 5; ++ky) {
        for (std::size_t kx = 0; kx < 6; ++kx) {
          const double kv = ky < 3 && kx < 3 ? k(ky, kx) : 0.0;
          const long long sy = static_cast<long long>(y) - (static_cast<long long>(ky) - 2);
          const long long sx = static_cast<long long>(x) - (static_cast<long long>(kx) - 3);
          acc += kv * img(wrap_index(sy, 5), wrap_index(sx, 6));
        }
      }
      EXPECT_NEAR(fast(y, x), acc, 1e-12);
    }
  }
}

TEST(CounterRng, DeterministicAndUniform) {
  CounterRng a(5, 9), b(5, 9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CounterRng r(1, static_cast<std::uint64_t>(i));
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u / n;
  }
  EXPECT_NEAR(mean, 0.5, 0.01);
}

class PoissonMoments : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMoments, MeanAndVariance) {
  const double lambda = GetParam();
  const int n = 40000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    CounterRng r(42, static_cast<std::uint64_t>(i));
    const double k = static_cast<double>(poisson_sample(lambda, r));
    s += k;
    s2 += k * k;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  // 5 standard errors on the mean; 10% on the variance.
  EXPECT_NEAR(mean, lambda, 5.0 * std::sqrt(lambda / n) + 1e-12);
  EXPECT_NEAR(var, lambda, 0.1 * lambda + 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Means, PoissonMoments, ::testing::Values(0.3, 4.0, 9.99, 10.0, 55.0, 1e4));

TEST(Poisson, ZeroMeanGivesZero) {
  CounterRng r(0, 0);
  EXPECT_EQ(poisson_sample(0.0, r), 0u);
}
