#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ism/analysis.hpp"

using namespace ism;

TEST(GaussianFit, RecoversExactParameters) {
  std::vector<double> xs, ys;
  for (int i = -30; i <= 30; ++i) {
    xs.push_back(10.0 * i);
    ys.push_back(7.5 * std::exp(-0.5 * std::pow((10.0 * i - 13.0) / 42.0, 2)));
  }
  const GaussianFit f = fit_gaussian(xs, ys);
  EXPECT_NEAR(f.amplitude, 7.5, 1e-9);
  EXPECT_NEAR(f.mean, 13.0, 1e-8);
  EXPECT_NEAR(f.sigma, 42.0, 1e-8);
  EXPECT_NEAR(f.fwhm, 42.0 * 2.0 * std::sqrt(2.0 * std::log(2.0)), 1e-7);
  EXPECT_LT(f.mean_err, 1e-6);
}

TEST(GaussianFit, UncertaintyScalesWithNoise) {
  // Deterministic +-eps perturbation: s^2 = RSS/(n-3) grows as eps^2, so errors grow as eps.
  auto fit_with = [](double eps) {
    std::vector<double> xs, ys;
    for (int i = -20; i <= 20; ++i) {
      xs.push_back(i);
      ys.push_back(std::exp(-0.5 * i * i / 25.0) + (i % 2 ? eps : -eps));
    }
    return fit_gaussian(xs, ys);
  };
  const GaussianFit a = fit_with(1e-3), b = fit_with(2e-3);
  EXPECT_NEAR(b.sigma_err / a.sigma_err, 2.0, 0.05);
  EXPECT_GT(a.mean_err, 0.0);
}

TEST(GaussianFit, ProfileNeedsFiveSamplesAboveHalfMax) {
  const ScanGrid g{21, 21, 10.0, 10.0};
  Image narrow(21, 21), wide(21, 21);
  for (std::size_t y = 0; y < 21; ++y)
    for (std::size_t x = 0; x < 21; ++x) {
      const double r2 = std::pow(g.coord_y(y), 2) + std::pow(g.coord_x(x), 2);
      narrow(y, x) = std::exp(-0.5 * r2 / 100.0);
      wide(y, x) = std::exp(-0.5 * r2 / 900.0);
    }
  EXPECT_THROW(fit_gaussian_profile(narrow, g), FitError);
  const GaussianFit f = fit_gaussian_profile(wide, g, Axis::y);
  EXPECT_NEAR(f.sigma, 30.0, 1e-6);
  EXPECT_NEAR(f.mean, 0.0, 1e-6);
}

TEST(GaussianFit, MeasureShiftCombinesErrors) {
  GaussianFit a, b;
  a.mean = 10.0;
  a.mean_err = 3.0;
  b.mean = 30.0;
  b.mean_err = 4.0;
  const Measurement m = measure_shift(a, b);
  EXPECT_DOUBLE_EQ(m.value, 20.0);
  EXPECT_DOUBLE_EQ(m.uncertainty, 5.0);
}

TEST(RadialSpectrum, DeltaAtOriginIsFlat) {
  const ScanGrid g{32, 32, 25.0, 25.0};
  Image img(32, 32);
  img(16, 16) = 32.0;  // unitary DFT of a centred delta: 32 / sqrt(1024) = 1 everywhere
  const RadialSpectrum s = radial_spectrum(img, g);
  ASSERT_FALSE(s.k.empty());
  EXPECT_DOUBLE_EQ(s.k.front(), 0.0);
  EXPECT_NEAR(s.k.back(), 0.5 / 25.0, 1e-15);
  for (double v : s.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(RadialSpectrum, BinZeroIsMeanTimesSqrtN) {
  const ScanGrid g{16, 24, 10.0, 10.0};
  Image img(16, 24);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = 1.0 + std::sin(static_cast<double>(i));
  const RadialSpectrum s = radial_spectrum(img, g);
  EXPECT_NEAR(s.values.front(), img.sum() / std::sqrt(16.0 * 24.0), 1e-10);
  EXPECT_EQ(s.k.size(), s.values.size());
  EXPECT_NE(s.to_csv().find("k_per_nm,spectrum"), std::string::npos);
}

TEST(RadialSpectrum, CosinePeaksAtItsFrequency) {
  const ScanGrid g{64, 64, 10.0, 10.0};
  Image img(64, 64);
  const double f = 8.0 / (64 * 10.0);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) img(y, x) = std::cos(2 * std::numbers::pi * f * g.coord_x(x));
  const RadialSpectrum s = radial_spectrum(img, g);
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.values.size(); ++i)
    if (s.values[i] > s.values[best]) best = i;
  EXPECT_NEAR(s.k[best], f, 1e-12);
}
