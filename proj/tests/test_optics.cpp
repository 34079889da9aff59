#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ism/optics.hpp"

using namespace ism;

namespace {

OpticalConfig gaussian_config() {
  OpticalConfig c;
  c.lambda_exc_nm = 640.0;
  c.lambda_em_nm = 640.0;
  return c;
}

double sigma_of(double lambda, double na) { return 0.51 * lambda / na / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

// Gaussian integrated over a square of side s: product of normal CDF differences.
double box_gaussian(double dy, double dx, double sigma, double s) {
  auto axis = [&](double d) {
    const double k = 1.0 / (sigma * std::numbers::sqrt2);
    return 0.5 * (std::erf((d + 0.5 * s) * k) - std::erf((d - 0.5 * s) * k)) * sigma * std::sqrt(2.0 * std::numbers::pi) / s;
  };
  return axis(dy) * axis(dx);
}

}  // namespace

TEST(PsfModels, GaussianWidth) {
  EXPECT_DOUBLE_EQ(gaussian_fwhm_nm(640.0, 1.4), 0.51 * 640.0 / 1.4);
  const double fwhm = gaussian_fwhm_nm(660.0, 1.4);
  EXPECT_NEAR(psf_profile(PsfModel::gaussian, 660.0, 1.4, 0.5 * fwhm), 0.5, 1e-12);
}

TEST(PsfModels, AiryFirstZero) {
  const double r0 = airy_first_zero_nm(660.0, 1.4);
  EXPECT_NEAR(r0, 0.60983 * 660.0 / 1.4, 0.02);
  EXPECT_NEAR(psf_profile(PsfModel::airy_scalar, 660.0, 1.4, r0), 0.0, 1e-12);
  EXPECT_GT(psf_profile(PsfModel::airy_scalar, 660.0, 1.4, 0.9 * r0), 0.0);
  EXPECT_DOUBLE_EQ(psf_profile(PsfModel::airy_scalar, 660.0, 1.4, 0.0), 1.0);
}

TEST(OpticalConfig, Validation) {
  OpticalConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda_em_nm = 600.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.numerical_aperture = 1.6;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.array_side = 4;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(DetectorMap, RowMajorFromTopLeft) {
  const OpticalConfig cfg;
  const DetectorMap m = make_detector_map(cfg);
  ASSERT_EQ(m.channels(), 25u);
  const double p = 75000.0 / 450.0;
  EXPECT_DOUBLE_EQ(m.positions[0].y, -2 * p);
  EXPECT_DOUBLE_EQ(m.positions[0].x, -2 * p);
  EXPECT_DOUBLE_EQ(m.positions[1].x, -p);
  EXPECT_DOUBLE_EQ(m.positions[5].y, -p);
  EXPECT_EQ(m.central, 12u);
  EXPECT_EQ(m.channel_at(4, 4), 24u);
  EXPECT_FALSE(m.channel_at(5, 0));
}

TEST(DetectionPsf, PointPinholeIsShiftedEmission) {
  OpticalConfig cfg = gaussian_config();
  cfg.element_size_nm = 0.0;
  const ScanGrid g{33, 33, 20.0, 20.0};
  const Vec2 xd{-55.0, 31.0};
  const Image h = detection_psf(cfg, g, xd);
  const double s = sigma_of(640.0, 1.4);
  for (std::size_t y = 0; y < g.ny; y += 3)
    for (std::size_t x = 0; x < g.nx; x += 3) {
      const double dy = g.coord_y(y) - xd.y, dx = g.coord_x(x) - xd.x;
      EXPECT_NEAR(h(y, x), std::exp(-(dy * dy + dx * dx) / (2 * s * s)), 1e-14);
    }
}

TEST(DetectionPsf, SquareApertureMatchesErfIntegral) {
  OpticalConfig cfg = gaussian_config();
  const ScanGrid g{41, 41, 20.0, 20.0};
  const Vec2 xd{166.0, -83.0};
  const Image h = detection_psf(cfg, g, xd);
  const double s = sigma_of(640.0, 1.4), side = cfg.pinhole_side_nm();
  double worst = 0.0;
  for (std::size_t y = 0; y < g.ny; ++y)
    for (std::size_t x = 0; x < g.nx; ++x)
      worst = std::max(worst, std::abs(h(y, x) - box_gaussian(g.coord_y(y) - xd.y, g.coord_x(x) - xd.x, s, side)));
  EXPECT_LT(worst, 1e-9);
}

TEST(DetectionPsf, RejectsPositionOutsideGrid) {
  const ScanGrid g{9, 9, 20.0, 20.0};
  EXPECT_THROW(detection_psf(OpticalConfig{}, g, {0.0, 500.0}), ValidationError);
}

TEST(ExcitationPsf, WarnsWhenGridTruncatesEnergy) {
  Diagnostics small, large;
  excitation_psf(OpticalConfig{}, {8, 8, 20.0, 20.0}, &small);
  excitation_psf(OpticalConfig{}, {64, 64, 20.0, 20.0}, &large);
  EXPECT_EQ(small.warnings.size(), 1u);
  EXPECT_TRUE(large.warnings.empty());
}

TEST(PsfStack, ProductOfGaussiansOracle) {
  OpticalConfig cfg;
  cfg.element_size_nm = 0.0;
  const ScanGrid g{31, 31, 25.0, 25.0};
  const PsfStack st = psf_stack(cfg, g, false);
  const double se = sigma_of(cfg.lambda_exc_nm, 1.4), sd = sigma_of(cfg.lambda_em_nm, 1.4);
  const std::size_t c = 3;
  const Vec2 xd = st.detector.positions[c];
  for (std::size_t y = 0; y < g.ny; y += 4)
    for (std::size_t x = 0; x < g.nx; x += 4) {
      const double ry = g.coord_y(y), rx = g.coord_x(x);
      const double want = std::exp(-(ry * ry + rx * rx) / (2 * se * se)) *
                          std::exp(-((ry - xd.y) * (ry - xd.y) + (rx - xd.x) * (rx - xd.x)) / (2 * sd * sd));
      EXPECT_NEAR(st.channels[c](y, x), want, 1e-14);
    }
}

TEST(PsfStack, NormalisedAndPointSymmetric) {
  const ScanGrid g{41, 41, 20.0, 20.0};
  const PsfStack st = psf_stack(OpticalConfig{}, g);
  EXPECT_NEAR(st.total(), 1.0, 1e-12);
  // h(x | x_d) = h(-x | -x_d): channel c and 24 - c are 180-degree rotations.
  for (std::size_t c = 0; c < 25; ++c)
    for (std::size_t y = 0; y < g.ny; y += 5)
      for (std::size_t x = 0; x < g.nx; x += 5)
        EXPECT_NEAR(st.channels[c](y, x), st.channels[24 - c](g.ny - 1 - y, g.nx - 1 - x), 1e-15);
}

TEST(Fingerprint, CentralChannelBrightestAndSymmetric) {
  const PsfStack st = psf_stack(OpticalConfig{}, {41, 41, 20.0, 20.0});
  const Fingerprint f = fingerprint_from_psf(st);
  EXPECT_NEAR(f.total(), 1.0, 1e-12);
  for (int r = 0; r < 5; ++r)
    for (int q = 0; q < 5; ++q) {
      if (r != 2 || q != 2) {
        EXPECT_LT(f.at(r, q), f.at(2, 2));
      }
      EXPECT_NEAR(f.at(r, q), f.at(q, r), 1e-15);
      EXPECT_NEAR(f.at(r, q), f.at(4 - r, 4 - q), 1e-15);
    }
}

TEST(ShiftVectors, ProductOfGaussiansPeak) {
  // Peak of exp(-x^2/2se^2) exp(-(x-xd)^2/2sd^2) sits at xd se^2 / (se^2 + sd^2).
  OpticalConfig cfg;
  cfg.element_size_nm = 0.0;
  const ScanGrid g{181, 181, 5.0, 5.0};
  const PsfStack st = psf_stack(cfg, g);
  const ShiftVectors sv = shift_vectors_from_psf(st);
  const double se = sigma_of(cfg.lambda_exc_nm, 1.4), sd = sigma_of(cfg.lambda_em_nm, 1.4);
  const double ratio = se * se / (se * se + sd * sd);
  for (std::size_t c = 0; c < 25; ++c) {
    EXPECT_NEAR(sv.vectors[c].y, ratio * st.detector.positions[c].y, 0.1 * g.step_y);
    EXPECT_NEAR(sv.vectors[c].x, ratio * st.detector.positions[c].x, 0.1 * g.step_x);
    EXPECT_EQ(sv.status[c], ShiftStatus::ok);
  }
}

TEST(ShiftVectors, StokesShiftPullsBelowHalf) {
  const ScanGrid g{181, 181, 5.0, 5.0};
  const PsfStack st = psf_stack(OpticalConfig{}, g);
  const ShiftVectors sv = shift_vectors_from_psf(st);
  const auto c = *st.detector.channel_at(2, 4);
  EXPECT_LT(sv.vectors[c].x, 0.5 * st.detector.positions[c].x);
  EXPECT_GT(sv.vectors[c].x, 0.0);
}

TEST(ShiftVectors, AiryModelAlsoNearHalf) {
  OpticalConfig cfg;
  cfg.psf_model = PsfModel::airy_scalar;
  cfg.lambda_em_nm = cfg.lambda_exc_nm;
  const ScanGrid g{129, 129, 10.0, 10.0};
  const PsfStack st = psf_stack(cfg, g);
  const ShiftVectors sv = shift_vectors_from_psf(st);
  const auto c = *st.detector.channel_at(2, 3);
  EXPECT_NEAR(sv.vectors[c].x, 0.5 * st.detector.positions[c].x, 0.5 * g.step_x);
}

TEST(LocatePeak, FlagsDistantTies) {
  Image img(5, 5);
  img(1, 1) = 1.0;
  img(3, 4) = 1.0;
  EXPECT_FALSE(locate_peak(img, false).unique);
  img(3, 4) = 0.5;
  EXPECT_TRUE(locate_peak(img, false).unique);
}

TEST(OverlapRatio, DefaultGeometry) {
  // Array width 4 x 75 um + 50 um = 350 um; M = 450; step 80 nm.
  EXPECT_NEAR(overlap_ratio(OpticalConfig{}, 80.0), (350.0 - 36.0) / 350.0, 1e-12);
  EXPECT_THROW(overlap_ratio(OpticalConfig{}, 0.0), ValidationError);
}
