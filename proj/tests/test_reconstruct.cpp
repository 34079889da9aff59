#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ism/reconstruct.hpp"
#include "ism/simulate.hpp"

using namespace ism;

namespace {

struct Scene {
  ScanGrid grid;
  PsfStack stack;
  Phantom object;
  IsmDataset clean;
};

Scene point_scene(std::size_t n = 64, double step = 40.0, double photons = 1e4) {
  Scene s;
  s.grid = {n, n, step, step};
  s.stack = psf_stack(OpticalConfig{}, s.grid);
  PhantomParams pp;
  pp.points_nm = {{0.0, 0.0}, {200.0, -240.0}};
  pp.photons_per_emitter = photons;
  s.object = make_phantom(PhantomKind::point_sources, s.grid, pp);
  s.clean = forward(s.object, s.stack);
  return s;
}

double max_rel_change(const Image& a, const Image& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d / a.max();
}

// One RL update written as plain nested loops over periodic indices. Kernel origin
// is the centre pixel, so h(d) lives at index wrap(d + centre).
Image brute_force_rl_step(const IsmDataset& data, const PsfStack& st, const Image& o) {
  const std::size_t ny = o.ny(), nx = o.nx();
  const long long cy = static_cast<long long>(ny / 2), cx = static_cast<long long>(nx / 2);
  auto w = [](long long i, std::size_t n) { return static_cast<std::size_t>(((i % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n)); };
  auto h = [&](std::size_t c, long long dy, long long dx) { return st.channels[c](w(dy + cy, ny), w(dx + cx, nx)); };
  Image out(ny, nx);
  for (std::size_t c = 0; c < data.size(); ++c) {
    Image ratio(ny, nx);
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        double m = 0.0;
        for (std::size_t zy = 0; zy < ny; ++zy)
          for (std::size_t zx = 0; zx < nx; ++zx)
            m += o(zy, zx) * h(c, static_cast<long long>(y) - static_cast<long long>(zy), static_cast<long long>(x) - static_cast<long long>(zx));
        ratio(y, x) = data.channels[c](y, x) / m;
      }
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        double acc = 0.0;
        for (std::size_t ry = 0; ry < ny; ++ry)
          for (std::size_t rx = 0; rx < nx; ++rx)
            acc += h(c, static_cast<long long>(ry) - static_cast<long long>(y), static_cast<long long>(rx) - static_cast<long long>(x)) * ratio(ry, rx);
        out(y, x) += acc;
      }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= o[i];
  return out;
}

}  // namespace

TEST(SumImage, PixelwiseSumConservesFlux) {
  const Scene s = point_scene(32);
  const ReconOutput r = sum_image(s.clean);
  double direct = 0.0;
  for (const auto& c : s.clean.channels) direct += c(16, 16);
  EXPECT_NEAR(r.image(16, 16), direct, 1e-9);
  EXPECT_NEAR(r.flux_out, s.clean.total(), 1e-9 * s.clean.total());
}

TEST(Fingerprint, DataFingerprintProportionalToPsfFingerprint) {
  const Scene s = point_scene(64);
  const Fingerprint fd = fingerprint_from_data(s.clean), fp = fingerprint_from_psf(s.stack);
  const double alpha = fd.total() / fp.total();
  for (std::size_t i = 0; i < fd.values.size(); ++i) EXPECT_NEAR(fd.values[i], alpha * fp.values[i], 1e-9 * fd.values[i]);
}

TEST(PhaseCorrelation, IntegerShiftsExact) {
  Image ref(32, 32);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = std::fmod(std::sin(1.7 * static_cast<double>(i)) * 1e4, 1.0) + 1.0;
  for (long long dy = -5; dy <= 5; dy += 2)
    for (long long dx = -5; dx <= 5; ++dx) {
      const Image r = phase_correlation(roll(ref, dy, dx), ref);
      const PeakLocation p = locate_peak(r, true, true);
      EXPECT_EQ(p.y - 16.0, static_cast<double>(dy));
      EXPECT_EQ(p.x - 16.0, static_cast<double>(dx));
    }
}

TEST(PhaseCorrelation, SpectralZerosIgnored) {
  // A constant image has a single nonzero frequency; correlation must stay finite.
  const Image a(8, 8, 1.0);
  const Image r = phase_correlation(a, a);
  for (double v : r.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(EstimateShifts, NoiseFreeMatchesPsfPeaks) {
  const ScanGrid g{64, 64, 20.0, 20.0};
  const PsfStack st = psf_stack(OpticalConfig{}, g);
  const IsmDataset d = forward(make_phantom(PhantomKind::point_sources, g), st);
  const ShiftVectors est = estimate_shifts(d), theory = shift_vectors_from_psf(st);
  for (std::size_t c = 0; c < d.size(); ++c) {
    EXPECT_EQ(est.status[c], ShiftStatus::ok);
    EXPECT_NEAR(est.vectors[c].y, theory.vectors[c].y, 0.25 * g.step_y);
    EXPECT_NEAR(est.vectors[c].x, theory.vectors[c].x, 0.25 * g.step_x);
  }
}

TEST(EstimateShifts, EmptyChannelImputedFromLinearFit) {
  const ScanGrid g{64, 64, 20.0, 20.0};
  const PsfStack st = psf_stack(OpticalConfig{}, g);
  IsmDataset d = forward(make_phantom(PhantomKind::point_sources, g), st);
  d.channels[0] = Image(g.ny, g.nx);
  const ShiftVectors est = estimate_shifts(d);
  EXPECT_EQ(est.status[0], ShiftStatus::unreliable);
  // Imputed value follows mu = s x_d with the slope of the opposite corner.
  EXPECT_NEAR(est.vectors[0].x, -est.vectors[24].x, 0.25 * g.step_x);
  EXPECT_NEAR(est.vectors[0].y, -est.vectors[24].y, 0.25 * g.step_y);
}

TEST(EstimateShifts, EmptyReferenceIsAnError) {
  const ScanGrid g{16, 16, 40.0, 40.0};
  IsmDataset d;
  d.grid = g;
  d.detector = square_detector(3, 100.0);
  d.channels.assign(9, Image(16, 16, 1.0));
  d.channels[4] = Image(16, 16);
  EXPECT_THROW(estimate_shifts(d), ValidationError);
}

TEST(Apr, IntegerShiftsRealignExactly) {
  const ScanGrid g{16, 16, 10.0, 10.0};
  IsmDataset d;
  d.grid = g;
  d.detector = square_detector(3, 10.0);
  Image base(16, 16);
  base(8, 8) = 5.0;
  base(3, 11) = 2.0;
  std::vector<Vec2> px;
  for (std::size_t c = 0; c < 9; ++c) {
    const auto [r, q] = d.detector.lattice[c];
    d.channels.push_back(roll(base, r - 1, q - 1));
    px.push_back({static_cast<double>(r - 1), static_cast<double>(q - 1)});
  }
  const ReconOutput out = apr(d, ShiftVectors::from_pixels(px, g));
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(out.image[i], 9.0 * base[i], 1e-12);
}

TEST(Apr, FractionalShiftsConserveFlux) {
  const Scene s = point_scene(64, 40.0);
  const ReconOutput out = apr(s.clean, shift_vectors_from_psf(s.stack));
  EXPECT_NEAR(out.flux_out, s.clean.total(), 1e-9 * s.clean.total());
  EXPECT_THROW(apr(s.clean, ShiftVectors{}), ValidationError);
}

TEST(Apr, SharperThanSum) {
  const Scene s = point_scene(64, 20.0);
  const ReconOutput a = apr(s.clean, estimate_shifts(s.clean));
  const ReconOutput sm = sum_image(s.clean);
  EXPECT_GT(a.image.max(), sm.image.max());
}

TEST(MirrorPsf, ReflectsAboutCentre) {
  Image h(5, 6);
  h(2, 3) = 1.0;  // centre
  h(1, 4) = 2.0;  // offset (-1, +1)
  const Image m = mirror_psf(h);
  EXPECT_EQ(m(2, 3), 1.0);
  EXPECT_EQ(m(3, 2), 2.0);
}

TEST(RichardsonLucy, MatchesNestedLoopOracle) {
  const ScanGrid g{8, 8, 50.0, 50.0};
  IsmDataset d;
  d.grid = g;
  d.detector = square_detector(1, 100.0);
  d.detector.positions = {{0.0, -60.0}, {30.0, 60.0}};
  d.detector.lattice = {{0, 0}, {0, 1}};
  d.detector.side = 2;
  d.detector.central.reset();
  PsfStack st;
  st.grid = g;
  st.detector = d.detector;
  for (std::size_t c = 0; c < 2; ++c) {
    Image h(8, 8);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.05 + std::abs(std::sin(0.3 * static_cast<double>(i * (c + 2))));
    st.channels.push_back(h);
    Image data(8, 8);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = 3.0 + std::abs(std::cos(0.7 * static_cast<double>(i + 5 * c)));
    d.channels.push_back(data);
  }
  st.normalize();
  Image init(8, 8);
  for (std::size_t i = 0; i < init.size(); ++i) init[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i));

  RlOptions opt;
  opt.iterations = 1;
  opt.initial = init;
  const ReconOutput fast = rl_deconvolve(d, st, opt);
  const Image slow = brute_force_rl_step(d, st, init);
  for (std::size_t i = 0; i < slow.size(); ++i) EXPECT_NEAR(fast.image[i], slow[i], 1e-10 * std::abs(slow[i]));
}

TEST(RichardsonLucy, ConservesFlux) {
  Scene s = point_scene(64);
  const IsmDataset noisy = add_poisson(s.clean, 3);
  for (int k : {1, 5, 50}) {
    RlOptions opt;
    opt.iterations = k;
    const ReconOutput r = rl_deconvolve(noisy, s.stack, opt);
    EXPECT_NEAR(r.flux_out, noisy.total(), 1e-9 * noisy.total()) << "iterations " << k;
  }
}

TEST(RichardsonLucy, TrueObjectIsFixedPoint) {
  const Scene s = point_scene(64);
  IsmDataset d = s.clean;
  d.channels = forward_model(s.object.image, s.stack);
  RlOptions opt;
  opt.iterations = 1;
  opt.initial = s.object.image;
  const ReconOutput r = rl_deconvolve(d, s.stack, opt);
  EXPECT_LE(max_rel_change(s.object.image, r.image), 1e-9);
}

TEST(RichardsonLucy, LikelihoodNonIncreasing) {
  const Scene s = point_scene(48);
  const IsmDataset noisy = add_poisson(s.clean, 9);
  std::vector<double> nll;
  RlOptions opt;
  opt.iterations = 12;
  opt.on_iteration = [&](int, const Image& e) { nll.push_back(negative_log_likelihood(noisy, s.stack, e)); };
  rl_deconvolve(noisy, s.stack, opt);
  ASSERT_EQ(nll.size(), 12u);
  for (std::size_t k = 1; k < nll.size(); ++k) EXPECT_LE(nll[k], nll[k - 1] + 1e-9 * std::abs(nll[k - 1]));
}

TEST(RichardsonLucy, ZeroPixelsStayZero) {
  const Scene s = point_scene(32);
  Image init(32, 32, 1.0);
  init(0, 0) = 0.0;
  RlOptions opt;
  opt.iterations = 3;
  opt.initial = init;
  EXPECT_EQ(rl_deconvolve(s.clean, s.stack, opt).image(0, 0), 0.0);
}

TEST(RichardsonLucy, RejectsUnnormalisedStack) {
  Scene s = point_scene(32);
  PsfStack raw = s.stack;
  for (auto& c : raw.channels) c *= 2.0;
  EXPECT_THROW(rl_deconvolve(s.clean, raw, {}), ValidationError);
  raw.normalized = false;
  EXPECT_THROW(rl_deconvolve(s.clean, raw, {}), ValidationError);
}

TEST(RichardsonLucy, BackgroundVariantAbsorbsOffset) {
  const Scene s = point_scene(48);
  const BackgroundModel bkg = BackgroundModel::constant(25, 0.5);
  const IsmDataset d = add_poisson(forward_with_background(s.object, s.stack, bkg), 4);
  RlOptions opt;
  opt.iterations = 20;
  const ReconOutput plain = rl_deconvolve(d, s.stack, opt);
  opt.background = &bkg;
  const ReconOutput with_b = rl_deconvolve(d, s.stack, opt);
  EXPECT_EQ(with_b.method, Method::rl_background);
  // Background photons are attributed to b, so the object flux approaches the emitter budget.
  EXPECT_LT(std::abs(with_b.flux_out - s.object.total_photons), std::abs(plain.flux_out - s.object.total_photons));
}

TEST(RichardsonLucy, ThreadCountDoesNotChangeResult) {
  const Scene s = point_scene(32);
  RlOptions opt;
  opt.iterations = 4;
  set_max_threads(1);
  const Image a = rl_deconvolve(s.clean, s.stack, opt).image;
  set_max_threads(3);
  const Image b = rl_deconvolve(s.clean, s.stack, opt).image;
  set_max_threads(0);
  EXPECT_TRUE(a == b);
}

TEST(NegativeLogLikelihood, ModelZeroWhereDataPositiveIsAnError) {
  const Scene s = point_scene(32);
  EXPECT_THROW(negative_log_likelihood(s.clean, s.stack, Image(32, 32)), ValidationError);
}
