#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ism/core.hpp"
#include "ism/dataset.hpp"
#include "ism/optics.hpp"
#include "ism/reconstruct.hpp"

namespace ism {

/// Keeps pixels with even indices on both scan axes (drops one pixel in two).
inline IsmDataset downsample(const IsmDataset& data, int factor = 2) {
  if (factor != 2) throw ValidationError("only a downsampling factor of 2 is supported");
  data.validate();
  IsmDataset out;
  out.grid = {(data.grid.ny + 1) / 2, (data.grid.nx + 1) / 2, 2.0 * data.grid.step_y, 2.0 * data.grid.step_x};
  out.detector = data.detector;
  out.dtype = data.dtype;
  out.provenance = data.provenance;
  out.provenance["downsample"] = 2;
  for (const auto& ch : data.channels) {
    Image d(out.grid.ny, out.grid.nx);
    for (std::size_t y = 0; y < d.ny(); ++y)
      for (std::size_t x = 0; x < d.nx(); ++x) d(y, x) = ch(2 * y, 2 * x);
    out.channels.push_back(std::move(d));
  }
  return out;
}

/// Each pixel becomes a 2x2 block holding the value in its top-left corner and zeros elsewhere.
inline IsmDataset zero_upsample(const IsmDataset& data) {
  data.validate();
  IsmDataset out;
  out.grid = {2 * data.grid.ny, 2 * data.grid.nx, 0.5 * data.grid.step_y, 0.5 * data.grid.step_x};
  out.detector = data.detector;
  out.dtype = data.dtype;
  out.provenance = data.provenance;
  out.provenance["zero_upsample"] = {{"factor", 2}, {"filled_corner", "top-left"}};
  for (const auto& ch : data.channels) {
    Image u(out.grid.ny, out.grid.nx);
    for (std::size_t y = 0; y < ch.ny(); ++y)
      for (std::size_t x = 0; x < ch.nx(); ++x) u(2 * y, 2 * x) = ch(y, x);
    out.channels.push_back(std::move(u));
  }
  return out;
}

namespace detail {

// Channels of the central 3x3 block, in row-major lattice order, plus the new map.
inline std::pair<std::vector<std::size_t>, DetectorMap> central_ring(const DetectorMap& det, bool include_center) {
  if (det.side < 3) throw ValidationError("central-ring selection needs a detector array of side 3 or more");
  if (!det.central) throw ValidationError("central-ring selection needs a central detector element");
  const auto [cr, cq] = det.lattice[*det.central];
  std::vector<std::size_t> picked;
  DetectorMap map;
  map.side = 3;
  map.pitch_nm = det.pitch_nm;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dq = -1; dq <= 1; ++dq) {
      if (dr == 0 && dq == 0 && !include_center) continue;
      auto c = det.channel_at(cr + dr, cq + dq);
      if (!c) throw ValidationError("detector lattice lacks an element of the central 3x3 block");
      if (dr == 0 && dq == 0) map.central = picked.size();
      picked.push_back(*c);
      map.lattice.emplace_back(dr + 1, dq + 1);
      map.positions.push_back(det.positions[*c]);
    }
  }
  return {picked, map};
}

}  // namespace detail

/// The 3x3 block of channels around the centre (8 when the centre is excluded).
inline IsmDataset select_central_ring(const IsmDataset& data, bool include_center = true) {
  auto [picked, map] = detail::central_ring(data.detector, include_center);
  IsmDataset out;
  out.grid = data.grid;
  out.detector = std::move(map);
  out.dtype = data.dtype;
  out.provenance = data.provenance;
  out.provenance["central_ring"] = {{"include_center", include_center}};
  for (auto c : picked) out.channels.push_back(data.channels[c]);
  return out;
}

/// Same selection applied to a PSF stack, renormalised to unit total when the input was normalised.
inline PsfStack select_central_ring(const PsfStack& stack, bool include_center = true) {
  auto [picked, map] = detail::central_ring(stack.detector, include_center);
  PsfStack out;
  out.grid = stack.grid;
  out.detector = std::move(map);
  for (auto c : picked) out.channels.push_back(stack.channels[c]);
  if (stack.normalized) out.normalize();
  return out;
}

/// Upsampling condition dx_s = 2 mu(dx_d), evaluated per axis.
struct SamplingReport {
  ShiftVectors shifts;
  Vec2 scan_step;         // nm
  Vec2 shift_per_pitch;   // mu(dx_d) per axis, nm
  Vec2 residual;          // |dx_s - 2 mu(dx_d)|, nm
  double tolerance_fraction = 0.1;
  bool satisfied_y = false;
  bool satisfied_x = false;

  bool satisfied() const { return satisfied_y && satisfied_x; }

  std::string to_text() const {
    std::ostringstream s;
    s << "scan_step_y_nm = " << scan_step.y << '\n'
      << "scan_step_x_nm = " << scan_step.x << '\n'
      << "shift_per_pitch_y_nm = " << shift_per_pitch.y << '\n'
      << "shift_per_pitch_x_nm = " << shift_per_pitch.x << '\n'
      << "residual_y_nm = " << residual.y << '\n'
      << "residual_x_nm = " << residual.x << '\n'
      << "tolerance_fraction = " << tolerance_fraction << '\n'
      << "satisfied_y = " << (satisfied_y ? "true" : "false") << '\n'
      << "satisfied_x = " << (satisfied_x ? "true" : "false") << '\n'
      << "satisfied = " << (satisfied() ? "true" : "false") << '\n';
    return s.str();
  }

  nlohmann::json to_json() const {
    return {{"scan_step_nm", {scan_step.y, scan_step.x}},
            {"shift_per_pitch_nm", {shift_per_pitch.y, shift_per_pitch.x}},
            {"residual_nm", {residual.y, residual.x}},
            {"tolerance_fraction", tolerance_fraction},
            {"satisfied_y", satisfied_y},
            {"satisfied_x", satisfied_x},
            {"satisfied", satisfied()}};
  }
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// mu(dx_d) per axis is the median of nearest-neighbour shift differences between
/// reliable channels; the condition holds when |dx_s - 2 mu(dx_d)| <= tol * dx_s.
inline SamplingReport check_sampling_condition(const ShiftVectors& shifts, const DetectorMap& det, const ScanGrid& grid,
                                               double tolerance_fraction = 0.1) {
  grid.validate();
  if (shifts.size() != det.channels()) throw ValidationError("shift-vectors do not match the detector map");
  if (!(tolerance_fraction >= 0.0)) throw ValidationError("tolerance must be non-negative");
  std::vector<double> dy, dx;
  for (std::size_t c = 0; c < det.channels(); ++c) {
    if (!shifts.reliable(c)) continue;
    const auto [r, q] = det.lattice[c];
    if (auto right = det.channel_at(r, q + 1); right && shifts.reliable(*right))
      dx.push_back(shifts.vectors[*right].x - shifts.vectors[c].x);
    if (auto below = det.channel_at(r + 1, q); below && shifts.reliable(*below))
      dy.push_back(shifts.vectors[*below].y - shifts.vectors[c].y);
  }
  if (dy.empty() || dx.empty()) throw ValidationError("fewer than 2 reliable neighbouring channels along an axis");

  SamplingReport rep;
  rep.shifts = shifts;
  rep.scan_step = {grid.step_y, grid.step_x};
  rep.shift_per_pitch = {detail::median(dy), detail::median(dx)};
  rep.residual = {std::abs(grid.step_y - 2.0 * rep.shift_per_pitch.y), std::abs(grid.step_x - 2.0 * rep.shift_per_pitch.x)};
  rep.tolerance_fraction = tolerance_fraction;
  rep.satisfied_y = rep.residual.y <= tolerance_fraction * grid.step_y;
  rep.satisfied_x = rep.residual.x <= tolerance_fraction * grid.step_x;
  return rep;
}

struct UpsampleOptions {
  Method method = Method::rl;
  int iterations = 30;
  const PsfStack* fine_psf = nullptr;       // required for rl; source of shifts for apr when given
  std::optional<ShiftVectors> shifts;       // nm; overrides every other shift source
  bool include_center = true;
  double tolerance_fraction = 0.1;
};

struct UpsampleResult {
  ReconOutput output;
  SamplingReport report;
  std::vector<std::string> warnings;
};

/// Central ring -> zero-insertion upsampling -> APR or multi-image RL on the fine grid.
inline UpsampleResult upsampled_reconstruct(const IsmDataset& coarse, const UpsampleOptions& opt = {}) {
  if (opt.method != Method::apr && opt.method != Method::rl)
    throw ValidationError("upsampled reconstruction supports the apr and rl methods");
  coarse.validate();
  const IsmDataset ring = select_central_ring(coarse, opt.include_center);

  std::optional<PsfStack> ring_psf;
  if (opt.fine_psf) {
    const PsfStack& fp = *opt.fine_psf;
    const bool grid_ok = fp.grid.ny == 2 * coarse.grid.ny && fp.grid.nx == 2 * coarse.grid.nx &&
                         std::abs(fp.grid.step_y - 0.5 * coarse.grid.step_y) <= 1e-9 * coarse.grid.step_y &&
                         std::abs(fp.grid.step_x - 0.5 * coarse.grid.step_x) <= 1e-9 * coarse.grid.step_x;
    if (!grid_ok) throw ValidationError("PSF stack is not sampled on the upsampled grid");
    if (fp.size() == ring.size() && fp.detector.side == 3)
      ring_psf = fp;
    else
      ring_psf = select_central_ring(fp, opt.include_center);
  }
  if (opt.method == Method::rl && !ring_psf) throw ValidationError("rl upsampling requires a PSF stack on the fine grid");

  ShiftVectors shifts;
  if (opt.shifts) {
    if (opt.shifts->size() == ring.size()) {
      shifts = *opt.shifts;
    } else {
      auto [picked, map] = detail::central_ring(coarse.detector, opt.include_center);
      if (opt.shifts->size() != coarse.size()) throw ValidationError("shift-vectors do not match the dataset");
      for (auto c : picked) {
        shifts.vectors.push_back(opt.shifts->vectors[c]);
        shifts.status.push_back(opt.shifts->status[c]);
      }
      shifts.refinement = opt.shifts->refinement;
    }
  } else if (ring_psf) {
    shifts = shift_vectors_from_psf(*ring_psf);
  } else {
    shifts = estimate_shifts(ring);
  }

  UpsampleResult res;
  res.report = check_sampling_condition(shifts, ring.detector, coarse.grid, opt.tolerance_fraction);
  if (!res.report.satisfied())
    res.warnings.push_back("sampling condition not met; upsampled reconstruction may show grid artifacts");

  const IsmDataset up = zero_upsample(ring);
  if (opt.method == Method::apr) {
    res.output = apr(up, shifts);
  } else {
    RlOptions rl;
    rl.iterations = opt.iterations;
    res.output = rl_deconvolve(up, *ring_psf, rl);
    res.output.shifts_used = shifts;
  }
  res.output.provenance["upsampled"] = {{"factor", 2}, {"channels", ring.size()}, {"include_center", opt.include_center},
                                        {"sampling", res.report.to_json()}};
  return res;
}

}  // namespace ism
