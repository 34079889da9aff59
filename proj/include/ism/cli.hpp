#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ism/analysis.hpp"
#include "ism/container.hpp"
#include "ism/image_io.hpp"
#include "ism/optics.hpp"
#include "ism/reconstruct.hpp"
#include "ism/resample.hpp"
#include "ism/simulate.hpp"
#include "ism/tiff.hpp"

namespace ism::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

namespace detail {

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

struct GridArgs {
  double step_nm = 40.0;
  std::size_t size = 64;
  ScanGrid grid() const { return {size, size, step_nm, step_nm}; }
};

struct OpticsArgs {
  OpticalConfig cfg;
  std::string model = "gaussian";

  OpticalConfig resolved() const {
    OpticalConfig c = cfg;
    c.psf_model = psf_model_from_string(model);
    c.validate();
    return c;
  }
};

inline void add_optics(CLI::App* sub, OpticsArgs& o) {
  sub->add_option("--lambda-exc-nm", o.cfg.lambda_exc_nm, "excitation wavelength (nm)");
  sub->add_option("--lambda-em-nm", o.cfg.lambda_em_nm, "emission wavelength (nm)");
  sub->add_option("--na", o.cfg.numerical_aperture, "numerical aperture");
  sub->add_option("--refractive-index", o.cfg.refractive_index, "immersion refractive index");
  sub->add_option("--magnification", o.cfg.magnification, "total magnification onto the detector");
  sub->add_option("--array-side", o.cfg.array_side, "detector elements per side (odd)");
  sub->add_option("--element-size-nm", o.cfg.element_size_nm, "detector element side (nm, detector plane)");
  sub->add_option("--element-pitch-nm", o.cfg.element_pitch_nm, "detector element pitch (nm, detector plane)");
  sub->add_option("--psf-model", o.model, "gaussian | airy_scalar")->check(CLI::IsMember({"gaussian", "airy_scalar"}));
}

inline void add_grid(CLI::App* sub, GridArgs& g) {
  sub->add_option("--step-nm", g.step_nm, "scan step (nm)");
  sub->add_option("--size", g.size, "scan grid side (pixels)");
}

inline nlohmann::json optics_json(const OpticalConfig& c) {
  return {{"lambda_exc_nm", c.lambda_exc_nm},     {"lambda_em_nm", c.lambda_em_nm},       {"na", c.numerical_aperture},
          {"refractive_index", c.refractive_index}, {"magnification", c.magnification},   {"array_side", c.array_side},
          {"element_size_nm", c.element_size_nm},   {"element_pitch_nm", c.element_pitch_nm}, {"psf_model", to_string(c.psf_model)}};
}

// Every option of a subcommand with its resolved value (given or default).
inline nlohmann::json resolved_options(const CLI::App* sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const std::string name = opt->get_lnames().front();
    if (name == "output") continue;  // output location does not affect content
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else if (opt->get_expected_max() == 0) {
      j[name] = false;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

inline nlohmann::json provenance_for(const CLI::App* sub) {
  return {{"command", sub->get_name()}, {"options", resolved_options(sub)}};
}

inline IsmDataset load_dataset(const std::string& path) { return dataset_from(read_container(path)); }
inline PsfStack load_psf(const std::string& path) { return psf_from(read_container(path)); }

inline Image image_or_sum(const Container& k, ScanGrid& grid) {
  if (k.kind() == ContainerKind::image) {
    auto r = image_from(k);
    grid = r.grid;
    return r.image;
  }
  if (k.kind() == ContainerKind::dataset) {
    auto r = sum_image(dataset_from(k));
    grid = r.grid;
    return r.image;
  }
  throw ValidationError("expected an image or dataset container");
}

inline std::vector<Vec2> parse_points(const std::string& s) {
  std::vector<Vec2> pts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw ValidationError("points are given as 'y,x;y,x;...' in nm");
    pts.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
  }
  return pts;
}

inline std::string shifts_csv(const ShiftVectors& s, const DetectorMap& det, const ScanGrid& grid) {
  std::ostringstream o;
  o << "channel,row,col,x_d_y_nm,x_d_x_nm,shift_y_nm,shift_x_nm,shift_y_px,shift_x_px,status\n";
  for (std::size_t c = 0; c < s.size(); ++c) {
    const auto [r, q] = det.lattice[c];
    o << c << ',' << r << ',' << q << ',' << num(det.positions[c].y) << ',' << num(det.positions[c].x) << ',' << num(s.vectors[c].y) << ','
      << num(s.vectors[c].x) << ',' << num(s.vectors[c].y / grid.step_y) << ',' << num(s.vectors[c].x / grid.step_x) << ','
      << to_string(s.status[c]) << '\n';
  }
  return o.str();
}

inline ShiftVectors read_shifts_csv(const std::string& path) {
  std::istringstream in(ism::detail::read_all(path));
  std::string line;
  std::getline(in, line);
  ShiftVectors s;
  s.refinement = "file";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 10) throw IoError("'" + path + "' is not a shift-vector CSV");
    s.vectors.push_back({std::stod(f[5]), std::stod(f[6])});
    s.status.push_back(f[9] == "ok" ? ShiftStatus::ok : f[9] == "ill_posed" ? ShiftStatus::ill_posed : ShiftStatus::unreliable);
  }
  return s;
}

inline std::string fingerprint_csv(const Fingerprint& f) {
  std::ostringstream o;
  o << "row,col,value\n";
  for (int r = 0; r < f.side; ++r)
    for (int q = 0; q < f.side; ++q) o << r << ',' << q << ',' << num(f.at(r, q)) << '\n';
  return o.str();
}

}  // namespace detail

/// Runs one command line. Returns 0 on success, 1 on usage errors, 2 on data errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Image scanning microscopy: simulation and reconstruction", "ism"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker thread cap (0 = all cores); results do not depend on it");

  std::function<void()> action;

  // simulate-psf
  OpticsArgs psf_optics;
  GridArgs psf_grid;
  std::string psf_out;
  bool psf_raw = false;
  auto* c_psf = app.add_subcommand("simulate-psf", "PSF stack h(x_s | x_d) for every detector element");
  add_optics(c_psf, psf_optics);
  add_grid(c_psf, psf_grid);
  c_psf->add_flag("--no-normalize", psf_raw, "keep raw values instead of unit total");
  c_psf->add_option("-o,--output", psf_out, "output container")->required();
  c_psf->callback([&] {
    action = [&] {
      Diagnostics diag;
      auto stack = psf_stack(psf_optics.resolved(), psf_grid.grid(), !psf_raw, &diag);
      for (const auto& w : diag.warnings) err << "warning: " << w << '\n';
      Container k = to_container(stack);
      k.header["provenance"] = provenance_for(c_psf);
      k.header["provenance"]["optics"] = optics_json(psf_optics.resolved());
      write_container(k, psf_out);
    };
  });

  // simulate-dataset
  OpticsArgs ds_optics;
  GridArgs ds_grid;
  std::string ds_phantom = "point-sources", ds_phantom_file, ds_points, ds_out;
  PhantomParams ds_params;
  double ds_total = 0.0, ds_background = 0.0;
  std::uint64_t ds_seed = 0;
  bool ds_no_noise = false;
  auto* c_ds = app.add_subcommand("simulate-dataset", "phantom -> forward model -> Poisson counts");
  add_optics(c_ds, ds_optics);
  add_grid(c_ds, ds_grid);
  c_ds->add_option("--phantom", ds_phantom, "point-sources | line-pairs | siemens-star | file")
      ->check(CLI::IsMember({"point-sources", "line-pairs", "siemens-star", "file"}));
  c_ds->add_option("--phantom-file", ds_phantom_file, "grayscale PGM or CSV used with --phantom file");
  c_ds->add_option("--points", ds_points, "explicit point positions 'y,x;y,x' (nm from the centre)");
  c_ds->add_option("--count", ds_params.count, "number of random point sources");
  c_ds->add_option("--margin-nm", ds_params.margin_nm, "keep random points this far from the edge (nm)");
  c_ds->add_option("--spacing-nm", ds_params.spacing_nm, "line-pair separation (nm)");
  c_ds->add_option("--line-length-nm", ds_params.line_length_nm, "line length (nm)");
  c_ds->add_option("--spokes", ds_params.spokes, "siemens star spoke pairs");
  c_ds->add_option("--radius-nm", ds_params.radius_nm, "siemens star radius (nm, 0 = automatic)");
  c_ds->add_option("--photons", ds_params.photons_per_emitter, "expected photons per unit of phantom value");
  c_ds->add_option("--total-photons", ds_total, "overrides the budget with a total photon count (0 = off)");
  c_ds->add_option("--background", ds_background, "constant background per pixel and channel (photons)");
  c_ds->add_flag("--no-noise", ds_no_noise, "write the noise-free intensity instead of counts");
  c_ds->add_option("--seed", ds_seed, "seed for random points and shot noise");
  c_ds->add_option("-o,--output", ds_out, "output container")->required();
  c_ds->callback([&] {
    action = [&] {
      const OpticalConfig cfg = ds_optics.resolved();
      const ScanGrid grid = ds_grid.grid();
      PhantomParams p = ds_params;
      p.seed = ds_seed;
      if (ds_total > 0.0) p.total_photons = ds_total;
      if (!ds_points.empty()) p.points_nm = parse_points(ds_points);
      Phantom ph;
      if (ds_phantom == "file") {
        if (ds_phantom_file.empty()) throw ValidationError("--phantom file needs --phantom-file");
        ph = phantom_from_image(read_grayscale(ds_phantom_file), grid, p);
      } else {
        ph = make_phantom(phantom_kind_from_string(ds_phantom), grid, p);
      }
      Diagnostics diag;
      const auto stack = psf_stack(cfg, grid, true, &diag);
      for (const auto& w : diag.warnings) err << "warning: " << w << '\n';
      IsmDataset d = ds_background > 0.0 ? forward_with_background(ph, stack, BackgroundModel::constant(stack.size(), ds_background))
                                         : forward(ph, stack);
      if (!ds_no_noise) d = add_poisson(d, ds_seed);
      nlohmann::json prov = provenance_for(c_ds);
      prov["optics"] = optics_json(cfg);
      prov["phantom_photons"] = ph.total_photons;
      prov.update(d.provenance);
      d.provenance = prov;
      write_container(to_container(d), ds_out);
    };
  });

  // sum
  std::string sum_in, sum_out;
  auto* c_sum = app.add_subcommand("sum", "pixel-wise sum over channels");
  c_sum->add_option("-i,--input", sum_in, "dataset container")->required();
  c_sum->add_option("-o,--output", sum_out, "output image container")->required();
  c_sum->callback([&] {
    action = [&] {
      auto r = sum_image(load_dataset(sum_in));
      r.provenance = provenance_for(c_sum);
      write_container(to_container(r), sum_out);
    };
  });

  // fingerprint
  std::string fp_in, fp_out;
  auto* c_fp = app.add_subcommand("fingerprint", "per-channel totals; CSV columns row,col,value");
  c_fp->add_option("-i,--input", fp_in, "dataset or PSF container")->required();
  c_fp->add_option("-o,--output", fp_out, "CSV output (stdout when omitted)");
  c_fp->callback([&] {
    action = [&] {
      const Container k = read_container(fp_in);
      const Fingerprint f = k.kind() == ContainerKind::psf ? fingerprint_from_psf(psf_from(k)) : fingerprint_from_data(dataset_from(k));
      const std::string csv = fingerprint_csv(f);
      if (fp_out.empty())
        out << csv;
      else
        write_text(fp_out, csv);
    };
  });

  // shifts
  std::string sh_in, sh_out;
  bool sh_integer = false;
  double sh_reliability = 3.0;
  auto* c_sh = app.add_subcommand("shifts", "shift-vectors from a PSF stack (peaks) or a dataset (phase correlation)");
  c_sh->add_option("-i,--input", sh_in, "dataset or PSF container")->required();
  c_sh->add_option("-o,--output", sh_out, "CSV output (stdout when omitted); columns channel,row,col,x_d_y_nm,x_d_x_nm,"
                                          "shift_y_nm,shift_x_nm,shift_y_px,shift_x_px,status");
  c_sh->add_flag("--integer", sh_integer, "integer-pixel peaks (no parabolic refinement)");
  c_sh->add_option("--reliability-factor", sh_reliability, "peak / median |correlogram| below this marks a channel unreliable");
  c_sh->callback([&] {
    action = [&] {
      const Container k = read_container(sh_in);
      std::string csv;
      if (k.kind() == ContainerKind::psf) {
        const auto stack = psf_from(k);
        csv = shifts_csv(shift_vectors_from_psf(stack, !sh_integer), stack.detector, stack.grid);
      } else {
        const auto d = dataset_from(k);
        csv = shifts_csv(estimate_shifts(d, {!sh_integer, sh_reliability}), d.detector, d.grid);
      }
      if (sh_out.empty())
        out << csv;
      else
        write_text(sh_out, csv);
    };
  });

  // apr
  std::string apr_in, apr_out, apr_shifts, apr_psf;
  bool apr_integer = false;
  auto* c_apr = app.add_subcommand("apr", "adaptive pixel reassignment");
  c_apr->add_option("-i,--input", apr_in, "dataset container")->required();
  c_apr->add_option("-o,--output", apr_out, "output image container")->required();
  c_apr->add_option("--shifts", apr_shifts, "shift-vector CSV (as written by 'shifts')");
  c_apr->add_option("--psf", apr_psf, "take shift-vectors from this PSF stack");
  c_apr->add_flag("--integer", apr_integer, "integer-pixel shift estimation");
  c_apr->callback([&] {
    action = [&] {
      const auto d = load_dataset(apr_in);
      ShiftVectors s;
      if (!apr_shifts.empty())
        s = read_shifts_csv(apr_shifts);
      else if (!apr_psf.empty())
        s = shift_vectors_from_psf(load_psf(apr_psf), !apr_integer);
      else
        s = estimate_shifts(d, {!apr_integer, 3.0});
      auto r = apr(d, s);
      r.provenance = provenance_for(c_apr);
      write_container(to_container(r), apr_out);
    };
  });

  // deconvolve
  std::string dc_in, dc_psf, dc_out, dc_log;
  int dc_iter = 5;
  double dc_background = 0.0;
  auto* c_dc = app.add_subcommand("deconvolve", "multi-image Richardson-Lucy");
  c_dc->add_option("-i,--input", dc_in, "dataset container")->required();
  c_dc->add_option("--psf", dc_psf, "PSF container on the same grid")->required();
  c_dc->add_option("-o,--output", dc_out, "output image container")->required();
  c_dc->add_option("--iterations", dc_iter, "RL iterations")->check(CLI::NonNegativeNumber);
  c_dc->add_option("--background", dc_background, "known constant background per pixel and channel (photons)");
  c_dc->add_option("--log", dc_log, "per-iteration CSV: iteration,nll,flux");
  c_dc->callback([&] {
    action = [&] {
      const auto d = load_dataset(dc_in);
      const auto stack = load_psf(dc_psf);
      std::optional<BackgroundModel> bkg;
      if (dc_background > 0.0) bkg = BackgroundModel::constant(d.size(), dc_background);
      RlOptions opt;
      opt.iterations = dc_iter;
      opt.background = bkg ? &*bkg : nullptr;
      std::ostringstream log;
      log << "iteration,nll,flux\n";
      if (!dc_log.empty()) {
        opt.on_iteration = [&](int k, const Image& est) {
          log << k << ',' << num(negative_log_likelihood(d, stack, est, opt.background)) << ',' << num(est.sum()) << '\n';
        };
      }
      auto r = rl_deconvolve(d, stack, opt);
      r.provenance = provenance_for(c_dc);
      write_container(to_container(r), dc_out);
      if (!dc_log.empty()) write_text(dc_log, log.str());
    };
  });

  // downsample
  std::string dn_in, dn_out;
  auto* c_dn = app.add_subcommand("downsample", "keep every second scan pixel on both axes");
  c_dn->add_option("-i,--input", dn_in, "dataset container")->required();
  c_dn->add_option("-o,--output", dn_out, "output dataset container")->required();
  c_dn->callback([&] {
    action = [&] {
      auto d = downsample(load_dataset(dn_in));
      d.provenance["downsample_command"] = provenance_for(c_dn);
      write_container(to_container(d), dn_out);
    };
  });

  // upsample-reconstruct
  std::string up_in, up_psf, up_out, up_method = "rl", up_shifts;
  int up_iter = 30;
  bool up_no_center = false;
  double up_tol = 0.1;
  auto* c_up = app.add_subcommand("upsample-reconstruct", "central 3x3 channels, 2x zero-insertion, then APR or RL");
  c_up->add_option("-i,--input", up_in, "coarse dataset container")->required();
  c_up->add_option("--psf", up_psf, "PSF stack on the 2x finer grid (required for rl)");
  c_up->add_option("-o,--output", up_out, "output image container")->required();
  c_up->add_option("--method", up_method, "rl | apr")->check(CLI::IsMember({"rl", "apr"}));
  c_up->add_option("--iterations", up_iter, "RL iterations")->check(CLI::NonNegativeNumber);
  c_up->add_option("--shifts", up_shifts, "shift-vector CSV in nm (overrides the PSF and estimation)");
  c_up->add_flag("--exclude-center", up_no_center, "use the 8 ring channels only");
  c_up->add_option("--tolerance", up_tol, "sampling-condition tolerance as a fraction of the scan step");
  c_up->callback([&] {
    action = [&] {
      const auto d = load_dataset(up_in);
      std::optional<PsfStack> stack;
      if (!up_psf.empty()) stack = load_psf(up_psf);
      UpsampleOptions opt;
      opt.method = method_from_string(up_method);
      opt.iterations = up_iter;
      opt.fine_psf = stack ? &*stack : nullptr;
      opt.include_center = !up_no_center;
      opt.tolerance_fraction = up_tol;
      if (!up_shifts.empty()) opt.shifts = read_shifts_csv(up_shifts);
      auto res = upsampled_reconstruct(d, opt);
      for (const auto& w : res.warnings) err << "warning: " << w << '\n';
      res.output.provenance["command"] = provenance_for(c_up);
      write_container(to_container(res.output), up_out);
    };
  });

  // check-sampling
  std::string cs_in, cs_psf, cs_out;
  double cs_tol = 0.1;
  auto* c_cs = app.add_subcommand("check-sampling", "tests dx_s = 2 mu(dx_d) per axis; prints a key = value report");
  c_cs->add_option("-i,--input", cs_in, "dataset container (its grid is the scan grid)")->required();
  c_cs->add_option("--psf", cs_psf, "take shift-vectors from this PSF stack instead of the data");
  c_cs->add_option("--tolerance", cs_tol, "tolerance as a fraction of the scan step");
  c_cs->add_option("-o,--output", cs_out, "also write the report as JSON");
  c_cs->callback([&] {
    action = [&] {
      const auto d = load_dataset(cs_in);
      SamplingReport rep;
      if (!cs_psf.empty()) {
        const auto stack = load_psf(cs_psf);
        rep = check_sampling_condition(shift_vectors_from_psf(stack), stack.detector, d.grid, cs_tol);
      } else {
        rep = check_sampling_condition(estimate_shifts(d), d.detector, d.grid, cs_tol);
      }
      out << rep.to_text();
      if (!cs_out.empty()) write_text(cs_out, rep.to_json().dump(2) + "\n");
    };
  });

  // spectrum
  std::string sp_in, sp_out;
  auto* c_sp = app.add_subcommand("spectrum", "radial spectrum; CSV columns k_per_nm,spectrum");
  c_sp->add_option("-i,--input", sp_in, "image container (a dataset is summed first)")->required();
  c_sp->add_option("-o,--output", sp_out, "CSV output (stdout when omitted)");
  c_sp->callback([&] {
    action = [&] {
      ScanGrid grid;
      const Image img = image_or_sum(read_container(sp_in), grid);
      const std::string csv = radial_spectrum(img, grid).to_csv();
      if (sp_out.empty())
        out << csv;
      else
        write_text(sp_out, csv);
    };
  });

  // fit-psf
  std::string fit_in, fit_out, fit_axis = "x";
  auto* c_fit = app.add_subcommand("fit-psf", "Gaussian fit through the brightest pixel; CSV columns quantity,value,uncertainty,unit");
  c_fit->add_option("-i,--input", fit_in, "image container (a dataset is summed first)")->required();
  c_fit->add_option("--axis", fit_axis, "profile axis: x | y")->check(CLI::IsMember({"x", "y"}));
  c_fit->add_option("-o,--output", fit_out, "CSV output (stdout when omitted)");
  c_fit->callback([&] {
    action = [&] {
      ScanGrid grid;
      const Image img = image_or_sum(read_container(fit_in), grid);
      const auto f = fit_gaussian_profile(img, grid, fit_axis == "y" ? Axis::y : Axis::x);
      std::ostringstream csv;
      csv << "quantity,value,uncertainty,unit\n"
          << "amplitude," << num(f.amplitude) << ',' << num(f.amplitude_err) << ",photons\n"
          << "mean," << num(f.mean) << ',' << num(f.mean_err) << ",nm\n"
          << "sigma," << num(f.sigma) << ',' << num(f.sigma_err) << ",nm\n"
          << "fwhm," << num(f.fwhm) << ',' << num(f.fwhm_err) << ",nm\n";
      if (fit_out.empty())
        out << csv.str();
      else
        write_text(fit_out, csv.str());
    };
  });

  // overlap
  OpticsArgs ov_optics;
  double ov_step = 80.0;
  auto* c_ov = app.add_subcommand("overlap", "overlap ratio between neighbouring scan positions and the detector array");
  add_optics(c_ov, ov_optics);
  c_ov->add_option("--step-nm", ov_step, "scan step (nm)");
  c_ov->callback([&] { action = [&] {
      const double r = overlap_ratio(ov_optics.resolved(), ov_step);
      out << "overlap_ratio = " << num(r) << '\n';
    }; });

  // import-tiff
  std::string tf_in, tf_out;
  double tf_step = 40.0, tf_pitch = 75'000.0 / 450.0;
  int tf_side = 5;
  auto* c_tf = app.add_subcommand("import-tiff", "multi-page TIFF (one page per channel) -> dataset container");
  c_tf->add_option("-i,--input", tf_in, "TIFF file")->required();
  c_tf->add_option("-o,--output", tf_out, "output dataset container")->required();
  c_tf->add_option("--step-nm", tf_step, "scan step (nm)");
  c_tf->add_option("--array-side", tf_side, "detector elements per side");
  c_tf->add_option("--pitch-nm", tf_pitch, "detector pitch projected onto the sample (nm)");
  c_tf->callback([&] {
    action = [&] {
      Container k = import_tiff_stack(tf_in, {0, 0, tf_step, tf_step}, square_detector(tf_side, tf_pitch));
      k.header["provenance"]["command"] = provenance_for(c_tf);
      write_container(k, tf_out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  set_max_threads(threads);
  try {
    if (action) action();
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"ism"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ism::cli
