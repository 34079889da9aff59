#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "ism/core.hpp"
#include "ism/dataset.hpp"
#include "ism/optics.hpp"
#include "ism/reconstruct.hpp"

namespace ism {

enum class ContainerKind { dataset, psf, image };
enum class PayloadType { float64, uint32 };

inline std::string to_string(ContainerKind k) {
  switch (k) {
    case ContainerKind::dataset: return "dataset";
    case ContainerKind::psf: return "psf";
    case ContainerKind::image: return "image";
  }
  return "?";
}

inline std::string to_string(PayloadType t) { return t == PayloadType::uint32 ? "uint32" : "float64"; }

inline std::size_t payload_type_size(PayloadType t) { return t == PayloadType::uint32 ? 4 : 8; }

class ContainerError : public Error {
public:
  enum class Code { io, bad_magic, unsupported_version, malformed_header, dimension_mismatch, payload_length_mismatch, bad_dtype, wrong_kind };

  ContainerError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

private:
  Code code_;
};

inline constexpr std::string_view kContainerMagic = "ISMK0001";
inline constexpr int kContainerFormatVersion = 1;

/// JSON header plus a row-major (y, x, channel) payload. Counts payloads hold
/// integral values and are stored as uint32.
struct Container {
  nlohmann::json header = nlohmann::json::object();
  std::vector<double> payload;

  ContainerKind kind() const;
  PayloadType dtype() const;
  std::size_t ny() const { return header.at("dims").at(0).get<std::size_t>(); }
  std::size_t nx() const { return header.at("dims").at(1).get<std::size_t>(); }
  std::size_t nc() const { return header.at("dims").at(2).get<std::size_t>(); }

  /// Checks the header against the payload; throws ContainerError.
  void validate() const;

  friend bool operator==(const Container& a, const Container& b) {
    if (a.header != b.header || a.payload.size() != b.payload.size()) return false;
    return a.payload.empty() || std::memcmp(a.payload.data(), b.payload.data(), a.payload.size() * sizeof(double)) == 0;
  }
};

inline ContainerKind Container::kind() const {
  const std::string k = header.value("kind", "");
  if (k == "dataset") return ContainerKind::dataset;
  if (k == "psf") return ContainerKind::psf;
  if (k == "image") return ContainerKind::image;
  throw ContainerError(ContainerError::Code::malformed_header, "unknown container kind '" + k + "'");
}

inline PayloadType Container::dtype() const {
  const std::string t = header.value("dtype", "");
  if (t == "float64") return PayloadType::float64;
  if (t == "uint32") return PayloadType::uint32;
  throw ContainerError(ContainerError::Code::bad_dtype, "unsupported dtype '" + t + "'");
}

/// Header-only checks, independent of the payload.
inline void validate_header(const nlohmann::json& header) {
  using C = ContainerError::Code;
  if (!header.is_object()) throw ContainerError(C::malformed_header, "header is not a JSON object");
  if (header.value("format_version", -1) != kContainerFormatVersion)
    throw ContainerError(C::unsupported_version, "unsupported version " + header.value("format_version", nlohmann::json()).dump());
  Container probe{header, {}};
  (void)probe.kind();
  const PayloadType t = probe.dtype();
  const auto& dims = header.value("dims", nlohmann::json());
  if (!dims.is_array() || dims.size() != 3)
    throw ContainerError(C::malformed_header, "dims must hold three entries (y, x, channel)");
  std::size_t count = 1;
  for (const auto& d : dims) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw ContainerError(C::malformed_header, "dims must be positive integers");
    count *= d.get<std::size_t>();
  }
  if (header.value("axis_order", nlohmann::json()) != nlohmann::json{"y", "x", "channel"})
    throw ContainerError(C::malformed_header, "axis order must be (y, x, channel)");
  const auto bytes = header.value("payload_bytes", nlohmann::json());
  if (!bytes.is_number_unsigned()) throw ContainerError(C::malformed_header, "payload_bytes missing");
  if (count * payload_type_size(t) != bytes.get<std::size_t>())
    throw ContainerError(C::dimension_mismatch, "dimension mismatch: dims " + dims.dump() + " x " + std::to_string(payload_type_size(t)) +
                                                    " bytes != payload_bytes " + bytes.dump());
}

inline void Container::validate() const {
  using C = ContainerError::Code;
  validate_header(header);
  const std::size_t count = ny() * nx() * nc();
  if (payload.size() != count)
    throw ContainerError(C::payload_length_mismatch, "payload length mismatch: expected " + std::to_string(count) + " values, have " +
                                                         std::to_string(payload.size()));
  if (dtype() == PayloadType::uint32) {
    for (double v : payload)
      if (!(v >= 0.0) || v > std::numeric_limits<std::uint32_t>::max() || v != std::floor(v))
        throw ContainerError(C::bad_dtype, "uint32 payload holds a value outside the unsigned 32-bit range");
  }
}

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline nlohmann::json grid_json(const ScanGrid& g) { return {{"step_y_nm", g.step_y}, {"step_x_nm", g.step_x}}; }

inline nlohmann::json detector_json(const DetectorMap& d) {
  nlohmann::json pos = nlohmann::json::array(), lat = nlohmann::json::array();
  for (auto p : d.positions) pos.push_back({p.y, p.x});
  for (auto [r, q] : d.lattice) lat.push_back({r, q});
  return {{"side", d.side}, {"pitch_nm", d.pitch_nm}, {"positions_nm", pos}, {"lattice", lat},
          {"central", d.central ? nlohmann::json(*d.central) : nlohmann::json()}};
}

inline DetectorMap detector_from_json(const nlohmann::json& j) {
  DetectorMap d;
  d.side = j.at("side").get<int>();
  d.pitch_nm = j.at("pitch_nm").get<double>();
  for (const auto& p : j.at("positions_nm")) d.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& l : j.at("lattice")) d.lattice.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
  if (!j.at("central").is_null()) d.central = j.at("central").get<std::size_t>();
  if (d.lattice.size() != d.positions.size()) throw ValidationError("detector lattice and positions differ in length");
  return d;
}

inline nlohmann::json shifts_json(const ShiftVectors& s) {
  nlohmann::json v = nlohmann::json::array(), st = nlohmann::json::array();
  for (auto p : s.vectors) v.push_back({p.y, p.x});
  for (auto x : s.status) st.push_back(to_string(x));
  return {{"vectors_nm", v}, {"status", st}, {"refinement", s.refinement}};
}

inline ShiftVectors shifts_from_json(const nlohmann::json& j) {
  ShiftVectors s;
  for (const auto& p : j.at("vectors_nm")) s.vectors.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& x : j.at("status")) {
    const auto t = x.get<std::string>();
    s.status.push_back(t == "ok" ? ShiftStatus::ok : t == "ill_posed" ? ShiftStatus::ill_posed : ShiftStatus::unreliable);
  }
  s.refinement = j.value("refinement", "parabolic");
  return s;
}

inline nlohmann::json base_header(ContainerKind kind, PayloadType t, std::size_t ny, std::size_t nx, std::size_t nc) {
  return {{"format_version", kContainerFormatVersion},
          {"kind", to_string(kind)},
          {"dims", {ny, nx, nc}},
          {"axis_order", {"y", "x", "channel"}},
          {"dtype", to_string(t)},
          {"payload_bytes", ny * nx * nc * payload_type_size(t)}};
}

inline std::vector<double> interleave(const std::vector<Image>& channels, std::size_t ny, std::size_t nx) {
  const std::size_t nc = channels.size();
  std::vector<double> out(ny * nx * nc);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < ny * nx; ++i) out[i * nc + c] = channels[c][i];
  return out;
}

inline std::vector<Image> deinterleave(const Container& k) {
  const std::size_t ny = k.ny(), nx = k.nx(), nc = k.nc();
  std::vector<Image> out(nc, Image(ny, nx));
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < ny * nx; ++i) out[c][i] = k.payload[i * nc + c];
  return out;
}

inline void expect_kind(const Container& k, ContainerKind want) {
  k.validate();
  if (k.kind() != want)
    throw ContainerError(ContainerError::Code::wrong_kind, "expected a " + to_string(want) + " container, found " + to_string(k.kind()));
}

inline ScanGrid grid_from(const Container& k) {
  const auto& g = k.header.at("grid");
  ScanGrid grid{k.ny(), k.nx(), g.at("step_y_nm").get<double>(), g.at("step_x_nm").get<double>()};
  grid.validate();
  return grid;
}

}  // namespace detail

inline Container to_container(const IsmDataset& data) {
  data.validate();
  const PayloadType t = data.dtype == DataType::counts ? PayloadType::uint32 : PayloadType::float64;
  Container k;
  k.header = detail::base_header(ContainerKind::dataset, t, data.grid.ny, data.grid.nx, data.size());
  k.header["data_type"] = to_string(data.dtype);
  k.header["grid"] = detail::grid_json(data.grid);
  k.header["detector"] = detail::detector_json(data.detector);
  k.header["provenance"] = data.provenance;
  if (data.provenance.contains("noise") && data.provenance["noise"].contains("seed"))
    k.header["seed"] = data.provenance["noise"]["seed"];
  k.payload = detail::interleave(data.channels, data.grid.ny, data.grid.nx);
  k.validate();
  return k;
}

inline IsmDataset dataset_from(const Container& k) {
  detail::expect_kind(k, ContainerKind::dataset);
  IsmDataset d;
  d.grid = detail::grid_from(k);
  d.detector = detail::detector_from_json(k.header.at("detector"));
  d.dtype = k.header.value("data_type", "intensity") == "counts" ? DataType::counts : DataType::intensity;
  d.provenance = k.header.value("provenance", nlohmann::json::object());
  d.channels = detail::deinterleave(k);
  d.validate();
  return d;
}

inline Container to_container(const PsfStack& stack) {
  stack.grid.validate();
  Container k;
  k.header = detail::base_header(ContainerKind::psf, PayloadType::float64, stack.grid.ny, stack.grid.nx, stack.size());
  k.header["grid"] = detail::grid_json(stack.grid);
  k.header["detector"] = detail::detector_json(stack.detector);
  k.header["normalized"] = stack.normalized;
  k.header["provenance"] = nlohmann::json::object();
  k.payload = detail::interleave(stack.channels, stack.grid.ny, stack.grid.nx);
  k.validate();
  return k;
}

inline PsfStack psf_from(const Container& k) {
  detail::expect_kind(k, ContainerKind::psf);
  PsfStack s;
  s.grid = detail::grid_from(k);
  s.detector = detail::detector_from_json(k.header.at("detector"));
  s.normalized = k.header.value("normalized", false);
  s.channels = detail::deinterleave(k);
  if (s.channels.size() != s.detector.channels()) throw ValidationError("PSF channel count does not match its detector map");
  return s;
}

inline Container to_container(const ReconOutput& r) {
  r.grid.validate();
  Container k;
  k.header = detail::base_header(ContainerKind::image, PayloadType::float64, r.grid.ny, r.grid.nx, 1);
  k.header["grid"] = detail::grid_json(r.grid);
  k.header["method"] = to_string(r.method);
  k.header["iterations"] = r.iterations;
  k.header["flux_in"] = r.flux_in;
  k.header["flux_out"] = r.flux_out;
  k.header["shifts"] = r.shifts_used ? detail::shifts_json(*r.shifts_used) : nlohmann::json();
  k.header["provenance"] = r.provenance;
  k.payload.assign(r.image.values().begin(), r.image.values().end());
  k.validate();
  return k;
}

inline ReconOutput image_from(const Container& k) {
  detail::expect_kind(k, ContainerKind::image);
  if (k.nc() != 1) throw ContainerError(ContainerError::Code::dimension_mismatch, "dimension mismatch: image containers hold one channel");
  ReconOutput r;
  r.grid = detail::grid_from(k);
  r.method = method_from_string(k.header.value("method", "sum"));
  r.iterations = k.header.value("iterations", 0);
  r.flux_in = k.header.value("flux_in", 0.0);
  r.flux_out = k.header.value("flux_out", 0.0);
  if (k.header.contains("shifts") && !k.header["shifts"].is_null()) r.shifts_used = detail::shifts_from_json(k.header["shifts"]);
  r.provenance = k.header.value("provenance", nlohmann::json::object());
  r.image = Image(r.grid.ny, r.grid.nx);
  std::copy(k.payload.begin(), k.payload.end(), r.image.values().begin());
  return r;
}

/// Serialises to the on-disk byte layout.
inline std::string encode(const Container& k) {
  k.validate();
  const std::string head = k.header.dump();
  std::string out(kContainerMagic);
  detail::put_le(out, head.size(), 8);
  out += head;
  const bool u32 = k.dtype() == PayloadType::uint32;
  out.reserve(out.size() + k.payload.size() * (u32 ? 4 : 8));
  for (double v : k.payload) {
    if (u32)
      detail::put_le(out, static_cast<std::uint32_t>(v), 4);
    else
      detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

inline Container decode(std::string_view bytes, const std::string& source = "<memory>") {
  using C = ContainerError::Code;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || bytes.substr(0, 4) != kContainerMagic.substr(0, 4))
    throw ContainerError(C::bad_magic, "bad magic in '" + source + "': not an ISM container");
  if (bytes.substr(0, 8) != kContainerMagic)
    throw ContainerError(C::unsupported_version, "unsupported version '" + std::string(bytes.substr(4, 4)) + "' in '" + source + "'");
  if (bytes.size() < 16) throw ContainerError(C::malformed_header, "truncated header in '" + source + "'");
  const std::uint64_t hlen = detail::get_le(p + 8, 8);
  if (hlen > bytes.size() - 16) throw ContainerError(C::malformed_header, "truncated header in '" + source + "'");
  Container k;
  try {
    k.header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(C::malformed_header, "malformed header in '" + source + "': " + e.what());
  }
  const std::size_t start = 16 + hlen;
  const std::size_t have = bytes.size() - start;
  try {
    validate_header(k.header);
  } catch (const ContainerError& e) {
    throw ContainerError(e.code(), std::string(e.what()) + " in '" + source + "'");
  }
  const std::size_t expect = k.header.at("payload_bytes").get<std::size_t>();
  if (have != expect)
    throw ContainerError(C::payload_length_mismatch, "payload length mismatch in '" + source + "': header declares " + std::to_string(expect) +
                                                         " bytes, file holds " + std::to_string(have));
  const bool u32 = k.dtype() == PayloadType::uint32;
  const std::size_t w = u32 ? 4 : 8;
  k.payload.resize(have / w);
  for (std::size_t i = 0; i < k.payload.size(); ++i) {
    const std::uint64_t raw = detail::get_le(p + start + i * w, static_cast<int>(w));
    k.payload[i] = u32 ? static_cast<double>(raw) : std::bit_cast<double>(raw);
  }
  k.validate();
  return k;
}

inline void write_container(const Container& k, const std::filesystem::path& path) {
  const std::string bytes = encode(k);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(ContainerError::Code::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw ContainerError(ContainerError::Code::io, "failed writing '" + path.string() + "'");
}

inline Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(ContainerError::Code::io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ContainerError(ContainerError::Code::io, "failed reading '" + path.string() + "'");
  return decode(bytes, path.string());
}

}  // namespace ism
