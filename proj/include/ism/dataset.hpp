#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "ism/core.hpp"
#include "ism/optics.hpp"

namespace ism {

enum class DataType { counts, intensity };

inline std::string to_string(DataType t) { return t == DataType::counts ? "counts" : "intensity"; }

/// i(x_s | x_d): one scanned image per detector channel on a shared scan grid.
struct IsmDataset {
  ScanGrid grid;
  DetectorMap detector;
  DataType dtype = DataType::intensity;
  std::vector<Image> channels;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return channels.size(); }

  double total() const {
    std::vector<double> sums;
    for (const auto& c : channels) sums.push_back(c.sum());
    return accurate_sum(sums);
  }

  void validate() const {
    grid.validate();
    if (channels.size() != detector.channels())
      throw ValidationError("dataset has " + std::to_string(channels.size()) + " channels but the detector map has " +
                            std::to_string(detector.channels()));
    for (const auto& c : channels) {
      if (c.ny() != grid.ny || c.nx() != grid.nx) throw ValidationError("channel shape does not match the scan grid");
      for (double v : c.values()) {
        if (!(v >= 0.0)) throw ValidationError("dataset values must be non-negative");
        if (dtype == DataType::counts && v != std::floor(v)) throw ValidationError("counts dataset holds a non-integer value");
      }
    }
  }
};

}  // namespace ism
