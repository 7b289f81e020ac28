#ifndef POLARSEG_SCAN_HPP
#define POLARSEG_SCAN_HPP

#include <optional>
#include <string>
#include <vector>

#include "polarseg/image.hpp"

namespace polarseg {

// One axial slice: intensity raster plus an optional ground-truth mask.
struct Slice {
  Image2D image;
  std::optional<Mask2D> truth;
};

// A scan is an ordered stack of slices sharing one identifier.
// Slice order is the acquisition order; indices into `slices` are the
// slice indices used everywhere else (datasets, reports, seeds).
struct ScanRecord {
  std::string scan_id;
  std::vector<Slice> slices;
  double spacing_row_mm = 1.0;
  double spacing_col_mm = 1.0;
  double spacing_slice_mm = 1.0;

  bool has_truth() const {
    for (const auto& s : slices)
      if (!s.truth.has_value()) return false;
    return !slices.empty();
  }
};

}  // namespace polarseg

#endif  // POLARSEG_SCAN_HPP
