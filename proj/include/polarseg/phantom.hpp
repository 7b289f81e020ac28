#ifndef POLARSEG_PHANTOM_HPP
#define POLARSEG_PHANTOM_HPP

#include <cstdint>
#include <string>

#include "polarseg/scan.hpp"

namespace polarseg {

// Synthetic scan with analytic ground truth: each slice holds a few
// rotated ellipses at inside_value over a background at outside_value, plus
// optional Gaussian noise. Ellipses stay fully inside the frame and their
// bounding circles keep a 2 px gap, so components never merge.
struct PhantomSpec {
  int height = 256;
  int width = 256;
  int slice_count = 64;
  int min_components = 1;
  int max_components = 3;
  double min_axis = 12.0;
  double max_axis = 30.0;
  double inside_value = 350.0;   // HU, mid-window for the CT defaults
  double outside_value = 0.0;    // HU
  double noise_sd = 0.0;         // HU
  std::uint64_t seed = 0;
  std::string scan_id = "phantom";

  void validate() const;
};

// Deterministic per (seed, slice index): slices can be generated in any
// order or in parallel with identical results. Throws ConfigError when an
// ellipse cannot be placed within the attempt cap.
ScanRecord generate_phantom(const PhantomSpec& spec);

}  // namespace polarseg

#endif  // POLARSEG_PHANTOM_HPP
