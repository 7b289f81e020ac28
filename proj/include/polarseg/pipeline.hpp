#ifndef POLARSEG_PIPELINE_HPP
#define POLARSEG_PIPELINE_HPP

#include <utility>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/scan.hpp"
#include "polarseg/segmenter.hpp"

namespace polarseg {

enum class FusionNorm {
  OwnMax,          // divide by the summed map's own maximum
  TheoreticalMax,  // divide by origin_weight + (N-1)*other_weight, clamp to 1
};

struct FusionConfig {
  double origin_weight = 2.0;
  double other_weight = 1.0;
  double binarize_threshold = 0.5;
  double hyst_low = 0.0;
  double hyst_high = 0.4;
  int connectivity = 8;
  std::int64_t min_component_area = 4;
  FusionNorm norm = FusionNorm::OwnMax;
  int radial_bins = 256;
  int angular_bins = 256;

  void validate() const;
};

// One polar pass: the geometry used and the prediction mapped back to the
// cartesian frame.
struct PolarPass {
  PolarGeometry geometry;
  Image2D cart_probability;
};

struct SliceResult {
  Mask2D final_mask;
  Image2D confidence_map;
  Mask2D rough_mask;
  std::vector<PolarPass> per_component_predictions;
};

// First cascade stage: cartesian probability map thresholded at
// binarize_threshold (ties foreground), specks below min_component_area
// dropped.
Mask2D rough_segment(const Image2D& slice, SegmenterBackend& cart_backend,
                     const SliceRef& ref, const FusionConfig& cfg);

// One polar pass per rough component, origin at the component centroid.
// Each polar prediction is inverse-transformed to cartesian (bilinear,
// pad 0, clamped to [0,1]).
std::vector<PolarPass> polar_passes(const Image2D& slice, const Mask2D& rough,
                                    SegmenterBackend& polar_backend,
                                    const SliceRef& ref,
                                    const FusionConfig& cfg);

// Weighted component fusion: binarize each prediction, weight the component
// containing its origin (rounded centroid, clamped into bounds) with
// origin_weight and every other component with other_weight, sum, normalize.
Image2D fuse(const std::vector<PolarPass>& predictions,
             const FusionConfig& cfg);

SliceResult segment_slice(const Image2D& slice, SegmenterBackend& cart_backend,
                          SegmenterBackend& polar_backend, const SliceRef& ref,
                          const FusionConfig& cfg);

// Per-slice cascade over a scan. threads <= 1 runs serially; higher counts
// fan slices out to a worker pool. Output order and content are independent
// of scheduling. Backend errors get the slice index prefixed.
std::vector<SliceResult> segment_scan(const ScanRecord& scan,
                                      SegmenterBackend& cart_backend,
                                      SegmenterBackend& polar_backend,
                                      const FusionConfig& cfg,
                                      int threads = 1);

}  // namespace polarseg

#endif  // POLARSEG_PIPELINE_HPP
