#ifndef POLARSEG_CCOMP_HPP
#define POLARSEG_CCOMP_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "polarseg/image.hpp"

namespace polarseg {

// One connected foreground region. `label` is 1-based; `pixel_list` holds
// (row, col) pairs in raster order.
struct Component {
  int label = 0;
  std::int64_t area = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  std::vector<std::pair<int, int>> pixel_list;
};

// Labeling of a mask: labels[i] == 0 is background, labels used are exactly
// 1..components.size() and assigned in raster order of each component's
// first pixel.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;
  std::vector<Component> components;

  std::int32_t at(int r, int c) const {
    return labels[static_cast<std::size_t>(r) * width + c];
  }
};

LabelMap label_components(const Mask2D& mask, int connectivity = 8);

// Drops components with area < min_area and relabels the survivors 1..n
// in their original order.
LabelMap filter_small(const LabelMap& lm, std::int64_t min_area);

// A pixel is foreground iff value > low and it reaches a pixel with
// value >= high through pixels with value > low.
Mask2D hysteresis_threshold(const Image2D& map, double low, double high,
                            int connectivity = 8);

}  // namespace polarseg

#endif  // POLARSEG_CCOMP_HPP
