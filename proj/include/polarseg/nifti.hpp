#ifndef POLARSEG_NIFTI_HPP
#define POLARSEG_NIFTI_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polarseg/image.hpp"
#include "polarseg/scan.hpp"

namespace polarseg {

// Single-file NIfTI-1 subset: magic "n+1", up to 3 spatial dims, image
// dtypes int16/uint16/float32 and label dtypes uint8/int16, optional
// scl_slope/scl_inter scaling. Detached headers ("ni1"), compression and
// higher-dimensional volumes are rejected with instructions to convert.
struct NiftiVolume {
  int nx = 0;  // columns, fastest-varying
  int ny = 0;  // rows
  int nz = 0;  // slices
  int datatype = 0;
  double spacing[3] = {1.0, 1.0, 1.0};  // pixdim 1..3 (col, row, slice mm)
  // Geometry block copied verbatim on write: pixdim, xyzt_units, qform and
  // sform fields, normalized to little-endian.
  std::vector<std::uint8_t> geometry;
  std::vector<Image2D> slices;  // scaled intensities, row = y, col = x
};

enum class VolumeKind { Image, Label };

// Pure byte-level parser; never reads past the buffer and never allocates
// before the declared data section has been bounds-checked. Malformed input
// raises ParseError naming field and offset.
NiftiVolume parse_volume(std::span<const std::uint8_t> bytes, VolumeKind kind);

NiftiVolume read_volume_file(const std::string& path, VolumeKind kind);

// Image volume as a scan (no truth attached).
ScanRecord read_volume(const std::string& path, const std::string& scan_id);

// Label volume binarized as value > 0 (after scaling when declared).
std::vector<Mask2D> read_label_volume(const std::string& path);

// uint8 {0,1} volume; geometry fields come from `reference`. The mask stack
// must match the reference dims exactly (checked before any write).
void write_mask_volume(const std::vector<Mask2D>& masks,
                       const NiftiVolume& reference, const std::string& path);

// float32 volume with the same geometry-copy rule.
void write_float_volume(const std::vector<Image2D>& slices,
                        const NiftiVolume& reference, const std::string& path);

// Builds an in-memory reference (no pixel data) for writers that have no
// source file to copy geometry from, e.g. phantom output.
NiftiVolume make_reference(int nx, int ny, int nz, double spacing_col_mm,
                           double spacing_row_mm, double spacing_slice_mm);

}  // namespace polarseg

#endif  // POLARSEG_NIFTI_HPP
