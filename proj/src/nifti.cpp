#include "polarseg/nifti.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "polarseg/errors.hpp"

namespace polarseg {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kPixdimOff = 76;    // 8 floats
constexpr std::size_t kXyztOff = 123;     // 1 byte
constexpr std::size_t kQformOff = 252;    // int16 x2, then 18 floats, to 328
constexpr std::size_t kQformLen = 76;
// geometry = pixdim block + xyzt_units + qform/sform block
constexpr std::size_t kGeometryLen = 32 + 1 + kQformLen;

std::uint16_t swap16(std::uint16_t v) {
  return static_cast<std::uint16_t>((v >> 8) | (v << 8));
}

std::uint32_t swap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) |
         (v << 24);
}

class HeaderView {
 public:
  HeaderView(std::span<const std::uint8_t> bytes, bool swapped)
      : bytes_(bytes), swapped_(swapped) {}

  std::int16_t i16(std::size_t off) const {
    std::uint16_t v;
    std::memcpy(&v, bytes_.data() + off, 2);
    if (swapped_) v = swap16(v);
    return static_cast<std::int16_t>(v);
  }

  std::int32_t i32(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + off, 4);
    if (swapped_) v = swap32(v);
    return static_cast<std::int32_t>(v);
  }

  float f32(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + off, 4);
    if (swapped_) v = swap32(v);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }

  bool swapped() const { return swapped_; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swapped_;
};

void put_u16(std::vector<std::uint8_t>& buf, std::size_t off,
             std::uint16_t v) {
  std::memcpy(buf.data() + off, &v, 2);
}

void put_u32(std::vector<std::uint8_t>& buf, std::size_t off,
             std::uint32_t v) {
  std::memcpy(buf.data() + off, &v, 4);
}

void put_f32(std::vector<std::uint8_t>& buf, std::size_t off, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(buf, off, v);
}

// Copies pixdim, xyzt_units and the qform/sform block out of the header,
// normalized to little-endian regardless of the file's byte order.
std::vector<std::uint8_t> extract_geometry(const HeaderView& hdr,
                                           std::span<const std::uint8_t> raw) {
  std::vector<std::uint8_t> geom(kGeometryLen, 0);
  std::size_t out = 0;
  for (int i = 0; i < 8; ++i) {
    put_f32(geom, out, hdr.f32(kPixdimOff + 4 * static_cast<std::size_t>(i)));
    out += 4;
  }
  geom[out++] = raw[kXyztOff];
  // qform_code, sform_code
  put_u16(geom, out, static_cast<std::uint16_t>(hdr.i16(kQformOff)));
  put_u16(geom, out + 2, static_cast<std::uint16_t>(hdr.i16(kQformOff + 2)));
  out += 4;
  // quatern_b..qoffset_z and the three srow rows: 18 floats
  for (int i = 0; i < 18; ++i) {
    put_f32(geom, out,
            hdr.f32(kQformOff + 4 + 4 * static_cast<std::size_t>(i)));
    out += 4;
  }
  return geom;
}

int bytes_per_voxel(int datatype) {
  switch (datatype) {
    case 2: return 1;    // uint8
    case 4: return 2;    // int16
    case 512: return 2;  // uint16
    case 16: return 4;   // float32
    default: return 0;
  }
}

std::vector<std::uint8_t> build_header(const NiftiVolume& reference,
                                       int datatype, int nx, int ny, int nz) {
  std::vector<std::uint8_t> hdr(kHeaderSize, 0);
  put_u32(hdr, 0, 348);
  hdr[38] = 'r';
  put_u16(hdr, 40, 3);  // dim[0]
  put_u16(hdr, 42, static_cast<std::uint16_t>(nx));
  put_u16(hdr, 44, static_cast<std::uint16_t>(ny));
  put_u16(hdr, 46, static_cast<std::uint16_t>(nz));
  for (std::size_t d = 4; d <= 7; ++d) put_u16(hdr, 40 + 2 * d, 1);
  put_u16(hdr, 70, static_cast<std::uint16_t>(datatype));
  put_u16(hdr, 72, static_cast<std::uint16_t>(bytes_per_voxel(datatype) * 8));

  if (reference.geometry.size() == kGeometryLen) {
    std::memcpy(hdr.data() + kPixdimOff, reference.geometry.data(), 32);
    hdr[kXyztOff] = reference.geometry[32];
    std::memcpy(hdr.data() + kQformOff, reference.geometry.data() + 33,
                kQformLen);
  }

  put_f32(hdr, 108, 352.0f);  // vox_offset: header + 4 extension bytes
  put_f32(hdr, 112, 0.0f);    // scl_slope: no scaling
  put_f32(hdr, 116, 0.0f);
  hdr[344] = 'n';
  hdr[345] = '+';
  hdr[346] = '1';
  hdr[347] = '\0';
  return hdr;
}

void write_volume_bytes(const std::string& path,
                        const std::vector<std::uint8_t>& header,
                        const std::vector<std::uint8_t>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(header.data()),
          static_cast<std::streamsize>(header.size()));
  const char ext[4] = {0, 0, 0, 0};
  f.write(ext, 4);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("short write: " + path);
}

}  // namespace

NiftiVolume parse_volume(std::span<const std::uint8_t> bytes,
                         VolumeKind kind) {
  if (bytes.size() < kHeaderSize)
    throw ParseError("file shorter than the 348-byte header", "sizeof_hdr", 0);

  // Byte order is declared implicitly: dim[0] must land in [1,7] in exactly
  // one of the two readings.
  std::uint16_t dim0_le;
  std::memcpy(&dim0_le, bytes.data() + 40, 2);
  bool swapped;
  if (dim0_le >= 1 && dim0_le <= 7) {
    swapped = false;
  } else if (std::uint16_t sw = swap16(dim0_le); sw >= 1 && sw <= 7) {
    swapped = true;
  } else {
    throw ParseError("dim[0] out of [1,7] in both byte orders", "dim", 40);
  }
  const HeaderView hdr(bytes, swapped);

  if (hdr.i32(0) != 348)
    throw ParseError("sizeof_hdr is not 348", "sizeof_hdr", 0);

  const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
  if (std::memcmp(magic, "ni1", 4) == 0)
    throw ParseError(
        "detached-header variant unsupported; convert to single-file n+1",
        "magic", 344);
  if (std::memcmp(magic, "n+1", 4) != 0)
    throw ParseError("bad magic", "magic", 344);

  const int ndim = hdr.i16(40);
  std::int64_t dims[8] = {0, 1, 1, 1, 1, 1, 1, 1};
  for (int d = 1; d <= 7; ++d) {
    const std::int16_t v = hdr.i16(40 + 2 * static_cast<std::size_t>(d));
    if (d <= ndim) {
      if (v < 1)
        throw ParseError("non-positive dimension", "dim",
                         40 + 2 * static_cast<std::int64_t>(d));
      dims[d] = v;
    } else {
      dims[d] = 1;
    }
  }
  for (int d = 4; d <= 7; ++d)
    if (dims[d] != 1)
      throw ParseError("volumes beyond 3 dimensions unsupported", "dim",
                       40 + 2 * static_cast<std::int64_t>(d));

  const int datatype = hdr.i16(70);
  const bool ok_type = kind == VolumeKind::Image
                           ? (datatype == 4 || datatype == 512 ||
                              datatype == 16)
                           : (datatype == 2 || datatype == 4);
  if (!ok_type)
    throw ParseError("unsupported datatype " + std::to_string(datatype),
                     "datatype", 70);
  const int bpv = bytes_per_voxel(datatype);
  if (hdr.i16(72) != bpv * 8)
    throw ParseError("bitpix disagrees with datatype", "bitpix", 72);

  const float vox_offset_f = hdr.f32(108);
  if (!std::isfinite(vox_offset_f) || vox_offset_f < 348.0f ||
      vox_offset_f > 1e12f)
    throw ParseError("vox_offset outside the file", "vox_offset", 108);
  const auto vox_offset = static_cast<std::int64_t>(vox_offset_f);

  float slope = hdr.f32(112);
  float inter = hdr.f32(116);
  if (!std::isfinite(slope))
    throw ParseError("non-finite scl_slope", "scl_slope", 112);
  if (!std::isfinite(inter))
    throw ParseError("non-finite scl_inter", "scl_inter", 116);
  if (slope == 0.0f) {  // 0 means "no scaling declared"
    slope = 1.0f;
    inter = 0.0f;
  }

  const std::int64_t nx = dims[1], ny = dims[2], nz = dims[3];
  const std::int64_t numel = nx * ny * nz;
  const std::int64_t need = vox_offset + numel * bpv;
  if (need > static_cast<std::int64_t>(bytes.size()))
    throw ParseError("data section overruns the file", "data", vox_offset);

  for (int i = 1; i <= 3; ++i)
    if (!std::isfinite(hdr.f32(kPixdimOff + 4 * static_cast<std::size_t>(i))))
      throw ParseError("non-finite pixdim", "pixdim",
                       static_cast<std::int64_t>(kPixdimOff) + 4 * i);

  NiftiVolume vol;
  vol.nx = static_cast<int>(nx);
  vol.ny = static_cast<int>(ny);
  vol.nz = static_cast<int>(nz);
  vol.datatype = datatype;
  for (int i = 0; i < 3; ++i)
    vol.spacing[i] =
        hdr.f32(kPixdimOff + 4 * static_cast<std::size_t>(i + 1));
  vol.geometry = extract_geometry(hdr, bytes);

  const std::uint8_t* data = bytes.data() + vox_offset;
  auto voxel = [&](std::int64_t idx) -> double {
    const std::uint8_t* p = data + idx * bpv;
    switch (datatype) {
      case 2:
        return *p;
      case 4: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        if (swapped) v = swap16(v);
        return static_cast<std::int16_t>(v);
      }
      case 512: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        if (swapped) v = swap16(v);
        return v;
      }
      default: {  // 16: float32
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        if (swapped) v = swap32(v);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
      }
    }
  };

  vol.slices.reserve(static_cast<std::size_t>(nz));
  for (std::int64_t z = 0; z < nz; ++z) {
    Image2D slice(static_cast<int>(ny), static_cast<int>(nx));
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const double raw = voxel((z * ny + y) * nx + x);
        const double v = raw * slope + inter;
        if (!std::isfinite(v))
          throw ParseError("non-finite voxel value", "data",
                           vox_offset + ((z * ny + y) * nx + x) * bpv);
        slice.at(static_cast<int>(y), static_cast<int>(x)) =
            static_cast<float>(v);
      }
    }
    vol.slices.push_back(std::move(slice));
  }
  return vol;
}

NiftiVolume read_volume_file(const std::string& path, VolumeKind kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_volume(std::span<const std::uint8_t>(bytes), kind);
}

ScanRecord read_volume(const std::string& path, const std::string& scan_id) {
  NiftiVolume vol = read_volume_file(path, VolumeKind::Image);
  ScanRecord scan;
  scan.scan_id = scan_id;
  scan.spacing_col_mm = vol.spacing[0];
  scan.spacing_row_mm = vol.spacing[1];
  scan.spacing_slice_mm = vol.spacing[2];
  scan.slices.reserve(vol.slices.size());
  for (Image2D& s : vol.slices)
    scan.slices.push_back(Slice{std::move(s), std::nullopt});
  return scan;
}

std::vector<Mask2D> read_label_volume(const std::string& path) {
  const NiftiVolume vol = read_volume_file(path, VolumeKind::Label);
  std::vector<Mask2D> masks;
  masks.reserve(vol.slices.size());
  for (const Image2D& s : vol.slices) {
    Mask2D m(s.height, s.width);
    for (std::size_t i = 0; i < s.data.size(); ++i)
      m.data[i] = s.data[i] > 0.0f ? 1 : 0;
    masks.push_back(std::move(m));
  }
  return masks;
}

void write_mask_volume(const std::vector<Mask2D>& masks,
                       const NiftiVolume& reference, const std::string& path) {
  if (static_cast<int>(masks.size()) != reference.nz)
    throw ContractError("write_mask_volume: slice count differs from the "
                        "reference dims");
  for (const Mask2D& m : masks) {
    m.validate();
    if (m.height != reference.ny || m.width != reference.nx)
      throw ContractError("write_mask_volume: mask shape differs from the "
                          "reference dims");
  }

  std::vector<std::uint8_t> data;
  data.reserve(masks.size() * static_cast<std::size_t>(reference.ny) *
               reference.nx);
  for (const Mask2D& m : masks)
    for (std::uint8_t v : m.data) data.push_back(v ? 1 : 0);

  write_volume_bytes(
      path, build_header(reference, 2, reference.nx, reference.ny,
                         reference.nz),
      data);
}

void write_float_volume(const std::vector<Image2D>& slices,
                        const NiftiVolume& reference,
                        const std::string& path) {
  if (static_cast<int>(slices.size()) != reference.nz)
    throw ContractError("write_float_volume: slice count differs from the "
                        "reference dims");
  for (const Image2D& s : slices) {
    s.validate();
    if (s.height != reference.ny || s.width != reference.nx)
      throw ContractError("write_float_volume: slice shape differs from the "
                          "reference dims");
  }

  std::vector<std::uint8_t> data(slices.size() *
                                 static_cast<std::size_t>(reference.ny) *
                                 reference.nx * 4);
  std::size_t off = 0;
  for (const Image2D& s : slices) {
    std::memcpy(data.data() + off, s.data.data(), s.data.size() * 4);
    off += s.data.size() * 4;
  }

  write_volume_bytes(
      path, build_header(reference, 16, reference.nx, reference.ny,
                         reference.nz),
      data);
}

NiftiVolume make_reference(int nx, int ny, int nz, double spacing_col_mm,
                           double spacing_row_mm, double spacing_slice_mm) {
  NiftiVolume ref;
  ref.nx = nx;
  ref.ny = ny;
  ref.nz = nz;
  ref.spacing[0] = spacing_col_mm;
  ref.spacing[1] = spacing_row_mm;
  ref.spacing[2] = spacing_slice_mm;

  ref.geometry.assign(kGeometryLen, 0);
  put_f32(ref.geometry, 0, 1.0f);  // pixdim[0]: qfac
  put_f32(ref.geometry, 4, static_cast<float>(spacing_col_mm));
  put_f32(ref.geometry, 8, static_cast<float>(spacing_row_mm));
  put_f32(ref.geometry, 12, static_cast<float>(spacing_slice_mm));
  ref.geometry[32] = 2 | 8;  // millimetres, seconds
  // sform identity scaled by spacing; qform absent.
  put_u16(ref.geometry, 33 + 2, 1);  // sform_code
  const std::size_t srow = 33 + 4 + 6 * 4;
  put_f32(ref.geometry, srow + 0, static_cast<float>(spacing_col_mm));
  put_f32(ref.geometry, srow + 20, static_cast<float>(spacing_row_mm));
  put_f32(ref.geometry, srow + 40, static_cast<float>(spacing_slice_mm));
  return ref;
}

}  // namespace polarseg
