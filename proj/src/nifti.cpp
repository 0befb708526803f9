// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/nifti.hpp"

#include "mpvqa/error.hpp"
#include "mpvqa/file_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace mpvqa {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

// Byte offsets inside the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t qoffset_x = 268;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
}  // namespace off

template <class T>
T load(const std::uint8_t* p, bool swap) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (swap) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <class T>
void store(std::uint8_t* p, T v) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  std::memcpy(p, &v, sizeof(T));
}

double load_element(const std::uint8_t* p, int code, bool swap) {
  switch (code) {
    case dt::uint8: return p[0];
    case dt::int8: return static_cast<std::int8_t>(p[0]);
    case dt::int16: return load<std::int16_t>(p, swap);
    case dt::uint16: return load<std::uint16_t>(p, swap);
    case dt::int32: return load<std::int32_t>(p, swap);
    case dt::uint32: return load<std::uint32_t>(p, swap);
    case dt::int64: return static_cast<double>(load<std::int64_t>(p, swap));
    case dt::uint64: return static_cast<double>(load<std::uint64_t>(p, swap));
    case dt::float32: return load<float>(p, swap);
    case dt::float64: return load<double>(p, swap);
    default: throw UnsupportedDatatypeError("unsupported NIfTI datatype " + std::to_string(code));
  }
}

template <class T>
void store_checked(std::uint8_t* p, double v) {
  if constexpr (std::is_integral_v<T>) {
    if (v != std::floor(v) || v < static_cast<double>(std::numeric_limits<T>::min()) ||
        v > static_cast<double>(std::numeric_limits<T>::max()))
      throw CapacityError("voxel value " + std::to_string(v) + " does not fit the datatype");
  }
  store<T>(p, static_cast<T>(v));
}

void store_element(std::uint8_t* p, int code, double v) {
  switch (code) {
    case dt::uint8: return store_checked<std::uint8_t>(p, v);
    case dt::int8: return store_checked<std::int8_t>(p, v);
    case dt::int16: return store_checked<std::int16_t>(p, v);
    case dt::uint16: return store_checked<std::uint16_t>(p, v);
    case dt::int32: return store_checked<std::int32_t>(p, v);
    case dt::uint32: return store_checked<std::uint32_t>(p, v);
    case dt::int64: return store_checked<std::int64_t>(p, v);
    case dt::uint64: return store_checked<std::uint64_t>(p, v);
    case dt::float32: return store<float>(p, static_cast<float>(v));
    case dt::float64: return store<double>(p, v);
    default: throw UnsupportedDatatypeError("unsupported NIfTI datatype " + std::to_string(code));
  }
}

Eigen::Matrix4d quaternion_affine(const std::uint8_t* h, bool swap, const double pixdim[4]) {
  const double b = load<float>(h + off::quatern_b, swap);
  const double c = load<float>(h + off::quatern_b + 4, swap);
  const double d = load<float>(h + off::quatern_b + 8, swap);
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;

  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = r.col(0) * pixdim[1];
  m.block<3, 1>(0, 1) = r.col(1) * pixdim[2];
  m.block<3, 1>(0, 2) = r.col(2) * pixdim[3] * qfac;
  for (int i = 0; i < 3; ++i) m(i, 3) = load<float>(h + off::qoffset_x + 4 * i, swap);
  return m;
}

}  // namespace

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

Bytes gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("zlib inflateInit failed");
  Bytes out;
  std::uint8_t chunk[1 << 16];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int ret = Z_OK;
  while (true) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (ret == Z_STREAM_END) {
      // Concatenated members are legal gzip.
      if (zs.avail_in > 0 && inflateReset(&zs) == Z_OK) continue;
      break;
    }
    if (zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw LengthMismatchError("truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

Bytes gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw FormatError("zlib deflateInit failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int ret = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (ret != Z_STREAM_END) throw FormatError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

Volume3D parse_nifti(std::span<const std::uint8_t> input) {
  Bytes inflated;
  if (is_gzip(input)) {
    inflated = gzip_decompress(input);
    input = inflated;
  }
  if (input.size() < kHeaderSize) throw LengthMismatchError("NIfTI input shorter than the 348-byte header");
  const std::uint8_t* h = input.data();

  if (std::memcmp(h + off::magic, "n+2\0", 4) == 0 || load<std::int32_t>(h, false) == 540 ||
      load<std::int32_t>(h, true) == 540)
    throw FormatError("NIfTI-2 is not supported");
  if (std::memcmp(h + off::magic, "ni1\0", 4) == 0)
    throw FormatError("header/image pairs (magic ni1) are not supported; use single-file .nii");
  if (std::memcmp(h + off::magic, "n+1\0", 4) != 0) throw FormatError("bad NIfTI-1 magic");

  // dim[0] must lie in [1,7]; otherwise the file was written big-endian.
  bool swap = false;
  const auto ndim_le = load<std::int16_t>(h + off::dim, false);
  if (ndim_le < 1 || ndim_le > 7) {
    swap = true;
    const auto ndim_be = load<std::int16_t>(h + off::dim, true);
    if (ndim_be < 1 || ndim_be > 7) throw FormatError("dim[0] out of range in either byte order");
  }

  const int ndim = load<std::int16_t>(h + off::dim, swap);
  std::int64_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + off::dim + 2 * i, swap);
  for (int i = 1; i <= ndim; ++i)
    if (dim[i] < 1) throw FormatError("non-positive dim entry");
  for (int i = 4; i <= ndim; ++i)
    if (dim[i] != 1) throw FormatError("only 3D volumes are supported (dim[" + std::to_string(i) + "] > 1)");

  VolumeHeader header;
  for (int a = 0; a < 3; ++a) header.dims[a] = a + 1 <= ndim ? dim[a + 1] : 1;

  const int code = load<std::int16_t>(h + off::datatype, swap);
  if (!is_supported_datatype(code))
    throw UnsupportedDatatypeError("unsupported NIfTI datatype " + std::to_string(code));
  header.datatype_code = code;

  double pixdim[8];
  for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(h + off::pixdim + 4 * i, swap);
  for (int a = 0; a < 3; ++a) {
    double s = a + 1 <= ndim ? std::abs(pixdim[a + 1]) : 1.0;
    header.pixdim[a] = s > 0 ? s : 1.0;
  }

  const int sform_code = load<std::int16_t>(h + off::sform_code, swap);
  const int qform_code = load<std::int16_t>(h + off::qform_code, swap);
  if (sform_code > 0) {
    header.affine = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) header.affine(r, c) = load<float>(h + off::srow_x + 16 * r + 4 * c, swap);
  } else if (qform_code > 0) {
    const double pd[4] = {pixdim[0], header.pixdim[0], header.pixdim[1], header.pixdim[2]};
    header.affine = quaternion_affine(h, swap, pd);
  } else {
    header.affine = Eigen::Matrix4d::Identity();
    for (int a = 0; a < 3; ++a) header.affine(a, a) = header.pixdim[a];
  }

  const double vox_offset = load<float>(h + off::vox_offset, swap);
  const auto offset = static_cast<std::size_t>(std::max(vox_offset, static_cast<double>(kHeaderSize)));
  const std::size_t n = header.voxel_count();
  const std::size_t width = static_cast<std::size_t>(datatype_bytes(code));
  if (input.size() < offset || input.size() - offset < n * width)
    throw LengthMismatchError("NIfTI payload holds " +
                              std::to_string(input.size() > offset ? input.size() - offset : 0) +
                              " bytes, expected " + std::to_string(n * width));

  std::vector<double> data(n);
  const std::uint8_t* payload = input.data() + offset;
  for (std::size_t i = 0; i < n; ++i) data[i] = load_element(payload + i * width, code, swap);

  const double slope = load<float>(h + off::scl_slope, swap);
  const double inter = load<float>(h + off::scl_inter, swap);
  if (slope != 0 && std::isfinite(slope) && std::isfinite(inter) && (slope != 1.0 || inter != 0.0)) {
    for (double& v : data) v = v * slope + inter;
    header.datatype_code = dt::float64;
  }
  return Volume3D(std::move(header), std::move(data));
}

Bytes write_nifti(const Volume3D& vol) {
  const VolumeHeader& hd = vol.header();
  for (auto d : hd.dims)
    if (d > std::numeric_limits<std::int16_t>::max())
      throw CapacityError("dim " + std::to_string(d) + " exceeds the NIfTI-1 16-bit dim field");
  const int code = hd.datatype_code;
  const int width = datatype_bytes(code);
  if (width == 0) throw UnsupportedDatatypeError("unsupported NIfTI datatype " + std::to_string(code));

  Bytes out(kVoxOffset + vol.size() * static_cast<std::size_t>(width), 0);
  std::uint8_t* h = out.data();
  store<std::int32_t>(h + off::sizeof_hdr, static_cast<std::int32_t>(kHeaderSize));
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(hd.dims[0]),
                               static_cast<std::int16_t>(hd.dims[1]),
                               static_cast<std::int16_t>(hd.dims[2]),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(h + off::dim + 2 * i, dim[i]);
  store<std::int16_t>(h + off::datatype, static_cast<std::int16_t>(code));
  store<std::int16_t>(h + off::bitpix, static_cast<std::int16_t>(8 * width));
  const float pixdim[8] = {1.0f, static_cast<float>(hd.pixdim[0]), static_cast<float>(hd.pixdim[1]),
                           static_cast<float>(hd.pixdim[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) store<float>(h + off::pixdim + 4 * i, pixdim[i]);
  store<float>(h + off::vox_offset, static_cast<float>(kVoxOffset));
  store<float>(h + off::scl_slope, 0.0f);
  store<float>(h + off::scl_inter, 0.0f);
  h[off::xyzt_units] = 2;  // millimeters
  store<std::int16_t>(h + off::qform_code, 0);
  store<std::int16_t>(h + off::sform_code, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      store<float>(h + off::srow_x + 16 * r + 4 * c, static_cast<float>(hd.affine(r, c)));
  std::memcpy(h + off::magic, "n+1\0", 4);

  std::uint8_t* payload = out.data() + kVoxOffset;
  const auto& data = vol.data();
  for (std::size_t i = 0; i < data.size(); ++i) store_element(payload + i * width, code, data[i]);
  return out;
}

Volume3D read_nifti(const std::filesystem::path& path) {
  const Bytes bytes = read_file_bytes(path);
  return parse_nifti(bytes);
}

void write_nifti_file(const Volume3D& vol, const std::filesystem::path& path) {
  Bytes bytes = write_nifti(vol);
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  write_file_atomic(path, bytes);
}

}  // namespace mpvqa
