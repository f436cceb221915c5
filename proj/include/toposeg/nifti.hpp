#pragma once

// NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//
// The 348-byte header is decoded field by field at fixed offsets so that both
// byte orders are handled without relying on struct packing. Byte order is
// detected from sizeof_hdr (348 native, or its byte-swapped value). Files are
// always written little-endian with magic "n+1" and vox_offset 352. A header
// with magic "ni1" is accepted; its voxel data are read from the sibling
// .img / .img.gz file.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/volume.hpp"

namespace toposeg::nifti {

enum class ErrorKind {
  BadExtension,
  TruncatedHeader,
  BadHeaderSize,
  Nifti2Unsupported,
  BadMagic,
  UnsupportedDatatype,
  BitpixMismatch,
  BadDimensions,
  TooManyDimensions,
  BadPixdim,
  BadVoxOffset,
  TruncatedPayload,
  NotRepresentable,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::BadExtension: return "bad extension";
    case ErrorKind::TruncatedHeader: return "truncated header";
    case ErrorKind::BadHeaderSize: return "bad sizeof_hdr";
    case ErrorKind::Nifti2Unsupported: return "NIfTI-2 unsupported";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::UnsupportedDatatype: return "unsupported datatype";
    case ErrorKind::BitpixMismatch: return "bitpix mismatch";
    case ErrorKind::BadDimensions: return "bad dimensions";
    case ErrorKind::TooManyDimensions: return "too many dimensions";
    case ErrorKind::BadPixdim: return "bad pixdim";
    case ErrorKind::BadVoxOffset: return "bad vox_offset";
    case ErrorKind::TruncatedPayload: return "truncated payload";
    case ErrorKind::NotRepresentable: return "datatype not representable";
  }
  return "unknown";
}

/// Malformed or unsupported file content.
class NiftiError : public ValidationError {
 public:
  NiftiError(ErrorKind kind, const std::string& detail)
      : ValidationError(std::string("nifti: ") + nifti::to_string(kind) + ": " + detail), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const { return kind_; }

  /// Same kind, message prefixed with `context`.
  [[nodiscard]] NiftiError with_context(const std::string& context) const {
    return NiftiError(kind_, context + ": " + what(), Raw{});
  }

 private:
  struct Raw {};
  NiftiError(ErrorKind kind, const std::string& message, Raw) : ValidationError(message), kind_(kind) {}

  ErrorKind kind_;
};

enum Datatype : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
};

inline bool supported_datatype(std::int16_t code) {
  return code == kUInt8 || code == kInt16 || code == kInt32 || code == kFloat32 || code == kFloat64;
}

inline int bytes_per_voxel(std::int16_t code) {
  switch (code) {
    case kUInt8: return 1;
    case kInt16: return 2;
    case kInt32: return 4;
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

inline bool integral_datatype(std::int16_t code) { return code == kUInt8 || code == kInt16 || code == kInt32; }

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kSingleFileOffset = 352;

struct VolumeHeader {
  std::array<std::int16_t, 8> dim{3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t datatype = kFloat32;
  std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = static_cast<float>(kSingleFileOffset);
  float scl_slope = 1.0F;
  float scl_inter = 0.0F;
  std::uint8_t xyzt_units = 2;  // millimetres
  std::int16_t intent_code = 0;
  std::string descrip;
  Orientation orientation{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  [[nodiscard]] Extent extent() const {
    return {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]), static_cast<std::size_t>(dim[3])};
  }
  [[nodiscard]] Spacing spacing() const { return {pixdim[1], pixdim[2], pixdim[3]}; }
  /// Size of the 4th axis; 1 for plain 3D volumes.
  [[nodiscard]] std::size_t channels() const { return dim[0] >= 4 ? static_cast<std::size_t>(dim[4]) : 1; }
  [[nodiscard]] std::size_t voxel_count() const {
    const auto e = extent();
    return e[0] * e[1] * e[2] * channels();
  }
  [[nodiscard]] Geometry geometry() const {
    Geometry g{extent(), spacing(), orientation};
    g.orientation.qfac = pixdim[0] < 0 ? -1.0F : 1.0F;
    return g;
  }
};

/// A decoded NIfTI image. Values are held as double, which represents every
/// supported on-disk datatype exactly, so write(read(f)) is bit-exact.
struct TypedVolume {
  VolumeHeader header;
  std::vector<double> data;

  [[nodiscard]] Extent extent() const { return header.extent(); }
  [[nodiscard]] Spacing spacing() const { return header.spacing(); }
  [[nodiscard]] std::size_t channels() const { return header.channels(); }
};

namespace detail {

inline std::int32_t bswap32(std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  return static_cast<std::int32_t>((u >> 24) | ((u >> 8) & 0xFF00U) | ((u << 8) & 0xFF0000U) | (u << 24));
}

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  [[nodiscard]] T get(std::size_t offset) const {
    std::array<std::byte, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

  [[nodiscard]] std::string chars(std::size_t offset, std::size_t n) const {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + offset), n);
    s.resize(std::strlen(s.c_str()));
    return s;
  }

 private:
  std::span<const std::byte> bytes_;
  bool swap_;
};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
  void put(std::size_t offset, T value) {
    auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::memcpy(out_.data() + offset, raw.data(), sizeof(T));
  }

  void chars(std::size_t offset, const std::string& s, std::size_t max_len) {
    std::memcpy(out_.data() + offset, s.data(), std::min(s.size(), max_len - 1));
  }

 private:
  std::vector<std::byte>& out_;
};

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline bool is_gzip_path(const std::filesystem::path& p) { return has_suffix(p.string(), ".nii.gz"); }

inline std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  // gzread passes uncompressed input through unchanged.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::byte> out;
  std::array<std::byte, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      int errnum = 0;
      std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw IoError("read error in '" + path.string() + "': " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes, bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (f == nullptr) throw IoError("cannot write '" + path.string() + "'");
    const int n = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int rc = gzclose(f);
    if (static_cast<std::size_t>(n) != bytes.size() || rc != Z_OK) {
      throw IoError("short write to '" + path.string() + "'");
    }
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to '" + path.string() + "'");
}

template <typename T>
double load_voxel(const std::byte* p, bool swap) {
  std::array<std::byte, sizeof(T)> raw{};
  std::memcpy(raw.data(), p, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  return static_cast<double>(std::bit_cast<T>(raw));
}

template <typename T>
void store_voxel(std::byte* p, T v) {
  auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  std::memcpy(p, raw.data(), sizeof(T));
}

template <typename I>
I checked_integer(double v, std::size_t i) {
  if (!(v >= static_cast<double>(std::numeric_limits<I>::min()) &&
        v <= static_cast<double>(std::numeric_limits<I>::max()) && v == std::floor(v))) {
    throw NiftiError(ErrorKind::NotRepresentable,
                     "value " + std::to_string(v) + " at voxel " + std::to_string(i) + " does not fit the datatype");
  }
  return static_cast<I>(v);
}

}  // namespace detail

/// Decodes a header. Does not touch the payload.
inline VolumeHeader decode_header(std::span<const std::byte> bytes, bool allow_channels, bool* swapped = nullptr) {
  if (bytes.size() < kHeaderSize) {
    throw NiftiError(ErrorKind::TruncatedHeader, std::to_string(bytes.size()) + " bytes, need 348");
  }
  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  const auto native = std::endian::native == std::endian::little ? sizeof_hdr : detail::bswap32(sizeof_hdr);
  bool swap = false;
  if (native == 348) {
    swap = std::endian::native != std::endian::little;
  } else if (detail::bswap32(native) == 348) {
    swap = std::endian::native == std::endian::little;
  } else if (native == 540 || detail::bswap32(native) == 540) {
    throw NiftiError(ErrorKind::Nifti2Unsupported, "sizeof_hdr 540 indicates NIfTI-2; only NIfTI-1 is supported");
  } else {
    throw NiftiError(ErrorKind::BadHeaderSize, "sizeof_hdr = " + std::to_string(native));
  }
  if (swapped != nullptr) *swapped = swap;
  const detail::ByteReader r(bytes, swap);

  VolumeHeader h;
  std::memcpy(h.magic.data(), bytes.data() + 344, 4);
  const bool single = h.magic == std::array<char, 4>{'n', '+', '1', '\0'};
  const bool pair = h.magic == std::array<char, 4>{'n', 'i', '1', '\0'};
  if (!single && !pair) throw NiftiError(ErrorKind::BadMagic, "expected \"n+1\" or \"ni1\"");

  for (int i = 0; i < 8; ++i) h.dim[i] = r.get<std::int16_t>(40 + 2 * i);
  h.intent_code = r.get<std::int16_t>(68);
  h.datatype = r.get<std::int16_t>(70);
  const auto bitpix = r.get<std::int16_t>(72);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = r.get<float>(76 + 4 * i);
  h.vox_offset = r.get<float>(108);
  h.scl_slope = r.get<float>(112);
  h.scl_inter = r.get<float>(116);
  h.xyzt_units = static_cast<std::uint8_t>(bytes[123]);
  h.descrip = r.chars(148, 80);
  auto& o = h.orientation;
  o.qform_code = r.get<std::int16_t>(252);
  o.sform_code = r.get<std::int16_t>(254);
  o.quatern_b = r.get<float>(256);
  o.quatern_c = r.get<float>(260);
  o.quatern_d = r.get<float>(264);
  o.qoffset_x = r.get<float>(268);
  o.qoffset_y = r.get<float>(272);
  o.qoffset_z = r.get<float>(276);
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 4; ++c) o.srow[row][c] = r.get<float>(280 + 16 * row + 4 * c);
  }
  o.qfac = h.pixdim[0] < 0 ? -1.0F : 1.0F;

  if (!supported_datatype(h.datatype)) {
    throw NiftiError(ErrorKind::UnsupportedDatatype, "datatype code " + std::to_string(h.datatype));
  }
  if (bitpix != 8 * bytes_per_voxel(h.datatype)) {
    throw NiftiError(ErrorKind::BitpixMismatch,
                     "bitpix " + std::to_string(bitpix) + " for datatype " + std::to_string(h.datatype));
  }
  const int rank = h.dim[0];
  if (rank < 1 || rank > 7) throw NiftiError(ErrorKind::BadDimensions, "dim[0] = " + std::to_string(rank));
  for (int i = 1; i <= rank; ++i) {
    if (h.dim[i] < 1) {
      throw NiftiError(ErrorKind::BadDimensions, "dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));
    }
  }
  for (int i = rank + 1; i <= 7; ++i) h.dim[i] = 1;
  const int max_rank = allow_channels ? 4 : 3;
  for (int i = max_rank + 1; i <= rank; ++i) {
    if (h.dim[i] != 1) {
      throw NiftiError(ErrorKind::TooManyDimensions,
                       "dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]) + " (only " +
                           std::to_string(max_rank) + " axes supported)");
    }
  }
  for (int i = 1; i <= 3; ++i) {
    if (i > rank && !(h.pixdim[i] > 0.0F)) h.pixdim[i] = 1.0F;
    if (!(h.pixdim[i] > 0.0F) || !std::isfinite(h.pixdim[i])) {
      throw NiftiError(ErrorKind::BadPixdim,
                       "pixdim[" + std::to_string(i) + "] = " + std::to_string(h.pixdim[i]) + " must be > 0");
    }
  }
  if (single && !(h.vox_offset >= static_cast<float>(kSingleFileOffset))) {
    throw NiftiError(ErrorKind::BadVoxOffset, "vox_offset " + std::to_string(h.vox_offset) + " < 352");
  }
  if (pair && !(h.vox_offset >= 0.0F)) {
    throw NiftiError(ErrorKind::BadVoxOffset, "vox_offset " + std::to_string(h.vox_offset) + " < 0");
  }
  return h;
}

/// Decodes header + payload. `payload` is the data file for "ni1" pairs and
/// empty for single files.
inline TypedVolume decode(std::span<const std::byte> bytes, bool allow_channels,
                          std::span<const std::byte> payload = {}) {
  bool swap = false;
  TypedVolume vol;
  vol.header = decode_header(bytes, allow_channels, &swap);
  auto& h = vol.header;
  const bool single = h.magic[1] == '+';
  const std::span<const std::byte> src = single ? bytes : payload;

  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const auto n = h.voxel_count();
  const auto width = static_cast<std::size_t>(bytes_per_voxel(h.datatype));
  if (src.size() < offset || (src.size() - offset) / width < n) {
    throw NiftiError(ErrorKind::TruncatedPayload, "need " + std::to_string(n * width) + " bytes at offset " +
                                                      std::to_string(offset) + ", file has " +
                                                      std::to_string(src.size()));
  }
  vol.data.resize(n);
  const std::byte* p = src.data() + offset;
  for (std::size_t i = 0; i < n; ++i, p += width) {
    switch (h.datatype) {
      case kUInt8: vol.data[i] = static_cast<double>(static_cast<std::uint8_t>(*p)); break;
      case kInt16: vol.data[i] = detail::load_voxel<std::int16_t>(p, swap); break;
      case kInt32: vol.data[i] = detail::load_voxel<std::int32_t>(p, swap); break;
      case kFloat32: vol.data[i] = detail::load_voxel<float>(p, swap); break;
      case kFloat64: vol.data[i] = detail::load_voxel<double>(p, swap); break;
      default: break;
    }
  }

  const bool scaled = (h.scl_slope != 0.0F && h.scl_slope != 1.0F) || h.scl_inter != 0.0F;
  if (scaled) {
    const double slope = h.scl_slope == 0.0F ? 1.0 : h.scl_slope;
    const double inter = h.scl_inter;
    const bool as_double = h.datatype == kFloat64;
    for (auto& v : vol.data) {
      v = slope * v + inter;
      if (!as_double) v = static_cast<double>(static_cast<float>(v));
    }
    if (!as_double) h.datatype = kFloat32;
  }
  h.scl_slope = 1.0F;
  h.scl_inter = 0.0F;
  h.magic = {'n', '+', '1', '\0'};
  h.vox_offset = static_cast<float>(kSingleFileOffset);
  return vol;
}

/// Encodes to a little-endian single-file image.
inline std::vector<std::byte> encode(const TypedVolume& vol) {
  const auto& h = vol.header;
  if (!supported_datatype(h.datatype)) {
    throw NiftiError(ErrorKind::UnsupportedDatatype, "cannot write datatype code " + std::to_string(h.datatype));
  }
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] < 1) throw NiftiError(ErrorKind::BadDimensions, "dim[" + std::to_string(i) + "] < 1");
    if (!(h.pixdim[i] > 0.0F)) throw NiftiError(ErrorKind::BadPixdim, "pixdim must be > 0");
  }
  const auto n = h.voxel_count();
  if (vol.data.size() != n) {
    throw ValidationError("nifti: data length " + std::to_string(vol.data.size()) + " != " + std::to_string(n));
  }
  const auto width = static_cast<std::size_t>(bytes_per_voxel(h.datatype));
  std::vector<std::byte> out(kSingleFileOffset + n * width, std::byte{0});
  detail::ByteWriter w(out);
  w.put<std::int32_t>(0, 348);
  out[39] = std::byte{0};
  const std::int16_t rank = h.channels() > 1 ? 4 : 3;
  w.put<std::int16_t>(40, rank);
  for (int i = 1; i < 8; ++i) w.put<std::int16_t>(40 + 2 * i, i <= rank ? h.dim[i] : std::int16_t{1});
  w.put<std::int16_t>(68, h.intent_code);
  w.put<std::int16_t>(70, h.datatype);
  w.put<std::int16_t>(72, static_cast<std::int16_t>(8 * width));
  auto pixdim = h.pixdim;
  pixdim[0] = h.orientation.qfac < 0 ? -1.0F : 1.0F;
  for (int i = 0; i < 8; ++i) w.put<float>(76 + 4 * i, pixdim[i]);
  w.put<float>(108, static_cast<float>(kSingleFileOffset));
  w.put<float>(112, 1.0F);
  w.put<float>(116, 0.0F);
  out[123] = static_cast<std::byte>(h.xyzt_units);
  w.chars(148, h.descrip, 80);
  const auto& o = h.orientation;
  w.put<std::int16_t>(252, o.qform_code);
  w.put<std::int16_t>(254, o.sform_code);
  w.put<float>(256, o.quatern_b);
  w.put<float>(260, o.quatern_c);
  w.put<float>(264, o.quatern_d);
  w.put<float>(268, o.qoffset_x);
  w.put<float>(272, o.qoffset_y);
  w.put<float>(276, o.qoffset_z);
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 4; ++c) w.put<float>(280 + 16 * row + 4 * c, o.srow[row][c]);
  }
  std::memcpy(out.data() + 344, "n+1", 4);

  std::byte* p = out.data() + kSingleFileOffset;
  for (std::size_t i = 0; i < n; ++i, p += width) {
    const double v = vol.data[i];
    switch (h.datatype) {
      case kUInt8: *p = static_cast<std::byte>(detail::checked_integer<std::uint8_t>(v, i)); break;
      case kInt16: detail::store_voxel(p, detail::checked_integer<std::int16_t>(v, i)); break;
      case kInt32: detail::store_voxel(p, detail::checked_integer<std::int32_t>(v, i)); break;
      case kFloat32: detail::store_voxel(p, static_cast<float>(v)); break;
      case kFloat64: detail::store_voxel(p, v); break;
      default: break;
    }
  }
  return out;
}

inline void check_extension(const std::filesystem::path& path) {
  const auto s = path.string();
  if (!detail::has_suffix(s, ".nii") && !detail::has_suffix(s, ".nii.gz")) {
    throw NiftiError(ErrorKind::BadExtension, "'" + s + "' is not .nii or .nii.gz");
  }
}

namespace detail {

inline TypedVolume read_impl(const std::filesystem::path& path, bool allow_channels) {
  check_extension(path);
  if (!std::filesystem::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 348 && std::memcmp(bytes.data() + 344, "ni1", 4) == 0) {
    auto stem = path.string();
    stem.erase(stem.size() - (is_gzip_path(path) ? 7 : 4));
    std::filesystem::path img = stem + ".img";
    if (!std::filesystem::exists(img)) img = stem + ".img.gz";
    if (!std::filesystem::exists(img)) throw IoError("ni1 header '" + path.string() + "' has no .img file");
    const auto payload = read_file_bytes(img);
    return decode(bytes, allow_channels, payload);
  }
  return decode(bytes, allow_channels);
}

}  // namespace detail

/// Reads a 3D volume. Any non-unit axis beyond the third is an error.
inline TypedVolume read_nifti(const std::filesystem::path& path) {
  try {
    return detail::read_impl(path, false);
  } catch (const NiftiError& e) {
    throw e.with_context(path.string());
  }
}

/// Reads a volume whose 4th axis (if any) indexes channels.
inline TypedVolume read_nifti_channels(const std::filesystem::path& path) {
  try {
    return detail::read_impl(path, true);
  } catch (const NiftiError& e) {
    throw e.with_context(path.string());
  }
}

/// gzip is applied iff the path ends in .nii.gz.
inline void write_nifti(const TypedVolume& vol, const std::filesystem::path& path) {
  check_extension(path);
  const auto bytes = encode(vol);
  detail::write_file_bytes(path, bytes, detail::is_gzip_path(path));
}

// ---------------------------------------------------------------------------
// Conversions between TypedVolume and typed grids.

inline VolumeHeader header_for(const Geometry& g, std::int16_t datatype, std::size_t channels = 1) {
  VolumeHeader h;
  h.dim = {static_cast<std::int16_t>(channels > 1 ? 4 : 3),
           static_cast<std::int16_t>(g.extent[0]),
           static_cast<std::int16_t>(g.extent[1]),
           static_cast<std::int16_t>(g.extent[2]),
           static_cast<std::int16_t>(channels),
           1,
           1,
           1};
  h.datatype = datatype;
  h.pixdim = {g.orientation.qfac < 0 ? -1.0F : 1.0F,
              static_cast<float>(g.spacing[0]),
              static_cast<float>(g.spacing[1]),
              static_cast<float>(g.spacing[2]),
              1,
              1,
              1,
              1};
  h.orientation = g.orientation;
  return h;
}

template <typename T>
TypedVolume from_volume(const Volume<T>& v, std::int16_t datatype) {
  TypedVolume out{header_for(v.geometry(), datatype), {}};
  out.data.assign(v.begin(), v.end());
  return out;
}

/// Channel `c` of a decoded image as a typed grid. Integer targets require
/// integral in-range values.
template <typename T>
Volume<T> to_volume(const TypedVolume& tv, std::size_t channel = 0) {
  const auto geom = tv.header.geometry();
  const auto n = geom.voxel_count();
  if (channel >= tv.channels()) throw ValidationError("channel index out of range");
  std::vector<T> data(n);
  const double* src = tv.data.data() + channel * n;
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (std::is_integral_v<T>) {
      data[i] = detail::checked_integer<T>(src[i], i);
    } else {
      data[i] = static_cast<T>(src[i]);
    }
  }
  return Volume<T>(geom, std::move(data));
}

inline LabelMap read_labels(const std::filesystem::path& path) {
  return to_volume<std::uint8_t>(read_nifti(path));
}

inline void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
  write_nifti(from_volume(labels, kUInt8), path);
}

/// Reads a multi-channel float image (4th axis = channel).
inline std::vector<Volume<float>> read_channels(const std::filesystem::path& path) {
  const auto tv = read_nifti_channels(path);
  std::vector<Volume<float>> out;
  for (std::size_t c = 0; c < tv.channels(); ++c) out.push_back(to_volume<float>(tv, c));
  return out;
}

inline void write_channels(std::span<const Volume<float>> channels, const std::filesystem::path& path) {
  if (channels.empty()) throw ValidationError("write_channels: no channels");
  const auto& g = channels.front().geometry();
  TypedVolume tv{header_for(g, kFloat32, channels.size()), {}};
  tv.data.reserve(g.voxel_count() * channels.size());
  for (const auto& ch : channels) {
    require_same_geometry(g, ch.geometry(), "channels");
    tv.data.insert(tv.data.end(), ch.begin(), ch.end());
  }
  write_nifti(tv, path);
}

}  // namespace toposeg::nifti
