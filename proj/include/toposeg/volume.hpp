#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "toposeg/error.hpp"

namespace toposeg {

using Extent = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;

struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Scanner orientation as carried by the NIfTI-1 qform/sform fields. It is
/// passed through unchanged; nothing in the library resamples.
struct Orientation {
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0.0F;
  float quatern_c = 0.0F;
  float quatern_d = 0.0F;
  float qoffset_x = 0.0F;
  float qoffset_y = 0.0F;
  float qoffset_z = 0.0F;
  float qfac = 1.0F;  // pixdim[0]
  std::array<std::array<float, 4>, 3> srow{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};

  friend bool operator==(const Orientation&, const Orientation&) = default;
};

struct Geometry {
  Extent extent{1, 1, 1};
  Spacing spacing{1.0, 1.0, 1.0};
  Orientation orientation{};

  [[nodiscard]] std::size_t voxel_count() const { return extent[0] * extent[1] * extent[2]; }
};

inline std::string to_string(const Extent& e) {
  std::ostringstream os;
  os << e[0] << "x" << e[1] << "x" << e[2];
  return os.str();
}

inline std::string to_string(const Spacing& s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << ")";
  return os.str();
}

/// Spacings agree when every axis differs by at most `rel_tol` relative.
inline bool spacing_equal(const Spacing& a, const Spacing& b, double rel_tol = 1e-4) {
  for (int i = 0; i < 3; ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (std::abs(a[i] - b[i]) > rel_tol * scale) return false;
  }
  return true;
}

/// Dense 3D grid stored x-fastest.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;

  explicit Volume(Geometry geometry, T fill = T{})
      : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), fill) {}

  explicit Volume(Extent extent, Spacing spacing = {1.0, 1.0, 1.0}, T fill = T{})
      : Volume(Geometry{extent, spacing, {}}, fill) {}

  Volume(Geometry geometry, std::vector<T> data) : geometry_(std::move(geometry)), data_(std::move(data)) {
    if (data_.size() != geometry_.voxel_count()) {
      throw ValidationError("volume data length " + std::to_string(data_.size()) + " does not match extent " +
                            to_string(geometry_.extent));
    }
  }

  /// A new volume sharing this one's geometry.
  template <typename U>
  [[nodiscard]] Volume<U> like(U fill = U{}) const {
    return Volume<U>(geometry_, fill);
  }

  [[nodiscard]] const Geometry& geometry() const { return geometry_; }
  [[nodiscard]] const Extent& extent() const { return geometry_.extent; }
  [[nodiscard]] const Spacing& spacing() const { return geometry_.spacing; }
  void set_spacing(const Spacing& s) { geometry_.spacing = s; }

  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] std::size_t nx() const { return geometry_.extent[0]; }
  [[nodiscard]] std::size_t ny() const { return geometry_.extent[1]; }
  [[nodiscard]] std::size_t nz() const { return geometry_.extent[2]; }

  [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + nx() * (y + ny() * z);
  }

  [[nodiscard]] Index3 coords(std::size_t i) const {
    const auto x = i % nx();
    const auto yz = i / nx();
    return {static_cast<std::int64_t>(x), static_cast<std::int64_t>(yz % ny()),
            static_cast<std::int64_t>(yz / ny())};
  }

  [[nodiscard]] bool in_bounds(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<std::int64_t>(nx()) &&
           y < static_cast<std::int64_t>(ny()) && z < static_cast<std::int64_t>(nz());
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const { return data_[index(x, y, z)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<T> values() { return data_; }
  [[nodiscard]] std::span<const T> values() const { return data_; }
  [[nodiscard]] const std::vector<T>& storage() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.geometry_.extent == b.geometry_.extent && a.data_ == b.data_;
  }

 private:
  Geometry geometry_{};
  std::vector<T> data_{};
};

/// Binary mask: 0 = outside, 1 = inside.
using Mask = Volume<std::uint8_t>;
/// Integer label map (0 = background).
using LabelMap = Volume<std::uint8_t>;
using ScalarField = Volume<double>;

template <typename T>
std::size_t count_nonzero(const Volume<T>& v) {
  std::size_t n = 0;
  for (const auto& x : v) n += (x != T{}) ? 1 : 0;
  return n;
}

/// Checks that shapes match exactly and spacings match to 1e-4 relative.
/// `what` names the pair in the error message.
inline void require_same_geometry(const Geometry& a, const Geometry& b, const std::string& what = "volumes") {
  if (a.extent != b.extent) {
    throw GeometryError("shape mismatch between " + what + ": " + to_string(a.extent) + " vs " +
                        to_string(b.extent));
  }
  if (!spacing_equal(a.spacing, b.spacing)) {
    throw GeometryError("spacing mismatch between " + what + ": " + to_string(a.spacing) + " vs " +
                        to_string(b.spacing));
  }
}

struct NamedGeometry {
  std::string name;
  Geometry geometry;
};

/// Passes iff every geometry matches the first; the error names the offending pair.
inline void validate_geometry(std::span<const NamedGeometry> items) {
  if (items.empty()) throw ValidationError("validate_geometry: empty volume list");
  for (std::size_t i = 1; i < items.size(); ++i) {
    require_same_geometry(items[0].geometry, items[i].geometry, "'" + items[0].name + "' and '" + items[i].name + "'");
  }
}

template <typename T>
void validate_geometry(std::span<const Volume<T>> vols) {
  std::vector<NamedGeometry> named;
  named.reserve(vols.size());
  for (std::size_t i = 0; i < vols.size(); ++i) named.push_back({"volume " + std::to_string(i), vols[i].geometry()});
  validate_geometry(std::span<const NamedGeometry>(named));
}

}  // namespace toposeg
