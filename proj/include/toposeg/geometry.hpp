#pragma once

// Volumetric kernels shared by the metrics and the refinement rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/parallel.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

enum class Connectivity : int { k6 = 6, k18 = 18, k26 = 26 };

inline Connectivity connectivity_from_int(int c) {
  switch (c) {
    case 6: return Connectivity::k6;
    case 18: return Connectivity::k18;
    case 26: return Connectivity::k26;
    default: throw ValidationError("connectivity must be 6, 18 or 26, got " + std::to_string(c));
  }
}

using Offset3 = std::array<int, 3>;

/// Neighbor offsets (centre excluded): faces for 6, plus edges for 18, plus
/// corners for 26.
inline std::vector<Offset3> neighbor_offsets(Connectivity c) {
  const int max_l1 = c == Connectivity::k6 ? 1 : (c == Connectivity::k18 ? 2 : 3);
  std::vector<Offset3> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int l1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (l1 != 0 && l1 <= max_l1) out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Euclidean distance transform

namespace detail {

/// One lower-envelope pass: out[q] = min_p (weight*(q-p)^2 + f[p]).
/// Infinite entries of f are not sources.
struct EnvelopeScratch {
  std::vector<std::size_t> v;
  std::vector<double> z;
  std::vector<double> f;
  std::vector<double> d;

  void resize(std::size_t n) {
    v.resize(n);
    z.resize(n + 1);
    f.resize(n);
    d.resize(n);
  }
};

inline void lower_envelope(std::size_t n, double weight, EnvelopeScratch& s) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto& f = s.f;
  auto& v = s.v;
  auto& z = s.z;
  auto parabola = [&](std::size_t p, double q) {
    const double dq = q - static_cast<double>(p);
    return dq * dq * weight + f[p];
  };
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double qd = static_cast<double>(q);
    double sx = -kInf;
    while (k >= 0) {
      const double pd = static_cast<double>(v[k]);
      sx = ((f[q] + weight * qd * qd) - (f[v[k]] + weight * pd * pd)) / (2.0 * weight * (qd - pd));
      if (sx <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : sx;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(s.d.begin(), s.d.begin() + static_cast<std::ptrdiff_t>(n), kInf);
    return;
  }
  std::ptrdiff_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double qd = static_cast<double>(q);
    while (z[j + 1] < qd) ++j;
    // Rounding in the breakpoints can pick the wrong parabola right at a
    // breakpoint; the true minimiser is then a neighbour in the envelope.
    double best = parabola(v[j], qd);
    if (j > 0) best = std::min(best, parabola(v[j - 1], qd));
    if (j < k) best = std::min(best, parabola(v[j + 1], qd));
    s.d[q] = best;
  }
}

}  // namespace detail

/// Exact squared Euclidean distance (mm²) from every voxel centre to the
/// nearest source voxel, by three separable lower-envelope passes.
inline ScalarField squared_edt(const Mask& sources, const Spacing& spacing, unsigned threads = 1) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (count_nonzero(sources) == 0) throw ValidationError("edt: mask has no source voxels");
  ScalarField dist = sources.like<double>();
  for (std::size_t i = 0; i < sources.size(); ++i) dist[i] = sources[i] != 0 ? 0.0 : kInf;

  const std::size_t nx = sources.nx();
  const std::size_t ny = sources.ny();
  const std::size_t nz = sources.nz();
  const std::array<std::size_t, 3> len{nx, ny, nz};
  const std::array<std::size_t, 3> stride{1, nx, nx * ny};

  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = len[axis];
    const std::size_t step = stride[axis];
    const double weight = spacing[axis] * spacing[axis];
    // The lines along `axis` are indexed by the two other coordinates.
    const int a = axis == 0 ? 1 : 0;
    const int b = axis == 2 ? 1 : 2;
    const std::size_t lines = len[a] * len[b];
    const unsigned workers = std::max(1U, threads);
    const std::size_t per = (lines + workers - 1) / workers;
    parallel_for(workers, workers, [&](std::size_t w) {
      detail::EnvelopeScratch scratch;
      scratch.resize(n);
      const std::size_t lo = w * per;
      const std::size_t hi = std::min(lines, lo + per);
      for (std::size_t line = lo; line < hi; ++line) {
        const std::size_t ia = line % len[a];
        const std::size_t ib = line / len[a];
        const std::size_t base = ia * stride[a] + ib * stride[b];
        for (std::size_t q = 0; q < n; ++q) scratch.f[q] = dist[base + q * step];
        detail::lower_envelope(n, weight, scratch);
        for (std::size_t q = 0; q < n; ++q) dist[base + q * step] = scratch.d[q];
      }
    });
  }
  return dist;
}

/// Distance field in mm: 0 on source voxels, otherwise the anisotropic
/// Euclidean distance between voxel centres to the nearest source.
inline ScalarField edt(const Mask& sources, const Spacing& spacing, unsigned threads = 1) {
  ScalarField d = squared_edt(sources, spacing, threads);
  for (auto& v : d) v = std::sqrt(v);
  return d;
}

// ---------------------------------------------------------------------------
// Surfaces

/// Mask voxels with at least one background 6-neighbour; out-of-volume
/// neighbours count as background.
inline Mask surface_mask(const Mask& mask) {
  Mask out = mask.like<std::uint8_t>();
  const auto nx = static_cast<std::int64_t>(mask.nx());
  const auto ny = static_cast<std::int64_t>(mask.ny());
  const auto nz = static_cast<std::int64_t>(mask.nz());
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const auto i = mask.index(x, y, z);
        if (mask[i] == 0) continue;
        const bool border = x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1;
        if (border || mask[i - 1] == 0 || mask[i + 1] == 0 || mask[i - nx] == 0 || mask[i + nx] == 0 ||
            mask[i - nx * ny] == 0 || mask[i + nx * ny] == 0) {
          out[i] = 1;
        }
      }
    }
  }
  return out;
}

/// Coordinates of the surface voxels in scan order.
inline std::vector<Index3> surface_voxels(const Mask& mask) {
  const Mask s = surface_mask(mask);
  std::vector<Index3> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != 0) out.push_back(s.coords(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connected components

struct ComponentLabeling {
  /// 0 = background, otherwise 1..count().
  Volume<std::uint32_t> ids;
  /// sizes[k-1] is the voxel count of component k.
  std::vector<std::size_t> sizes;
  Connectivity connectivity = Connectivity::k26;

  [[nodiscard]] std::size_t count() const { return sizes.size(); }
};

namespace detail {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0U); }

  std::uint32_t root(std::uint32_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = root(a);
    b = root(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace detail

/// Labels foreground components. Ids are assigned in order of each
/// component's first voxel in x-fastest scan order.
inline ComponentLabeling connected_components(const Mask& mask, Connectivity connectivity = Connectivity::k26) {
  const auto nx = static_cast<std::int64_t>(mask.nx());
  const auto ny = static_cast<std::int64_t>(mask.ny());
  const auto nz = static_cast<std::int64_t>(mask.nz());
  // Neighbours that precede a voxel in scan order.
  std::vector<Offset3> backward;
  for (const auto& o : neighbor_offsets(connectivity)) {
    if (o[2] < 0 || (o[2] == 0 && o[1] < 0) || (o[2] == 0 && o[1] == 0 && o[0] < 0)) backward.push_back(o);
  }

  // Union-find over provisional labels; one provisional label per run start.
  std::vector<std::uint32_t> provisional(mask.size(), 0);
  std::uint32_t next = 1;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> equivalences;
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const auto i = mask.index(x, y, z);
        if (mask[i] == 0) continue;
        std::uint32_t assigned = 0;
        for (const auto& o : backward) {
          const auto xx = x + o[0];
          const auto yy = y + o[1];
          const auto zz = z + o[2];
          if (!mask.in_bounds(xx, yy, zz)) continue;
          const auto n = provisional[mask.index(xx, yy, zz)];
          if (n == 0) continue;
          if (assigned == 0) {
            assigned = n;
          } else if (n != assigned) {
            equivalences.emplace_back(assigned, n);
          }
        }
        provisional[i] = assigned != 0 ? assigned : next++;
      }
    }
  }
  detail::DisjointSet sets(next);
  for (const auto& [a, b] : equivalences) sets.unite(a, b);

  ComponentLabeling out{mask.like<std::uint32_t>(), {}, connectivity};
  std::vector<std::uint32_t> final_id(next, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] == 0) continue;
    const auto r = sets.root(provisional[i]);
    if (final_id[r] == 0) {
      out.sizes.push_back(0);
      final_id[r] = static_cast<std::uint32_t>(out.sizes.size());
    }
    out.ids[i] = final_id[r];
    ++out.sizes[final_id[r] - 1];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Morphology

namespace detail {

inline Mask dilate_once_box(const Mask& in) {
  // The 26-neighbourhood is the 3x3x3 box, which separates into three 1D passes.
  Mask a = in;
  const std::array<std::size_t, 3> len{in.nx(), in.ny(), in.nz()};
  const std::array<std::size_t, 3> stride{1, in.nx(), in.nx() * in.ny()};
  for (int axis = 0; axis < 3; ++axis) {
    Mask b = a;
    const auto n = len[axis];
    const auto step = stride[axis];
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != 0) continue;
      const std::size_t pos = (i / step) % n;
      if ((pos > 0 && a[i - step] != 0) || (pos + 1 < n && a[i + step] != 0)) b[i] = 1;
    }
    a = std::move(b);
  }
  return a;
}

inline Mask dilate_once(const Mask& in, const std::vector<Offset3>& offsets) {
  Mask out = in;
  const auto nx = static_cast<std::int64_t>(in.nx());
  const auto ny = static_cast<std::int64_t>(in.ny());
  const auto nz = static_cast<std::int64_t>(in.nz());
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        if (in(x, y, z) == 0) continue;
        for (const auto& o : offsets) {
          if (in.in_bounds(x + o[0], y + o[1], z + o[2])) out(x + o[0], y + o[1], z + o[2]) = 1;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// n-fold dilation by the given neighbourhood; 0 iterations is the identity.
inline Mask dilate(const Mask& mask, Connectivity element, int iterations) {
  if (iterations < 0) throw ValidationError("dilate: negative iteration count");
  Mask out = mask;
  for (auto& v : out) v = v != 0 ? 1 : 0;
  const auto offsets = neighbor_offsets(element);
  for (int it = 0; it < iterations; ++it) {
    out = element == Connectivity::k26 ? detail::dilate_once_box(out) : detail::dilate_once(out, offsets);
  }
  return out;
}

/// Background voxels not 6-connected to the volume border.
inline Mask enclosed_background(const Mask& mask) {
  const auto nx = static_cast<std::int64_t>(mask.nx());
  const auto ny = static_cast<std::int64_t>(mask.ny());
  const auto nz = static_cast<std::int64_t>(mask.nz());
  Mask reached = mask.like<std::uint8_t>();
  std::vector<std::size_t> queue;
  auto seed = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto i = mask.index(x, y, z);
    if (mask[i] == 0 && reached[i] == 0) {
      reached[i] = 1;
      queue.push_back(i);
    }
  };
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        if (x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1) seed(x, y, z);
      }
    }
  }
  const auto faces = neighbor_offsets(Connectivity::k6);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto c = mask.coords(queue[head]);
    for (const auto& o : faces) {
      if (mask.in_bounds(c.x + o[0], c.y + o[1], c.z + o[2])) seed(c.x + o[0], c.y + o[1], c.z + o[2]);
    }
  }
  Mask out = mask.like<std::uint8_t>();
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (mask[i] == 0 && reached[i] == 0) ? 1 : 0;
  return out;
}

/// Flips enclosed background (6-connectivity) to foreground.
inline Mask fill_holes(const Mask& mask) {
  Mask out = enclosed_background(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (mask[i] != 0 || out[i] != 0) ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------

struct Box {
  Index3 lo{};
  Index3 hi{};  // inclusive
};

/// Crops `v` to [lo, hi] (inclusive), keeping spacing.
template <typename T>
Volume<T> crop(const Volume<T>& v, const Box& box) {
  const Extent e{static_cast<std::size_t>(box.hi.x - box.lo.x + 1), static_cast<std::size_t>(box.hi.y - box.lo.y + 1),
                 static_cast<std::size_t>(box.hi.z - box.lo.z + 1)};
  Volume<T> out(Geometry{e, v.spacing(), v.geometry().orientation});
  for (std::size_t z = 0; z < e[2]; ++z) {
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (std::size_t x = 0; x < e[0]; ++x) {
        out(x, y, z) = v(x + box.lo.x, y + box.lo.y, z + box.lo.z);
      }
    }
  }
  return out;
}

}  // namespace toposeg
