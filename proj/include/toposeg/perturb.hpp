#pragma once

// Topology-perturbation synthesis. A random polynomial field in a Chebyshev
// (first kind) tensor basis is thresholded at a quantile to obtain a
// perturbation mask (by default a band around its median level set), and
// labels inside the mask are corrupted to imitate the holes, splits, spurious
// components and class confusions typical of segmentation models.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "toposeg/error.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/nifti.hpp"
#include "toposeg/parallel.hpp"
#include "toposeg/random.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

/// T_k(u) by the three-term recurrence T_k = 2u T_{k-1} - T_{k-2}.
inline double chebyshev_t(int k, double u) {
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = u;
  for (int i = 2; i <= k; ++i) {
    const double nxt = 2.0 * u * cur - prev;
    prev = cur;
    cur = nxt;
  }
  return cur;
}

/// Coefficients c_abc of a total-degree-d trivariate polynomial; entries with
/// a+b+c > d are zero.
class PolyCoefficients {
 public:
  explicit PolyCoefficients(int degree) : degree_(degree), values_(cube(degree + 1), 0.0) {
    if (degree < 0) throw ValidationError("polynomial degree must be >= 0");
  }

  [[nodiscard]] int degree() const { return degree_; }

  double& at(int a, int b, int c) {
    check(a, b, c);
    return values_[index(a, b, c)];
  }
  [[nodiscard]] double at(int a, int b, int c) const {
    check(a, b, c);
    return values_[index(a, b, c)];
  }

 private:
  static std::size_t cube(int n) { return static_cast<std::size_t>(n) * n * n; }
  [[nodiscard]] std::size_t index(int a, int b, int c) const {
    const auto n = static_cast<std::size_t>(degree_ + 1);
    return static_cast<std::size_t>(a) + n * (static_cast<std::size_t>(b) + n * static_cast<std::size_t>(c));
  }
  void check(int a, int b, int c) const {
    if (a < 0 || b < 0 || c < 0 || a + b + c > degree_) throw ValidationError("coefficient index outside total degree");
  }

  int degree_;
  std::vector<double> values_;
};

/// c_abc ~ N(0,1) / (1+a+b+c), each drawn from a generator keyed by (seed, a, b, c).
inline PolyCoefficients sample_coefficients(int degree, std::uint64_t seed) {
  if (degree < 1) throw ValidationError("polynomial degree must be >= 1, got " + std::to_string(degree));
  PolyCoefficients coeffs(degree);
  for (int c = 0; c <= degree; ++c) {
    for (int b = 0; b + c <= degree; ++b) {
      for (int a = 0; a + b + c <= degree; ++a) {
        coeffs.at(a, b, c) = rng::standard_normal(seed, a, b, c) / (1.0 + a + b + c);
      }
    }
  }
  return coeffs;
}

/// u_i = -1 + 2 i / (n - 1).
inline double normalized_coordinate(std::size_t i, std::size_t n) {
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

/// f(u,v,w) = Σ c_abc T_a(u) T_b(v) T_c(w) over the grid, contracted one axis
/// at a time.
inline ScalarField evaluate_poly_field(const Geometry& geometry, const PolyCoefficients& coeffs) {
  const auto& e = geometry.extent;
  for (auto n : e) {
    if (n < 2) throw ValidationError("polynomial field needs every axis >= 2, got " + to_string(e));
  }
  const int d = coeffs.degree();
  const auto terms = static_cast<std::size_t>(d + 1);
  // basis[axis][i * terms + k] = T_k(coordinate i along axis)
  std::array<std::vector<double>, 3> basis;
  for (int axis = 0; axis < 3; ++axis) {
    basis[axis].resize(e[axis] * terms);
    for (std::size_t i = 0; i < e[axis]; ++i) {
      const double u = normalized_coordinate(i, e[axis]);
      for (int k = 0; k <= d; ++k) basis[axis][i * terms + k] = chebyshev_t(k, u);
    }
  }
  ScalarField field(geometry, 0.0);
  std::vector<double> g(terms * terms);  // g[a][b] at fixed z
  std::vector<double> h(terms);          // h[a] at fixed (y, z)
  for (std::size_t z = 0; z < e[2]; ++z) {
    std::fill(g.begin(), g.end(), 0.0);
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; a + b <= d; ++b) {
        double s = 0.0;
        for (int c = 0; a + b + c <= d; ++c) s += coeffs.at(a, b, c) * basis[2][z * terms + c];
        g[a * terms + b] = s;
      }
    }
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (int a = 0; a <= d; ++a) {
        double s = 0.0;
        for (int b = 0; a + b <= d; ++b) s += g[a * terms + b] * basis[1][y * terms + b];
        h[a] = s;
      }
      for (std::size_t x = 0; x < e[0]; ++x) {
        double s = 0.0;
        for (int a = 0; a <= d; ++a) s += h[a] * basis[0][x * terms + a];
        field(x, y, z) = s;
      }
    }
  }
  return field;
}

inline ScalarField sample_poly_field(const Geometry& geometry, int degree, std::uint64_t seed) {
  return evaluate_poly_field(geometry, sample_coefficients(degree, seed));
}

/// Selects the round(q·N) largest field values (at least one); equal values
/// are taken in scan order.
inline Mask field_to_mask(const ScalarField& field, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("mask fraction must be in (0,1), got " + std::to_string(fraction));
  }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  if (field.empty() || *lo == *hi) {
    throw ValidationError("polynomial field is constant; its quantile is degenerate, sample with a different seed");
  }
  const auto n = field.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
  Mask mask = field.like<std::uint8_t>();
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

/// Maps a field to -|f - median(f)|, so the upper tail selected by
/// field_to_mask becomes a thin band around the median level set. Such sheets
/// pass through the interior of the volume and cut objects, while the upper
/// tail of a Chebyshev field concentrates at the domain corners.
inline ScalarField level_set_band(const ScalarField& field) {
  std::vector<double> sorted(field.begin(), field.end());
  if (sorted.empty()) throw ValidationError("level_set_band: empty field");
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  ScalarField out = field;
  for (auto& v : out) v = -std::abs(v - median);
  return out;
}

/// Which part of the polynomial field becomes the perturbation mask.
enum class MaskShape {
  kLevelBand,  // voxels closest to the median level set
  kUpperTail,  // voxels with the largest field values
};

inline const char* to_string(MaskShape m) { return m == MaskShape::kLevelBand ? "band" : "upper"; }

inline MaskShape parse_mask_shape(const std::string& s) {
  if (s == "band") return MaskShape::kLevelBand;
  if (s == "upper") return MaskShape::kUpperTail;
  throw ValidationError("unknown mask shape '" + s + "' (expected band or upper)");
}

enum class PerturbMode { kErase, kInsert, kSwap };

inline const char* to_string(PerturbMode m) {
  switch (m) {
    case PerturbMode::kErase: return "erase";
    case PerturbMode::kInsert: return "insert";
    case PerturbMode::kSwap: return "swap";
  }
  return "?";
}

inline PerturbMode parse_perturb_mode(const std::string& s) {
  if (s == "erase") return PerturbMode::kErase;
  if (s == "insert") return PerturbMode::kInsert;
  if (s == "swap") return PerturbMode::kSwap;
  throw ValidationError("unknown perturbation mode '" + s + "'");
}

/// Reach of `insert`: background voxels within this many 26-neighbourhood
/// dilation steps of a tumor label can be filled.
inline constexpr int kInsertReach = 2;

/// Corrupts labels inside `mask`; voxels outside it are copied unchanged.
///  erase  - tumor voxels become background.
///  insert - background voxels within two dilation steps of a tumor voxel take
///           the label of the nearest one (ties to the lower label).
///  swap   - every tumor label L is replaced by another tumor label drawn
///           uniformly with a generator keyed by (seed, L).
inline LabelMap perturb_labels(const LabelMap& clean, const Mask& mask, PerturbMode mode, std::uint64_t seed,
                               const RegionSpec& spec = RegionSpec::brats()) {
  require_same_geometry(clean.geometry(), mask.geometry(), "labels and perturbation mask");
  LabelMap out = clean;
  switch (mode) {
    case PerturbMode::kErase:
      for (std::size_t i = 0; i < clean.size(); ++i) {
        if (mask[i] != 0) out[i] = label::kBackground;
      }
      break;
    case PerturbMode::kInsert: {
      for (std::size_t i = 0; i < clean.size(); ++i) {
        if (mask[i] == 0 || clean[i] != label::kBackground) continue;
        const auto c = clean.coords(i);
        std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
        std::uint8_t best = label::kBackground;
        for (int dz = -kInsertReach; dz <= kInsertReach; ++dz) {
          for (int dy = -kInsertReach; dy <= kInsertReach; ++dy) {
            for (int dx = -kInsertReach; dx <= kInsertReach; ++dx) {
              if (!clean.in_bounds(c.x + dx, c.y + dy, c.z + dz)) continue;
              const auto v = clean(c.x + dx, c.y + dy, c.z + dz);
              if (v == label::kBackground) continue;
              const std::int64_t d2 = dx * dx + dy * dy + dz * dz;
              if (d2 < best_d2 || (d2 == best_d2 && v < best)) {
                best_d2 = d2;
                best = v;
              }
            }
          }
        }
        out[i] = best;
      }
      break;
    }
    case PerturbMode::kSwap: {
      const auto tumor = spec.tumor_labels();
      std::array<std::uint8_t, 256> remap{};
      std::iota(remap.begin(), remap.end(), 0);
      if (tumor.size() >= 2) {
        for (auto l : tumor) {
          std::vector<std::uint8_t> others;
          for (auto o : tumor) {
            if (o != l) others.push_back(o);
          }
          const auto pick = static_cast<std::size_t>(rng::uniform(seed, {0x5357'4150ULL, l}) *
                                                     static_cast<double>(others.size()));
          remap[l] = others[std::min(pick, others.size() - 1)];
        }
      }
      for (std::size_t i = 0; i < clean.size(); ++i) {
        if (mask[i] != 0 && clean[i] != label::kBackground) out[i] = remap[clean[i]];
      }
      break;
    }
  }
  return out;
}

struct PerturbConfig {
  int degree = 6;
  double fraction = 0.05;
  double erase_weight = 0.7;
  double insert_weight = 0.2;
  double swap_weight = 0.1;
  MaskShape mask_shape = MaskShape::kLevelBand;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (degree < 1) throw ValidationError("perturb degree must be >= 1");
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("perturb fraction must be in (0,1)");
    if (erase_weight < 0 || insert_weight < 0 || swap_weight < 0) {
      throw ValidationError("perturb mode weights must be >= 0");
    }
    if (erase_weight + insert_weight + swap_weight <= 0) throw ValidationError("perturb mode weights are all zero");
  }
};

struct PerturbationRecord {
  std::string case_id;
  std::size_t pair_index = 0;
  std::uint64_t seed = 0;
  PerturbMode mode = PerturbMode::kErase;
  int degree = 6;
  double fraction = 0.05;
  std::string clean_path;
  std::string corrupted_path;
  std::string mask_path;

  friend bool operator==(const PerturbationRecord&, const PerturbationRecord&) = default;
};

inline std::uint64_t derive_pair_seed(std::uint64_t master_seed, const std::string& case_id, std::size_t pair_index) {
  return rng::key(master_seed, {rng::fnv1a(case_id), static_cast<std::uint64_t>(pair_index)});
}

inline PerturbMode sample_mode(std::uint64_t pair_seed, const PerturbConfig& cfg) {
  const double total = cfg.erase_weight + cfg.insert_weight + cfg.swap_weight;
  const double u = rng::uniform(pair_seed, {0x4D4F'4445ULL}) * total;
  if (u < cfg.erase_weight) return PerturbMode::kErase;
  if (u < cfg.erase_weight + cfg.insert_weight || cfg.swap_weight == 0.0) {
    return cfg.insert_weight > 0.0 ? PerturbMode::kInsert : PerturbMode::kErase;
  }
  return PerturbMode::kSwap;
}

/// One corrupted/clean pair, computed entirely from the pair seed.
struct PerturbedPair {
  Mask mask;
  LabelMap corrupted;
  PerturbMode mode;
};

inline PerturbedPair make_pair(const LabelMap& clean, const PerturbConfig& cfg, std::uint64_t pair_seed) {
  PerturbedPair p;
  p.mode = sample_mode(pair_seed, cfg);
  auto field = sample_poly_field(clean.geometry(), cfg.degree, pair_seed);
  if (cfg.mask_shape == MaskShape::kLevelBand) field = level_set_band(field);
  p.mask = field_to_mask(field, cfg.fraction);
  p.corrupted = perturb_labels(clean, p.mask, p.mode, pair_seed);
  return p;
}

struct CleanCase {
  std::string case_id;
  LabelMap labels;
  /// Existing file holding `labels`; recorded verbatim as clean_path.
  std::string path;
};

struct SkippedPair {
  std::string case_id;
  std::size_t pair_index = 0;
  std::string reason;
};

struct DatasetResult {
  std::vector<PerturbationRecord> records;
  std::vector<SkippedPair> skipped;
};

/// Writes `<out>/corrupted/<case>_p<i>.nii.gz` and `<out>/masks/<case>_p<i>_mask.nii.gz`
/// for every pair. Failed pairs are recorded and skipped. Records are sorted
/// by (case id, pair index).
inline DatasetResult generate_dataset(const std::vector<CleanCase>& cases, const PerturbConfig& cfg,
                                      std::size_t pairs_per_case, const std::filesystem::path& out_dir,
                                      unsigned threads = 1) {
  cfg.validate();
  if (pairs_per_case < 1) throw ValidationError("pairs per case must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "corrupted", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);

  DatasetResult result;
  std::mutex guard;
  const auto jobs = cases.size() * pairs_per_case;
  parallel_for(jobs, threads, [&](std::size_t job) {
    const auto& cc = cases[job / pairs_per_case];
    const auto pair_index = job % pairs_per_case;
    PerturbationRecord rec;
    rec.case_id = cc.case_id;
    rec.pair_index = pair_index;
    rec.seed = derive_pair_seed(cfg.master_seed, cc.case_id, pair_index);
    rec.degree = cfg.degree;
    rec.fraction = cfg.fraction;
    rec.clean_path = cc.path;
    const auto stem = cc.case_id + "_p" + std::to_string(pair_index);
    rec.corrupted_path = (out_dir / "corrupted" / (stem + ".nii.gz")).string();
    rec.mask_path = (out_dir / "masks" / (stem + "_mask.nii.gz")).string();
    try {
      const auto pair = make_pair(cc.labels, cfg, rec.seed);
      rec.mode = pair.mode;
      nifti::write_labels(pair.corrupted, rec.corrupted_path);
      nifti::write_labels(pair.mask, rec.mask_path);
      const std::lock_guard<std::mutex> lock(guard);
      result.records.push_back(rec);
    } catch (const Error& e) {
      const std::lock_guard<std::mutex> lock(guard);
      result.skipped.push_back({cc.case_id, pair_index, e.what()});
    }
  });
  auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.case_id, a.pair_index) < std::tie(b.case_id, b.pair_index);
  };
  std::sort(result.records.begin(), result.records.end(), by_key);
  std::sort(result.skipped.begin(), result.skipped.end(), by_key);
  return result;
}

// ---------------------------------------------------------------------------
// JSONL manifest

inline nlohmann::ordered_json to_json(const PerturbationRecord& r) {
  nlohmann::ordered_json j;
  j["case_id"] = r.case_id;
  j["pair_index"] = r.pair_index;
  j["seed"] = r.seed;
  j["mode"] = to_string(r.mode);
  j["degree"] = r.degree;
  j["fraction"] = r.fraction;
  j["clean_path"] = r.clean_path;
  j["corrupted_path"] = r.corrupted_path;
  j["mask_path"] = r.mask_path;
  return j;
}

inline PerturbationRecord record_from_json(const nlohmann::json& j) {
  try {
    PerturbationRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.pair_index = j.at("pair_index").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = parse_perturb_mode(j.at("mode").get<std::string>());
    r.degree = j.at("degree").get<int>();
    r.fraction = j.at("fraction").get<double>();
    r.clean_path = j.at("clean_path").get<std::string>();
    r.corrupted_path = j.at("corrupted_path").get<std::string>();
    r.mask_path = j.at("mask_path").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest row: ") + e.what());
  }
}

inline void write_manifest(const std::vector<PerturbationRecord>& records, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  if (!os) throw IoError("short write to manifest '" + path.string() + "'");
}

inline std::vector<PerturbationRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest '" + path.string() + "'");
  std::vector<PerturbationRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest '" + path.string() + "': " + e.what());
    }
  }
  return out;
}

}  // namespace toposeg
