#pragma once

// Soft-voting ensemble fusion.

#include <string>
#include <utility>
#include <vector>

#include "toposeg/error.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/parallel.hpp"
#include "toposeg/volume.hpp"

namespace toposeg {

struct EnsembleMember {
  std::string name;
  ProbabilityVolume probs;
};

struct EnsembleInput {
  std::vector<EnsembleMember> members;
  /// Empty means equal weights.
  std::vector<double> weights;

  void validate() const {
    if (members.empty()) throw ValidationError("ensemble has no members");
    if (!weights.empty() && weights.size() != members.size()) {
      throw ValidationError("ensemble has " + std::to_string(members.size()) + " members but " +
                            std::to_string(weights.size()) + " weights");
    }
    for (double w : weights) {
      if (!(w > 0.0)) throw ValidationError("ensemble weight must be > 0, got " + std::to_string(w));
    }
    const auto& first = members.front();
    if (first.probs.channels.empty()) throw ValidationError("member '" + first.name + "' has no channels");
    for (const auto& m : members) {
      if (m.probs.class_count() != first.probs.class_count()) {
        throw GeometryError("channel count mismatch between '" + first.name + "' (" +
                            std::to_string(first.probs.class_count()) + ") and '" + m.name + "' (" +
                            std::to_string(m.probs.class_count()) + ")");
      }
      for (const auto& ch : m.probs.channels) {
        require_same_geometry(first.probs.geometry(), ch.geometry(), "'" + first.name + "' and '" + m.name + "'");
      }
    }
  }
};

/// Weighted arithmetic mean of member probabilities, per voxel and channel.
/// Accumulates in double over members in input order and rounds once.
inline ProbabilityVolume soft_vote(const EnsembleInput& input, unsigned threads = 1) {
  input.validate();
  const auto count = input.members.size();
  std::vector<double> w = input.weights.empty() ? std::vector<double>(count, 1.0) : input.weights;
  double total = 0.0;
  for (double x : w) total += x;

  const auto& first = input.members.front().probs;
  ProbabilityVolume out;
  for (const auto& ch : first.channels) out.channels.push_back(ch.like<float>());
  const auto n = first.voxel_count();
  parallel_for(out.channels.size(), threads, [&](std::size_t c) {
    auto& dst = out.channels[c];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t m = 0; m < count; ++m) acc += w[m] * static_cast<double>(input.members[m].probs.channels[c][i]);
      dst[i] = static_cast<float>(acc / total);
    }
  });
  return out;
}

inline LabelMap fuse_to_labels(const EnsembleInput& input, const ClassTable& table = {}, unsigned threads = 1) {
  return argmax_labels(soft_vote(input, threads), table);
}

}  // namespace toposeg
