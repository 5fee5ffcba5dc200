#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "scenefit/chamfer.hpp"
#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/random.hpp"

namespace scenefit {

struct Candidate {
  int index = 0;
  PointCloud cloud;
};

struct CandidateSet {
  std::string instance_id;
  std::vector<Candidate> candidates;
};

struct SelectionReport {
  std::string instance_id;
  std::vector<double> scores;  // normalized CD per candidate; empty for passthrough
  int chosen = -1;             // the winning candidate's own index
};

/// Picks the candidate minimizing bidirectional Chamfer distance after both
/// sides pass through normalize_cloud (centroid to origin, max extent to 1),
/// making the comparison translation- and scale-free. Degenerate candidates
/// (zero extent) score +infinity and lose unless every candidate is
/// degenerate. Ties break to the lowest list position.
inline SelectionReport select_model(const CandidateSet& set, const PointCloud& target) {
  require(!set.candidates.empty(), "empty candidate set");
  require(!target.empty(), "empty cloud");
  const PointCloud norm_target = normalize_cloud(target).first;

  SelectionReport report;
  report.instance_id = set.instance_id;
  report.scores.reserve(set.candidates.size());
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < set.candidates.size(); ++k) {
    double score = std::numeric_limits<double>::infinity();
    try {
      const PointCloud norm_cand = normalize_cloud(set.candidates[k].cloud).first;
      score = chamfer_distance(norm_cand, norm_target);
    } catch (const Error&) {
      // degenerate candidate: keep +infinity
    }
    report.scores.push_back(score);
    if (score < best_score) {
      best_score = score;
      best = k;
    }
  }
  require(std::isfinite(best_score), "all candidates degenerate");
  report.chosen = set.candidates[best].index;
  return report;
}

/// Ablation stand-in for selection: a seeded uniform draw replaces the
/// argmin; scores are omitted because none are computed.
inline SelectionReport selection_ablation_passthrough(const CandidateSet& set,
                                                      std::uint64_t seed) {
  require(!set.candidates.empty(), "empty candidate set");
  auto rng = seeded_rng(seed, fnv1a("selection-ablation"));
  const std::size_t pick = uniform_index(rng, set.candidates.size());
  SelectionReport report;
  report.instance_id = set.instance_id;
  report.chosen = set.candidates[pick].index;
  return report;
}

/// The candidate cloud whose index field equals `chosen`.
inline const PointCloud& chosen_candidate(const CandidateSet& set, int chosen) {
  for (const Candidate& c : set.candidates)
    if (c.index == chosen) return c.cloud;
  throw Error("chosen candidate index " + std::to_string(chosen) + " not in set");
}

}  // namespace scenefit
