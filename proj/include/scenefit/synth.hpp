#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "scenefit/camera.hpp"
#include "scenefit/chamfer.hpp"
#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/mask.hpp"
#include "scenefit/random.hpp"
#include "scenefit/selection.hpp"

namespace scenefit {

enum class ShapeKind { sphere, box, l_bracket };

inline const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    default: return "l_bracket";
  }
}

inline ShapeKind shape_from_name(const std::string& s) {
  if (s == "sphere") return ShapeKind::sphere;
  if (s == "box") return ShapeKind::box;
  if (s == "l_bracket") return ShapeKind::l_bracket;
  throw Error("unknown shape '" + s + "'");
}

/// Spheres and boxes carry rotational ambiguity (a box is invariant under
/// half-turns), so rotation recovery is only scored on the L-bracket.
inline bool rotation_symmetric(ShapeKind k) { return k != ShapeKind::l_bracket; }

struct PrimitiveSpec {
  ShapeKind shape = ShapeKind::sphere;
  double canonical_size = 1.0;  // max AABB extent of the canonical shape
  LayoutParams pose;            // ground-truth phi* (canonical -> camera frame)
  std::string label;
  int point_budget = 2048;
};

namespace detail {

struct BoxPart {
  Vec3 center;
  Vec3 half;  // half-extents
};

// Canonical geometry at canonical_size 1 (max AABB extent exactly 1). The
// bracket is a union of two boxes: a tall thin upright and a short base
// plate, joined at one end with positive overlap so every surface sample
// surviving the mutual inside-rejection lies exactly on the union surface
// (no coinciding faces). Thin members keep hidden back faces within a
// member thickness of the visible ones, and the upright-top and base-top
// planes are parallel at near-unit separation, pinning the scale from a
// single partial view (a shrunk fit cannot keep both planes aligned,
// whatever the translation). The base is wider than the upright, so from
// any yaw its wings clear the upright's silhouette and both pin planes
// stay visible; the very unequal arm lengths leave no rotation that maps
// the shape near itself.
inline constexpr double kSphereRadius = 0.5;
inline const Vec3 kBoxHalf(0.5, 0.35, 0.225);
inline const std::array<BoxPart, 2> kBracketParts{{
    {Vec3(-0.145, 0.0, -0.4875), Vec3(0.325, 0.30, 0.0125)},  // base plate, wide
    {Vec3(-0.4825, 0.0, 0.005), Vec3(0.0175, 0.18, 0.495)},   // upright, narrow
}};

inline bool strictly_inside(const Vec3& p, const BoxPart& b) {
  const Vec3 d = (p - b.center).cwiseAbs();
  return d.x() < b.half.x() && d.y() < b.half.y() && d.z() < b.half.z();
}

/// Smallest ray parameter tau > eps hitting a sphere centered at the origin,
/// or +infinity.
inline double intersect_sphere(const Vec3& o, const Vec3& d, double radius) {
  constexpr double kEps = 1e-9;
  const double a = d.squaredNorm();
  const double b = 2.0 * o.dot(d);
  const double c = o.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  if (t0 > kEps) return t0;
  const double t1 = (-b + sq) / (2.0 * a);
  if (t1 > kEps) return t1;
  return std::numeric_limits<double>::infinity();
}

/// Slab test against an axis-aligned box; returns the entry parameter (or the
/// exit when the origin is inside), +infinity on a miss.
inline double intersect_box(const Vec3& o, const Vec3& d, const Vec3& center, const Vec3& half) {
  constexpr double kEps = 1e-9;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const double oi = o[i] - center[i];
    if (std::abs(d[i]) < 1e-15) {
      if (std::abs(oi) > half[i]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (-half[i] - oi) / d[i];
    double tb = (half[i] - oi) / d[i];
    if (ta > tb) std::swap(ta, tb);
    tmin = std::max(tmin, ta);
    tmax = std::min(tmax, tb);
    if (tmin > tmax) return std::numeric_limits<double>::infinity();
  }
  if (tmin > kEps) return tmin;
  if (tmax > kEps) return tmax;
  return std::numeric_limits<double>::infinity();
}

/// Ray-primitive intersection in the canonical frame, geometry scaled by
/// `size`.
inline double intersect_canonical(ShapeKind shape, double size, const Vec3& o, const Vec3& d) {
  switch (shape) {
    case ShapeKind::sphere:
      return intersect_sphere(o, d, kSphereRadius * size);
    case ShapeKind::box:
      return intersect_box(o, d, Vec3::Zero(), kBoxHalf * size);
    default: {
      double best = std::numeric_limits<double>::infinity();
      for (const BoxPart& part : kBracketParts)
        best = std::min(best, intersect_box(o, d, part.center * size, part.half * size));
      return best;
    }
  }
}

/// Uniform-by-area point on an axis-aligned box surface.
inline Vec3 sample_box_surface(std::mt19937_64& rng, const Vec3& center, const Vec3& half) {
  const double ax = half.y() * half.z();  // area weight of the +-x faces (/4)
  const double ay = half.x() * half.z();
  const double az = half.x() * half.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = uniform01(rng) * total;
  int axis;
  if (pick < 2.0 * ax) {
    axis = 0;
  } else if (pick < 2.0 * (ax + ay)) {
    axis = 1;
    pick -= 2.0 * ax;
  } else {
    axis = 2;
    pick -= 2.0 * (ax + ay);
  }
  const double side = (pick < (axis == 0 ? ax : axis == 1 ? ay : az)) ? -1.0 : 1.0;
  Vec3 p;
  p[axis] = side * half[axis];
  const int u = (axis + 1) % 3;
  const int v = (axis + 2) % 3;
  p[u] = uniform_range(rng, -half[u], half[u]);
  p[v] = uniform_range(rng, -half[v], half[v]);
  return center + p;
}

inline double box_area(const Vec3& half) {
  return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z());
}

/// World-space AABB of a posed primitive. Exact for boxes (corner transform)
/// and spheres (isotropic scale keeps them spheres).
inline Aabb posed_bounds(const PrimitiveSpec& spec) {
  Aabb out;
  if (spec.shape == ShapeKind::sphere) {
    const Vec3 c = spec.pose.t;  // canonical center is the origin
    const double r = kSphereRadius * spec.canonical_size * spec.pose.s;
    out.expand(c - Vec3(r, r, r));
    out.expand(c + Vec3(r, r, r));
    return out;
  }
  const Mat3 rot = rotation_matrix(spec.pose.r);
  auto expand_box = [&](const BoxPart& b) {
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 sign((corner & 1) ? 1 : -1, (corner & 2) ? 1 : -1, (corner & 4) ? 1 : -1);
      const Vec3 p = (b.center + sign.cwiseProduct(b.half)) * spec.canonical_size;
      out.expand(spec.pose.s * (rot * p) + spec.pose.t);
    }
  };
  if (spec.shape == ShapeKind::box) {
    expand_box(BoxPart{Vec3::Zero(), kBoxHalf});
  } else {
    for (const BoxPart& part : kBracketParts) expand_box(part);
  }
  return out;
}

}  // namespace detail

/// n seeded points uniform by area on the canonical surface; `posed` maps
/// them through the ground-truth pose.
inline PointCloud sample_surface(const PrimitiveSpec& spec, int n, std::uint64_t seed,
                                 bool posed = false) {
  require(n >= 1, "non-positive sample count");
  require(spec.canonical_size > 0.0, "non-positive canonical size");
  auto rng = seeded_rng(seed, fnv1a("surface-sample"));
  PointCloud out;
  out.points.reserve(n);
  const double size = spec.canonical_size;
  switch (spec.shape) {
    case ShapeKind::sphere: {
      const double r = detail::kSphereRadius * size;
      for (int i = 0; i < n; ++i) {
        const double u = uniform_range(rng, -1.0, 1.0);
        const double phi = uniform_range(rng, 0.0, 6.28318530717958647692);
        const double ring = std::sqrt(std::max(0.0, 1.0 - u * u));
        out.points.emplace_back(r * ring * std::cos(phi), r * ring * std::sin(phi), r * u);
      }
      break;
    }
    case ShapeKind::box: {
      const Vec3 half = detail::kBoxHalf * size;
      for (int i = 0; i < n; ++i)
        out.points.push_back(detail::sample_box_surface(rng, Vec3::Zero(), half));
      break;
    }
    default: {
      std::array<detail::BoxPart, detail::kBracketParts.size()> parts;
      std::array<double, parts.size()> weight{};
      double total_weight = 0.0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i] = {detail::kBracketParts[i].center * size,
                    detail::kBracketParts[i].half * size};
        weight[i] = detail::box_area(parts[i].half);
        total_weight += weight[i];
      }
      while (static_cast<int>(out.size()) < n) {
        double pick = uniform01(rng) * total_weight;
        std::size_t own = 0;
        while (own + 1 < parts.size() && pick >= weight[own]) pick -= weight[own], ++own;
        const Vec3 p = detail::sample_box_surface(rng, parts[own].center, parts[own].half);
        bool interior = false;
        for (std::size_t i = 0; i < parts.size(); ++i)
          if (i != own && detail::strictly_inside(p, parts[i])) interior = true;
        if (!interior) out.points.push_back(p);
      }
      break;
    }
  }
  if (posed) return apply_transform(out, spec.pose);
  return out;
}

struct SyntheticScene {
  PinholeIntrinsics cam;
  std::vector<PrimitiveSpec> primitives;
  DepthMap depth;
  std::vector<InstanceMask> masks;           // visible pixels per primitive
  std::vector<PointCloud> canonical_clouds;  // canonical-frame surface samples
  std::vector<double> occlusion_fraction;    // 1 - visible / alone-rendered
  Aabb scene_bounds;                         // union of posed primitive AABBs
};

/// Pixel-center ray casting of analytic primitives: depth is the nearest hit
/// along rays ((u-cx)/f, (v-cy)/f, 1), masks mark the z-test winner per
/// pixel. Rays are intersected in each primitive's canonical frame; dividing
/// the rotated direction by the pose scale keeps the world ray parameter, so
/// depths compare directly across primitives.
inline SyntheticScene raycast_scene(const std::vector<PrimitiveSpec>& primitives,
                                    const PinholeIntrinsics& cam,
                                    std::uint64_t sample_seed = 0) {
  require_intrinsics(cam);
  SyntheticScene scene;
  scene.cam = cam;
  scene.primitives = primitives;
  const int w = cam.width, h = cam.height;
  scene.depth = DepthMap(w, h);
  const std::size_t npix = static_cast<std::size_t>(w) * h;
  const std::size_t n = primitives.size();

  for (std::size_t k = 0; k < n; ++k) {
    const PrimitiveSpec& spec = primitives[k];
    require(spec.pose.s > 0.0, "non-positive scale");
    require(spec.canonical_size > 0.0, "non-positive canonical size");
    const Aabb box = detail::posed_bounds(spec);
    require(box.min.z() > 0.05, "primitive behind camera: " + spec.label);
    scene.scene_bounds.expand(box.min);
    scene.scene_bounds.expand(box.max);
  }

  // One intersection pass per primitive; the per-primitive depth buffers give
  // both the z-test composite and the rendered-alone visibility counts.
  std::vector<std::vector<double>> taus(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PrimitiveSpec& spec = primitives[k];
    const Mat3 rot_t = rotation_matrix(spec.pose.r).transpose();
    const double inv_s = 1.0 / spec.pose.s;
    const Vec3 origin_c = rot_t * (-spec.pose.t) * inv_s;
    taus[k].assign(npix, std::numeric_limits<double>::infinity());
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const Vec3 dir_w((u - cam.cx) / cam.focal, (v - cam.cy) / cam.focal, 1.0);
        const Vec3 dir_c = rot_t * dir_w * inv_s;
        taus[k][scene.depth.idx(u, v)] =
            detail::intersect_canonical(spec.shape, spec.canonical_size, origin_c, dir_c);
      }
    }
  }

  scene.masks.assign(n, InstanceMask(w, h));
  for (std::size_t k = 0; k < n; ++k) scene.masks[k].bits.assign(npix, 0);
  std::vector<std::size_t> alone(n, 0), visible(n, 0);
  for (std::size_t i = 0; i < npix; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t owner = n;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = taus[k][i];
      if (std::isfinite(t)) ++alone[k];
      if (t < best) {
        best = t;
        owner = k;
      }
    }
    if (owner < n) {
      scene.depth.values[i] = best;  // dir_w.z == 1, so tau is the depth
      scene.depth.valid[i] = 1;
      scene.masks[owner].bits[i] = 1;
      ++visible[owner];
    }
  }

  scene.canonical_clouds.resize(n);
  scene.occlusion_fraction.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    scene.occlusion_fraction[k] =
        alone[k] == 0 ? 1.0 : 1.0 - static_cast<double>(visible[k]) / alone[k];
    const std::uint64_t s =
        splitmix64(sample_seed ^ fnv1a(primitives[k].label) ^ (0x5EEDULL + k));
    scene.canonical_clouds[k] = sample_surface(primitives[k], primitives[k].point_budget, s);
  }
  return scene;
}

/// K candidates in the canonical frame: index 0 is the correct shape; decoys
/// are the other shape families plus same-family variants with axis
/// proportions perturbed by at least 25%.
inline CandidateSet make_candidates(const PrimitiveSpec& spec, int k, std::uint64_t seed) {
  require(k >= 1, "non-positive candidate count");
  auto rng = seeded_rng(seed, fnv1a("candidates"));
  CandidateSet set;
  set.instance_id = spec.label;
  set.candidates.reserve(k);

  auto sample_kind = [&](ShapeKind kind, int index) {
    PrimitiveSpec s = spec;
    s.shape = kind;
    return sample_surface(s, spec.point_budget,
                          splitmix64(seed ^ (0xC0DEULL + index)));
  };
  set.candidates.push_back(Candidate{0, sample_kind(spec.shape, 0)});

  const std::array<ShapeKind, 3> kinds{ShapeKind::sphere, ShapeKind::box, ShapeKind::l_bracket};
  std::vector<ShapeKind> others;
  for (ShapeKind kind : kinds)
    if (kind != spec.shape) others.push_back(kind);

  for (int d = 1; d < k; ++d) {
    PointCloud cloud;
    if (d <= static_cast<int>(others.size())) {
      cloud = sample_kind(others[d - 1], d);
    } else {
      // same family, proportions skewed well past the 20% floor
      cloud = sample_kind(spec.shape, d);
      const double q = uniform_range(rng, 0.25, 0.5);
      const int axis = static_cast<int>(uniform_index(rng, 3));
      for (Vec3& p : cloud.points) {
        p[axis] *= 1.0 + q;
        p[(axis + 1) % 3] /= 1.0 + q;
      }
    }
    set.candidates.push_back(Candidate{d, std::move(cloud)});
  }
  return set;
}

struct RecoveryTolerances {
  double translation_frac = 0.02;  // of the scene AABB diagonal
  double rotation_deg = 5.0;
  double scale_rel = 0.02;
};

struct InstanceRecovery {
  std::string label;
  bool missing = false;
  bool symmetric = false;
  double translation_err = 0.0;   // scene units
  double translation_frac = 0.0;  // fraction of scene AABB diagonal
  double rotation_err_deg = 0.0;  // meaningless when symmetric
  double scale_rel_err = 0.0;
  double final_cd = std::numeric_limits<double>::quiet_NaN();
  bool success = false;
};

struct RecoveryReport {
  std::vector<InstanceRecovery> instances;
  double success_rate = 0.0;        // over all instances
  double success_rate_asym = 0.0;   // over non-symmetric instances only
  std::size_t asym_count = 0;
};

/// Scores recovered poses against each primitive's ground-truth phi*.
/// Success requires every applicable tolerance: translation and scale always,
/// rotation only for shapes without the symmetry flag. final_cd compares the
/// canonical sample posed with the recovered vs. the true parameters.
inline RecoveryReport evaluate_recovery(const SyntheticScene& scene,
                                        const std::map<std::string, LayoutParams>& recovered,
                                        const RecoveryTolerances& tol = {}) {
  RecoveryReport report;
  const double diagonal = scene.scene_bounds.diagonal();
  require(diagonal > 0.0, "zero extent");
  std::size_t ok = 0, ok_asym = 0;
  for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
    const PrimitiveSpec& spec = scene.primitives[k];
    InstanceRecovery r;
    r.label = spec.label;
    r.symmetric = rotation_symmetric(spec.shape);
    const auto it = recovered.find(spec.label);
    if (it == recovered.end()) {
      r.missing = true;
      report.instances.push_back(r);
      if (!r.symmetric) ++report.asym_count;
      continue;
    }
    const LayoutParams& got = it->second;
    r.translation_err = (got.t - spec.pose.t).norm();
    r.translation_frac = r.translation_err / diagonal;
    r.rotation_err_deg =
        rotation_geodesic_error(got.r, spec.pose.r) * (180.0 / 3.14159265358979323846);
    r.scale_rel_err = std::abs(got.s - spec.pose.s) / spec.pose.s;
    r.final_cd = chamfer_distance(apply_transform(scene.canonical_clouds[k], got),
                                  apply_transform(scene.canonical_clouds[k], spec.pose));
    r.success = r.translation_frac <= tol.translation_frac && r.scale_rel_err <= tol.scale_rel &&
                (r.symmetric || r.rotation_err_deg <= tol.rotation_deg);
    if (r.success) ++ok;
    if (!r.symmetric) {
      ++report.asym_count;
      if (r.success) ++ok_asym;
    }
    report.instances.push_back(r);
  }
  report.success_rate =
      report.instances.empty() ? 0.0 : static_cast<double>(ok) / report.instances.size();
  report.success_rate_asym =
      report.asym_count == 0 ? 1.0 : static_cast<double>(ok_asym) / report.asym_count;
  return report;
}

/// Scene randomization ranges for the benchmark generator.
struct BenchSceneConfig {
  int width = 216;
  int height = 162;
  double focal = 195.0;
  int min_primitives = 3;
  int max_primitives = 8;
  double max_occlusion = 0.5;   // hard cap per instance
  double easy_occlusion = 0.08; // placement prefers spots at or below this
  int min_visible_pixels = 135;
  // Metric ranges. The world scale fixes the balance between the 3D loss
  // (scene units squared) and the 2D loss (pixels squared) under the paper
  // weights: at these magnitudes the exact 3D term dominates and the pixel
  // term contributes silhouette signal without imposing its half-pixel
  // discretization bias on the scale. Each instance's depth cap additionally
  // keeps its projection at or above min_extent_px, so every target cloud is
  // dense enough that chamfer sampling noise stays well below the loss floor.
  double scale_min = 2.0;
  double scale_max = 2.9;
  double depth_min = 8.5;
  double depth_max = 12.0;
  double min_extent_px = 48.0;
  // Upright pose band: free yaw, the camera looking down onto the object's
  // top side within this elevation range, small bank jitter. Matches how
  // single-photo scene layouts are shot; objects are not sampled tumbling
  // over full SO(3).
  double elev_min_deg = 30.0;
  double elev_max_deg = 55.0;
  double bank_max_deg = 10.0;
  // Shape mix: fractions for the bracket and box families; spheres take the
  // remainder.
  double frac_bracket = 0.4;
  double frac_box = 0.3;
  int point_budget = 320;          // canonical cloud + candidate sample size
  double depth_noise_sigma = 0.0;  // additive Gaussian on rendered depth
  int candidates = 5;
};

/// Seeded random scene: shapes drawn with the L-bracket favored (it is the
/// only rotation-scored shape), poses drawn inside the view frustum, and
/// placements retried until every instance stays under the occlusion cap
/// with enough visible pixels.
inline SyntheticScene generate_scene(const BenchSceneConfig& cfg, std::uint64_t seed) {
  require(cfg.min_primitives >= 1 && cfg.max_primitives >= cfg.min_primitives,
          "invalid primitive count range");
  require(cfg.max_occlusion >= 0.0 && cfg.max_occlusion < 1.0, "invalid occlusion cap");
  require(cfg.frac_bracket >= 0.0 && cfg.frac_box >= 0.0 &&
              cfg.frac_bracket + cfg.frac_box <= 1.0,
          "invalid shape fractions");
  const PinholeIntrinsics cam = PinholeIntrinsics::centered(cfg.focal, cfg.width, cfg.height);
  require_intrinsics(cam);
  auto rng = seeded_rng(seed, fnv1a("scene-gen"));
  // Cubic skew toward the low end: crowded scenes drive every instance's
  // occlusion up at once, so large counts are sampled but not dominant.
  const int count_span = cfg.max_primitives - cfg.min_primitives + 1;
  const double count_u = uniform01(rng);
  const int count = cfg.min_primitives +
                    std::min(count_span - 1,
                             static_cast<int>(count_u * count_u * count_u * count_span));

  std::vector<PrimitiveSpec> placed;
  SyntheticScene scene;
  constexpr double kPi = 3.14159265358979323846;
  int next_label = 0;
  while (static_cast<int>(placed.size()) < count) {
    bool accepted = false;
    double fallback_occ = std::numeric_limits<double>::infinity();
    PrimitiveSpec fallback_spec;
    SyntheticScene fallback_scene;
    for (int attempt = 0; attempt < 64 && !accepted; ++attempt) {
      PrimitiveSpec spec;
      const double draw = uniform01(rng);
      spec.shape = draw < cfg.frac_bracket
                       ? ShapeKind::l_bracket
                       : (draw < cfg.frac_bracket + cfg.frac_box ? ShapeKind::box
                                                                 : ShapeKind::sphere);
      spec.canonical_size = 1.0;
      spec.point_budget = cfg.point_budget;
      spec.pose.s = uniform_range(rng, cfg.scale_min, cfg.scale_max);
      // R maps canonical +z (object up) to a direction tilted toward the
      // camera by the sampled elevation; yaw spins the object first.
      const double deg = kPi / 180.0;
      const double yaw = uniform_range(rng, -kPi, kPi);
      const double elev = uniform_range(rng, cfg.elev_min_deg * deg, cfg.elev_max_deg * deg);
      const double bank = uniform_range(rng, -cfg.bank_max_deg * deg, cfg.bank_max_deg * deg);
      const Mat3 R = rotation_matrix(EulerRotation{0.0, 0.0, bank}) *
                     rotation_matrix(EulerRotation{0.5 * kPi + elev, 0.0, 0.0}) *
                     rotation_matrix(EulerRotation{0.0, 0.0, yaw});
      spec.pose.r = euler_from_matrix(R);
      const double z_cap = std::max(
          cfg.depth_min, std::min(cfg.depth_max, spec.pose.s * cfg.focal / cfg.min_extent_px));
      const double z = uniform_range(rng, cfg.depth_min, z_cap);
      // keep the whole object's projection inside the image with margin
      const double half_obj = 0.5 * spec.pose.s * 1.74;  // canonical AABB diagonal bound
      const double span_x = (0.5 * cfg.width - 4.0) / cfg.focal * z - half_obj;
      const double span_y = (0.5 * cfg.height - 4.0) / cfg.focal * z - half_obj;
      if (span_x <= 0.0 || span_y <= 0.0) continue;
      spec.pose.t = Vec3(uniform_range(rng, -span_x, span_x),
                         uniform_range(rng, -span_y, span_y), z);
      char label[16];
      std::snprintf(label, sizeof(label), "obj%02d", next_label);
      spec.label = label;

      placed.push_back(spec);
      SyntheticScene trial = raycast_scene(placed, cam, seed);
      bool all_ok = true;
      for (std::size_t k = 0; k < placed.size(); ++k) {
        if (trial.occlusion_fraction[k] > cfg.max_occlusion ||
            trial.masks[k].count() < static_cast<std::size_t>(cfg.min_visible_pixels)) {
          all_ok = false;
          break;
        }
      }
      if (all_ok && trial.occlusion_fraction.back() <= cfg.easy_occlusion) {
        accepted = true;
        scene = std::move(trial);
        ++next_label;
      } else {
        if (all_ok && trial.occlusion_fraction.back() < fallback_occ) {
          fallback_occ = trial.occlusion_fraction.back();
          fallback_spec = placed.back();
          fallback_scene = std::move(trial);
        }
        placed.pop_back();
      }
    }
    if (!accepted && std::isfinite(fallback_occ)) {
      placed.push_back(fallback_spec);
      scene = std::move(fallback_scene);
      accepted = true;
      ++next_label;
    }
    require(accepted, "could not place primitive under occlusion cap");
  }

  if (cfg.depth_noise_sigma > 0.0) {
    auto noise_rng = seeded_rng(seed, fnv1a("depth-noise"));
    for (std::size_t i = 0; i < scene.depth.values.size(); ++i)
      if (scene.depth.valid[i])
        scene.depth.values[i] += cfg.depth_noise_sigma * normal01(noise_rng);
  }
  return scene;
}

}  // namespace scenefit
