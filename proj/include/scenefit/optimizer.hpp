#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "scenefit/camera.hpp"
#include "scenefit/error.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/kdtree.hpp"
#include "scenefit/random.hpp"

namespace scenefit {

using Vec7 = Eigen::Matrix<double, 7, 1>;  // (tx, ty, tz, rx, ry, rz, s)

enum class OptimizeMode { full, only3d, only2d };

inline const char* mode_name(OptimizeMode m) {
  switch (m) {
    case OptimizeMode::only3d: return "only3d";
    case OptimizeMode::only2d: return "only2d";
    default: return "full";
  }
}

inline OptimizeMode mode_from_name(const std::string& s) {
  if (s == "full") return OptimizeMode::full;
  if (s == "only3d") return OptimizeMode::only3d;
  if (s == "only2d") return OptimizeMode::only2d;
  throw Error("unknown mode '" + s + "' (expected full, only3d, or only2d)");
}

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.05;
};

inline void require_weights(const LossWeights& w) {
  require(w.lambda1 >= 0.0 && w.lambda2 >= 0.0, "negative loss weight");
  require(w.lambda1 > 0.0 || w.lambda2 > 0.0, "both loss weights are zero");
}

struct OptimizerConfig {
  int epochs = 20;
  int iters_per_epoch = 2000;
  int phase1_iters = 1200;
  double lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  OptimizeMode mode = OptimizeMode::full;
  std::size_t max_points = 0;  // optional per-cloud subsample bound; 0 disables
};

inline void require_config(const OptimizerConfig& c) {
  require(c.epochs > 0, "non-positive epoch count");
  require(c.iters_per_epoch > 0, "non-positive iteration count");
  require(c.phase1_iters >= 0 && c.phase1_iters <= c.iters_per_epoch,
          "phase1_iters must lie in [0, iters_per_epoch]");
  require(c.lr > 0.0, "non-positive learning rate");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(c.adam_eps > 0.0, "non-positive Adam epsilon");
}

inline Vec7 to_vector(const LayoutParams& p) {
  Vec7 v;
  v << p.t.x(), p.t.y(), p.t.z(), p.r.rx, p.r.ry, p.r.rz, p.s;
  return v;
}

inline LayoutParams from_vector(const Vec7& v) {
  LayoutParams p;
  p.t = Vec3(v[0], v[1], v[2]);
  p.r = EulerRotation{v[3], v[4], v[5]};
  p.s = v[6];
  return p;
}

struct AdamState {
  Vec7 m = Vec7::Zero();
  Vec7 v = Vec7::Zero();
  int step = 0;
};

/// One standard Adam update with bias correction; the scale parameter is
/// clamped to >= 1e-4 afterwards so the model can never collapse to a point.
inline LayoutParams adam_step(AdamState& st, const LayoutParams& params, const Vec7& grad,
                              const OptimizerConfig& cfg) {
  require(grad.allFinite(), "non-finite gradient");
  st.step += 1;
  st.m = cfg.adam_beta1 * st.m + (1.0 - cfg.adam_beta1) * grad;
  st.v = cfg.adam_beta2 * st.v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, st.step);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, st.step);
  Vec7 x = to_vector(params);
  for (int i = 0; i < 7; ++i) {
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
  x[6] = std::max(x[6], 1e-4);
  return from_vector(x);
}

/// Nearest-neighbor correspondences captured at one iterate and held fixed,
/// turning the piecewise-smooth Chamfer loss into a smooth surrogate whose
/// exact gradient the optimizer follows (the standard subgradient choice).
struct FrozenCorrespondences {
  std::vector<std::uint32_t> f3;        // model i -> nearest target index
  std::vector<std::uint32_t> b3;        // target j -> nearest model index
  std::vector<std::uint8_t> included;   // model i projects with z > 1e-6
  std::vector<std::uint32_t> f2;        // model i -> nearest 2D target index
  std::vector<std::uint32_t> b2;        // target j -> nearest included model index
  std::uint32_t n_included = 0;
  bool use3d = true;   // 3D term participates in total and gradient
  bool use2d = false;  // 2D term participates in total and gradient
  bool have2d = false; // 2D correspondences were computable at the capture point
};

/// Per-instance loss engine for Eq. 5: lambda1 * CD3D(s R p + t, target) +
/// lambda2 * CD2D(projections). Target-side structures are static; the 2D
/// loss re-indexes the moving projected model each capture. Backward 3D
/// queries run on the canonical model tree with inverse-transformed targets
/// (a similarity transform preserves the argmin). Not thread-safe: use one
/// engine per concurrently optimized instance.
class LayoutLoss {
 public:
  static constexpr double kMinDepth = 1e-6;  // z at or below this is excluded in 2D

  LayoutLoss(const PointCloud& model, const PointCloud& target, const PinholeIntrinsics& cam,
             const LossWeights& w, OptimizeMode mode)
      : model_(&model), target_(&target), cam_(cam), w_(w), mode_(mode) {
    require(!model.empty() && !target.empty(), "empty cloud");
    require_intrinsics(cam);
    require_weights(w);
    target_tree3_.rebuild(target.points);
    model_tree3_.rebuild(model.points);
    try {
      target2_ = project(target, cam);
      target_tree2_.rebuild(target2_);
      target2d_ok_ = true;
    } catch (const Error& e) {
      target2d_ok_ = false;
      target2d_error_ = e.what();
    }
    const std::size_t nm = model.size();
    const std::size_t nt = target.size();
    rp_.resize(nm);
    world_.resize(nm);
    dxp_.resize(nm);
    dyp_.resize(nm);
    dzp_.resize(nm);
    incl_list_.reserve(nm);
    model2_.reserve(nm);
    hint_f3_.assign(nm, kNoHint);
    hint_f2_.assign(nm, kNoHint);
    hint_b3_.assign(nt, kNoHint);
    hint_b2_.assign(nt, kNoHint);
    fc_.f3.resize(nm);
    fc_.included.resize(nm);
    fc_.f2.resize(nm);
    fc_.b3.resize(nt);
    fc_.b2.resize(nt);
  }

  struct Eval {
    double loss3d = std::numeric_limits<double>::quiet_NaN();
    double loss2d = std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    std::uint32_t excluded = 0;
  };

  const PointCloud& model() const { return *model_; }
  const PointCloud& target() const { return *target_; }

  /// Captures fresh correspondences at `params`. `active2d` states whether the
  /// 2D term drives the update (phase 2 / only2d); when it does, an
  /// unprojectable configuration is an error. Inactive terms are not queried
  /// at all (their losses read NaN), which is what makes the phase split and
  /// the single-term ablations genuinely cheaper per iteration.
  FrozenCorrespondences capture(const LayoutParams& params, bool active2d) {
    capture_into(fc_, params, active2d);
    return fc_;
  }

  /// Loss (and optionally the exact gradient) of the frozen surrogate at
  /// `params`. With the correspondences captured at the same `params` this is
  /// the true Eq. 5 value; at perturbed `params` it is the surrogate the
  /// finite-difference oracle checks the gradient against.
  Eval frozen_eval(const FrozenCorrespondences& fc, const LayoutParams& params,
                   Vec7* grad) const {
    require(params.s > 0.0, "non-positive scale");
    const std::size_t nm = model_->size();
    const std::size_t nt = target_->size();
    const Mat3 rx = rotation_x(params.r.rx), ry = rotation_y(params.r.ry),
               rz = rotation_z(params.r.rz);
    const Mat3 rot = rz * ry * rx;
    Mat3 dx, dy, dz;
    if (grad) {
      dx = rz * ry * rotation_x_deriv(params.r.rx);
      dy = rz * rotation_y_deriv(params.r.ry) * rx;
      dz = rotation_z_deriv(params.r.rz) * ry * rx;
      grad->setZero();
    }
    for (std::size_t i = 0; i < nm; ++i) {
      const Vec3& p = model_->points[i];
      rp_[i] = rot * p;
      world_[i] = params.s * rp_[i] + params.t;
      if (grad) {
        dxp_[i] = dx * p;
        dyp_[i] = dy * p;
        dzp_[i] = dz * p;
      }
    }
    Eval ev;
    ev.excluded = static_cast<std::uint32_t>(nm - fc.n_included);

    // r is d(term)/d(world point), already weighted; chain through the transform.
    auto accumulate = [&](std::size_t i, const Vec3& r) {
      (*grad)[0] += r.x();
      (*grad)[1] += r.y();
      (*grad)[2] += r.z();
      (*grad)[3] += params.s * r.dot(dxp_[i]);
      (*grad)[4] += params.s * r.dot(dyp_[i]);
      (*grad)[5] += params.s * r.dot(dzp_[i]);
      (*grad)[6] += r.dot(rp_[i]);
    };

    if (fc.use3d) {  // 3D term: forward (model->target) + backward (target->model) means
      double fwd = 0.0;
      for (std::size_t i = 0; i < nm; ++i) {
        const Vec3 v = world_[i] - target_->points[fc.f3[i]];
        fwd += v.squaredNorm();
        if (grad) accumulate(i, (2.0 * w_.lambda1 / nm) * v);
      }
      double bwd = 0.0;
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t i = fc.b3[j];
        const Vec3 v = world_[i] - target_->points[j];
        bwd += v.squaredNorm();
        if (grad) accumulate(i, (2.0 * w_.lambda1 / nt) * v);
      }
      ev.loss3d = fwd / static_cast<double>(nm) + bwd / static_cast<double>(nt);
    }

    if (fc.have2d && fc.n_included > 0) {
      const double f = cam_.focal;
      auto project_i = [&](std::size_t i) {
        const Vec3& p = world_[i];
        return Vec2(f * p.x() / p.z() + cam_.cx, f * p.y() / p.z() + cam_.cy);
      };
      // d(term)/d(projected point) -> d/d(world point) via the pinhole Jacobian
      auto accumulate2 = [&](std::size_t i, const Vec2& r2) {
        const Vec3& p = world_[i];
        const double fz = f / p.z();
        accumulate(i, Vec3(fz * r2.x(), fz * r2.y(),
                           -fz * (p.x() * r2.x() + p.y() * r2.y()) / p.z()));
      };
      double fwd = 0.0;
      for (std::size_t i = 0; i < nm; ++i) {
        if (!fc.included[i]) continue;
        const Vec2 v = project_i(i) - target2_[fc.f2[i]];
        fwd += v.squaredNorm();
        if (grad && fc.use2d) accumulate2(i, (2.0 * w_.lambda2 / fc.n_included) * v);
      }
      double bwd = 0.0;
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t i = fc.b2[j];
        const Vec2 v = project_i(i) - target2_[j];
        bwd += v.squaredNorm();
        if (grad && fc.use2d) accumulate2(i, (2.0 * w_.lambda2 / nt) * v);
      }
      ev.loss2d = fwd / static_cast<double>(fc.n_included) + bwd / static_cast<double>(nt);
    }

    ev.total = (fc.use3d ? w_.lambda1 * ev.loss3d : 0.0) +
               (fc.use2d ? w_.lambda2 * ev.loss2d : 0.0);
    return ev;
  }

  /// Fresh correspondences + evaluation in one call: what the optimizer runs
  /// every iteration.
  Eval evaluate(const LayoutParams& params, bool active2d, Vec7* grad) {
    capture_into(fc_, params, active2d);
    return frozen_eval(fc_, params, grad);
  }

 private:
  static constexpr std::uint32_t kNoHint = std::numeric_limits<std::uint32_t>::max();

  void capture_into(FrozenCorrespondences& fc, const LayoutParams& params, bool active2d) {
    require(params.s > 0.0, "non-positive scale");
    const std::size_t nm = model_->size();
    const std::size_t nt = target_->size();
    const Mat3 rot = rotation_matrix(params.r);
    for (std::size_t i = 0; i < nm; ++i)
      world_[i] = params.s * (rot * model_->points[i]) + params.t;

    fc.use3d = mode_ != OptimizeMode::only2d;
    fc.use2d = active2d;

    if (fc.use3d) {
      for (std::size_t i = 0; i < nm; ++i) {
        const Neighbor nn = target_tree3_.nearest(world_[i], hint_f3_[i]);
        hint_f3_[i] = nn.index;
        fc.f3[i] = nn.index;
      }
      // argmin_i |q - (s R p_i + t)|^2 = argmin_i |R^T (q - t) / s - p_i|^2,
      // so the static canonical-model tree answers the backward direction.
      const Mat3 rot_t = rot.transpose();
      const double inv_s = 1.0 / params.s;
      for (std::size_t j = 0; j < nt; ++j) {
        const Vec3 y = rot_t * (target_->points[j] - params.t) * inv_s;
        const Neighbor nn = model_tree3_.nearest(y, hint_b3_[j]);
        hint_b3_[j] = nn.index;
        fc.b3[j] = nn.index;
      }
    }

    // An inactive 2D term is never queried: correspondences are the sole
    // per-iteration cost driver, and the persisted trace keeps only each
    // epoch's final (phase 2) iteration, so nothing observable is lost.
    fc.have2d = false;
    fc.n_included = 0;
    if (!active2d) {
      std::fill(fc.included.begin(), fc.included.end(), std::uint8_t{0});
      return;
    }
    require(target2d_ok_, target2d_error_);
    incl_list_.clear();
    model2_.clear();
    for (std::size_t i = 0; i < nm; ++i) {
      const Vec3& p = world_[i];
      if (p.z() > kMinDepth) {
        fc.included[i] = 1;
        incl_list_.push_back(static_cast<std::uint32_t>(i));
        model2_.push_back(Vec2(cam_.focal * p.x() / p.z() + cam_.cx,
                               cam_.focal * p.y() / p.z() + cam_.cy));
      } else {
        fc.included[i] = 0;
      }
    }
    fc.n_included = static_cast<std::uint32_t>(incl_list_.size());
    require(fc.n_included > 0, "all points behind camera");
    fc.have2d = true;
    for (std::size_t k = 0; k < incl_list_.size(); ++k) {
      const std::uint32_t i = incl_list_[k];
      const Neighbor nn = target_tree2_.nearest(model2_[k], hint_f2_[i]);
      hint_f2_[i] = nn.index;
      fc.f2[i] = nn.index;
    }
    model_tree2_.rebuild(model2_);
    for (std::size_t j = 0; j < nt; ++j) {
      // b2 hints index the included list, whose meaning shifts as points drop
      // in and out; the distance recomputation keeps stale hints harmless.
      const Neighbor nn = model_tree2_.nearest(target2_[j], hint_b2_[j]);
      hint_b2_[j] = nn.index;
      fc.b2[j] = incl_list_[nn.index];
    }
  }

  const PointCloud* model_;
  const PointCloud* target_;
  PinholeIntrinsics cam_;
  LossWeights w_;
  OptimizeMode mode_;

  KdTree3 target_tree3_;
  KdTree3 model_tree3_;   // canonical frame; serves backward 3D queries
  PointCloud2 target2_;
  KdTree2 target_tree2_;
  bool target2d_ok_ = false;
  std::string target2d_error_;

  KdTree2 model_tree2_;   // rebuilt per capture over included projections
  FrozenCorrespondences fc_;
  mutable std::vector<Vec3> rp_, world_, dxp_, dyp_, dzp_;
  std::vector<std::uint32_t> incl_list_;
  PointCloud2 model2_;
  std::vector<std::uint32_t> hint_f3_, hint_f2_, hint_b3_, hint_b2_;
};

struct LossBreakdown {
  double total = 0.0;
  double loss3d = 0.0;
  double loss2d = 0.0;
  std::uint32_t excluded = 0;
};

/// One-shot Eq. 5 evaluation: total = lambda1 * loss3d + (phase == 2 ?
/// lambda2 * loss2d : 0); loss2d reads NaN in phase 1 (term never queried).
inline LossBreakdown loss_total(const PointCloud& model, const PointCloud& target,
                                const LayoutParams& params, const PinholeIntrinsics& cam,
                                const LossWeights& w, int phase) {
  require(phase == 1 || phase == 2, "phase must be 1 or 2");
  LayoutLoss loss(model, target, cam, w, OptimizeMode::full);
  const LayoutLoss::Eval ev = loss.evaluate(params, phase == 2, nullptr);
  return LossBreakdown{ev.total, ev.loss3d, ev.loss2d, ev.excluded};
}

/// Exact gradient of the fixed-correspondence surrogate of Eq. 5 at `params`,
/// with correspondences captured at `params` itself.
inline Vec7 loss_gradient(const PointCloud& model, const PointCloud& target,
                          const LayoutParams& params, const PinholeIntrinsics& cam,
                          const LossWeights& w, int phase) {
  require(phase == 1 || phase == 2, "phase must be 1 or 2");
  LayoutLoss loss(model, target, cam, w, OptimizeMode::full);
  Vec7 g;
  loss.evaluate(params, phase == 2, &g);
  return g;
}

struct IterationRecord {
  double loss3d = 0.0;
  double loss2d = 0.0;
  double total = 0.0;
  std::uint32_t excluded = 0;
};

struct EpochRecord {
  LayoutParams params;  // parameters after the epoch's final iteration
  double loss = std::numeric_limits<double>::infinity();  // end-of-epoch total
  bool failed = false;
  std::string error;
  std::vector<IterationRecord> iters;
};

struct OptimizationTrace {
  std::vector<EpochRecord> epochs;
  int chosen_epoch = -1;
};

struct OptimizeResult {
  LayoutParams params;
  OptimizationTrace trace;
};

/// Deterministic stride subsample keeping at most n points (order-preserving).
inline PointCloud stride_subsample(const PointCloud& cloud, std::size_t n) {
  if (n == 0 || cloud.size() <= n) return cloud;
  PointCloud out;
  out.points.reserve(n);
  const double stride = static_cast<double>(cloud.size()) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    out.points.push_back(cloud.points[static_cast<std::size_t>(i * stride)]);
  return out;
}

/// Multi-epoch restart optimization of phi = {T, R, S} (Eq. 5 schedule):
/// each epoch re-initializes rotation, scale from the AABB extent ratio, and
/// translation so centroids coincide, then runs phase-1 (3D only) and
/// phase-2 (3D + 2D) iterations under Adam. Epoch 0 starts at the identity
/// rotation; every later epoch draws Euler angles uniform in [-pi, pi) per
/// axis, so restarts sample rotation basins the first epoch cannot reach.
/// The epoch with the minimum end-of-epoch total is returned; ties go to the
/// earliest epoch.
inline OptimizeResult optimize_layout(const PointCloud& model, const PointCloud& target,
                                      const PinholeIntrinsics& cam, const LossWeights& w,
                                      const OptimizerConfig& cfg) {
  require_config(cfg);
  const PointCloud m = stride_subsample(model, cfg.max_points);
  const PointCloud t = stride_subsample(target, cfg.max_points);
  LayoutLoss loss(m, t, cam, w, cfg.mode);

  const double model_extent = bounds(m).max_extent();
  require(model_extent > 0.0, "zero extent");
  const double s0 = std::max(bounds(t).max_extent() / model_extent, 1e-4);
  const Vec3 model_centroid = centroid(m);
  const Vec3 target_centroid = centroid(t);

  auto rng = seeded_rng(cfg.seed, fnv1a("layout-epochs"));
  constexpr double kPi = 3.14159265358979323846;

  OptimizationTrace trace;
  trace.epochs.resize(cfg.epochs);
  for (int e = 0; e < cfg.epochs; ++e) {
    EulerRotation r0;  // epoch 0: identity
    if (e > 0) {  // draw unconditionally so later epochs never depend on failures
      r0.rx = uniform_range(rng, -kPi, kPi);
      r0.ry = uniform_range(rng, -kPi, kPi);
      r0.rz = uniform_range(rng, -kPi, kPi);
    }
    EpochRecord& er = trace.epochs[e];
    try {
      LayoutParams p;
      p.r = r0;
      p.s = s0;
      p.t = target_centroid - p.s * (rotation_matrix(r0) * model_centroid);
      AdamState adam;
      er.iters.reserve(cfg.iters_per_epoch);
      for (int it = 0; it < cfg.iters_per_epoch; ++it) {
        const bool active2d = cfg.mode == OptimizeMode::only2d ||
                              (cfg.mode == OptimizeMode::full && it >= cfg.phase1_iters);
        Vec7 g;
        const LayoutLoss::Eval ev = loss.evaluate(p, active2d, &g);
        er.iters.push_back(IterationRecord{ev.loss3d, ev.loss2d, ev.total, ev.excluded});
        require(g.allFinite(),
                "non-finite gradient at epoch " + std::to_string(e) + " iteration " +
                    std::to_string(it));
        p = adam_step(adam, p, g, cfg);
      }
      const bool final2d = cfg.mode != OptimizeMode::only3d;
      const LayoutLoss::Eval fin = loss.evaluate(p, final2d, nullptr);
      er.params = p;
      er.loss = fin.total;
    } catch (const Error& ex) {
      // Partial iteration records stay in place as context for the failure.
      er.failed = true;
      er.error = ex.what();
      er.loss = std::numeric_limits<double>::infinity();
    }
  }

  int chosen = -1;
  for (int e = 0; e < cfg.epochs; ++e) {
    const EpochRecord& er = trace.epochs[e];
    if (er.failed) continue;
    if (chosen < 0 || er.loss < trace.epochs[chosen].loss) chosen = e;
  }
  require(chosen >= 0, "all epochs failed");
  trace.chosen_epoch = chosen;
  return OptimizeResult{trace.epochs[chosen].params, std::move(trace)};
}

}  // namespace scenefit
