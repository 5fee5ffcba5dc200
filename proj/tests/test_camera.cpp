#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "scenefit/camera.hpp"
#include "scenefit/random.hpp"

using namespace scenefit;

TEST_CASE("project_point maps the optical axis to the principal point") {
  const PinholeIntrinsics k = PinholeIntrinsics::centered(100.0, 640, 480);
  REQUIRE(k.cx == Catch::Approx(320.0));
  REQUIRE(k.cy == Catch::Approx(240.0));
  const Vec2 uv = project_point(Vec3(0, 0, 2), k);
  REQUIRE(uv.x() == Catch::Approx(320.0));
  REQUIRE(uv.y() == Catch::Approx(240.0));
  // unit offset at unit depth moves exactly focal pixels
  const Vec2 uv2 = project_point(Vec3(1, 0, 1), k);
  REQUIRE(uv2.x() == Catch::Approx(420.0));
}

TEST_CASE("project rejects points behind the camera with the offending index") {
  const PinholeIntrinsics k = PinholeIntrinsics::centered(50.0, 64, 64);
  PointCloud c({Vec3(0, 0, 1), Vec3(0, 0, -1)});
  REQUIRE_THROWS_WITH(project(c, k), Catch::Matchers::ContainsSubstring("point behind camera"));
  REQUIRE_THROWS_WITH(project(c, k), Catch::Matchers::ContainsSubstring("1"));
}

TEST_CASE("backproject_depth inverts projection back to the pixel grid") {
  auto rng = seeded_rng(31);
  for (double focal : {10.0, 100.0, 1000.0, 10000.0}) {
    const int w = 32, h = 24;
    const PinholeIntrinsics k = PinholeIntrinsics::centered(focal, w, h);
    DepthMap depth(w, h);
    // fill with random positive depths, leave a few invalid
    for (int i = 0; i < w * h; ++i) {
      if (i % 17 == 3) continue;  // stays invalid
      depth.values[i] = uniform_range(rng, 0.5, 6.0);
      depth.valid[i] = 1;
    }
    const Pointmap pm = backproject_depth(depth, k);
    REQUIRE(pm.valid_count() == static_cast<std::size_t>(
        std::count(depth.valid.begin(), depth.valid.end(), 1)));
    // every back-projected point must project to its own pixel coordinates
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = pm.idx(x, y);
        REQUIRE(pm.valid[i] == depth.valid[i]);
        if (!pm.valid[i]) continue;
        const Vec2 uv = project_point(pm.points[i], k);
        REQUIRE(uv.x() == Catch::Approx(x).margin(1e-9));
        REQUIRE(uv.y() == Catch::Approx(y).margin(1e-9));
        REQUIRE(pm.points[i].z() == Catch::Approx(depth.values[i]).margin(1e-12));
      }
    }
  }
}

TEST_CASE("backproject_depth checks dimensions") {
  const PinholeIntrinsics k = PinholeIntrinsics::centered(50.0, 8, 8);
  REQUIRE_THROWS_WITH(backproject_depth(DepthMap(4, 4), k),
                      Catch::Matchers::ContainsSubstring("dimensions"));
}

TEST_CASE("estimate_focal recovers the exact focal from a clean pointmap") {
  auto rng = seeded_rng(32);
  for (double focal : {35.0, 120.0, 800.0}) {
    const int w = 48, h = 36;
    const PinholeIntrinsics k = PinholeIntrinsics::centered(focal, w, h);
    Pointmap pm(w, h);
    // synthesize: pick a random 3D point per pixel that actually projects there
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double z = uniform_range(rng, 0.5, 5.0);
        const double px = (x - k.cx) * z / k.focal;
        const double py = (y - k.cy) * z / k.focal;
        pm.points[pm.idx(x, y)] = Vec3(px, py, z);
        pm.valid[pm.idx(x, y)] = 1;
      }
    }
    const PinholeIntrinsics est = estimate_focal(pm);
    REQUIRE(est.focal == Catch::Approx(focal).epsilon(1e-9));
    REQUIRE(est.cx == Catch::Approx(w / 2.0));
    REQUIRE(est.cy == Catch::Approx(h / 2.0));
    REQUIRE(est.width == w);
    REQUIRE(est.height == h);
  }
}

TEST_CASE("estimate_focal is least-squares optimal under noise") {
  auto rng = seeded_rng(33);
  const double focal = 150.0;
  const int w = 40, h = 30;
  const PinholeIntrinsics k = PinholeIntrinsics::centered(focal, w, h);
  Pointmap pm(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double z = uniform_range(rng, 1.0, 4.0);
      const double px = (x - k.cx) * z / k.focal + uniform_range(rng, -0.01, 0.01);
      const double py = (y - k.cy) * z / k.focal + uniform_range(rng, -0.01, 0.01);
      pm.points[pm.idx(x, y)] = Vec3(px, py, z);
      pm.valid[pm.idx(x, y)] = 1;
    }
  }
  const double est = estimate_focal(pm).focal;
  REQUIRE(est == Catch::Approx(focal).epsilon(0.05));

  // oracle: est must beat every focal on a grid at the reprojection objective
  auto objective = [&](double f) {
    double sum = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec3& p = pm.points[pm.idx(x, y)];
        const double du = (f * p.x() / p.z() + k.cx) - x;
        const double dv = (f * p.y() / p.z() + k.cy) - y;
        sum += du * du + dv * dv;
      }
    }
    return sum;
  };
  const double best = objective(est);
  for (double f = 50.0; f <= 400.0; f += 2.5) REQUIRE(best <= objective(f) + 1e-9);
}

TEST_CASE("estimate_focal rejects degenerate input") {
  Pointmap pm(8, 8);
  // all points on the optical axis: x = y = 0 at every pixel -> denominator 0
  for (int i = 0; i < 64; ++i) {
    pm.points[i] = Vec3(0, 0, 1.0 + i * 0.01);
    pm.valid[i] = 1;
  }
  REQUIRE_THROWS_WITH(estimate_focal(pm),
                      Catch::Matchers::ContainsSubstring("degenerate pointmap"));
}

TEST_CASE("pointmap_to_cloud keeps only valid pixels in row-major order") {
  Pointmap pm(2, 2);
  pm.points[0] = Vec3(1, 0, 1);
  pm.points[3] = Vec3(2, 0, 1);
  pm.valid[0] = 1;
  pm.valid[3] = 1;
  const PointCloud c = pointmap_to_cloud(pm);
  REQUIRE(c.size() == 2);
  REQUIRE(c.points[0].isApprox(Vec3(1, 0, 1)));
  REQUIRE(c.points[1].isApprox(Vec3(2, 0, 1)));
  REQUIRE_THROWS_WITH(pointmap_to_cloud(Pointmap(3, 3)),
                      Catch::Matchers::ContainsSubstring("no valid pixels"));
}

TEST_CASE("intrinsics validation") {
  PinholeIntrinsics k = PinholeIntrinsics::centered(100.0, 64, 48);
  REQUIRE_NOTHROW(require_intrinsics(k));
  k.focal = 0;
  REQUIRE_THROWS_AS(require_intrinsics(k), Error);
  k = PinholeIntrinsics::centered(100.0, 0, 48);
  REQUIRE_THROWS_AS(require_intrinsics(k), Error);
}
