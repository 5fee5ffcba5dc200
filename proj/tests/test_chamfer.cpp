#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "oracles.hpp"
#include "scenefit/chamfer.hpp"
#include "scenefit/kdtree.hpp"
#include "scenefit/random.hpp"

using namespace scenefit;

TEST_CASE("kd-tree nearest matches a linear scan, ties break to lowest index") {
  auto rng = seeded_rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    PointCloud data = oracles::random_cloud(rng, 256, -1.0, 1.0);
    // inject duplicates so distance ties actually occur
    data.points[100] = data.points[7];
    data.points[200] = data.points[7];
    KdTree<3> tree;
    tree.rebuild(data.points);
    for (int q = 0; q < 100; ++q) {
      Vec3 query(uniform_range(rng, -1.2, 1.2), uniform_range(rng, -1.2, 1.2),
                 uniform_range(rng, -1.2, 1.2));
      if (q % 10 == 0) query = data.points[uniform_index(rng, data.size())];  // exact hits
      const Neighbor got = tree.nearest(query);
      const Neighbor expect = oracles::linear_nearest(data.points, query);
      REQUIRE(got.index == expect.index);
      REQUIRE(got.dist_sq == Catch::Approx(expect.dist_sq).margin(1e-15));
    }
  }
}

TEST_CASE("kd-tree warm start returns the same answer") {
  auto rng = seeded_rng(22);
  PointCloud data = oracles::random_cloud(rng, 512, -1.0, 1.0);
  KdTree<3> tree;
  tree.rebuild(data.points);
  std::uint32_t hint = std::numeric_limits<std::uint32_t>::max();  // cold first
  for (int q = 0; q < 200; ++q) {
    const Vec3 query(uniform_range(rng, -1, 1), uniform_range(rng, -1, 1),
                     uniform_range(rng, -1, 1));
    const Neighbor cold = tree.nearest(query);
    const Neighbor warm = tree.nearest(query, hint);
    REQUIRE(warm.index == cold.index);
    REQUIRE(warm.dist_sq == cold.dist_sq);
    hint = warm.index;  // stale for the next query on purpose
  }
}

TEST_CASE("kd-tree rebuild reuses the structure correctly") {
  auto rng = seeded_rng(23);
  KdTree<3> tree;
  for (int rep = 0; rep < 4; ++rep) {
    PointCloud data = oracles::random_cloud(rng, 64 + 32 * rep, -2.0, 2.0);
    tree.rebuild(data.points);
    for (int q = 0; q < 32; ++q) {
      const Vec3 query(uniform_range(rng, -2, 2), uniform_range(rng, -2, 2),
                       uniform_range(rng, -2, 2));
      const Neighbor got = tree.nearest(query);
      const Neighbor expect = oracles::linear_nearest(data.points, query);
      REQUIRE(got.index == expect.index);
    }
  }
}

TEST_CASE("chamfer distance on a hand-checked pair") {
  // a = {(0,0,0)}, b = {(1,0,0), (0,2,0)}:
  // forward mean = 1; backward mean = (1 + 4)/2 = 2.5; total 3.5
  PointCloud a({Vec3(0, 0, 0)});
  PointCloud b({Vec3(1, 0, 0), Vec3(0, 2, 0)});
  REQUIRE(chamfer_distance(a, b) == Catch::Approx(3.5));
}

TEST_CASE("chamfer distance matches the brute-force oracle") {
  auto rng = seeded_rng(24);
  for (int rep = 0; rep < 10; ++rep) {
    PointCloud a = oracles::random_cloud(rng, 64, -1.0, 1.0);
    PointCloud b = oracles::random_cloud(rng, 96, -1.0, 1.0);
    const double got = chamfer_distance(a, b);
    const double expect = oracles::brute_chamfer(a.points, b.points);
    REQUIRE(got == Catch::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("chamfer distance properties") {
  auto rng = seeded_rng(25);
  PointCloud a = oracles::random_cloud(rng, 80, -1.0, 1.0);
  PointCloud b = oracles::random_cloud(rng, 64, -1.0, 1.0);
  SECTION("symmetry") {
    REQUIRE(chamfer_distance(a, b) == Catch::Approx(chamfer_distance(b, a)));
  }
  SECTION("identity of indiscernibles") { REQUIRE(chamfer_distance(a, a) == 0.0); }
  SECTION("non-negative") { REQUIRE(chamfer_distance(a, b) >= 0.0); }
  SECTION("shrinks when clouds move together") {
    PointCloud shifted_far = b;
    PointCloud shifted_near = b;
    for (auto& p : shifted_far.points) p += Vec3(10, 0, 0);
    for (auto& p : shifted_near.points) p += Vec3(0.1, 0, 0);
    REQUIRE(chamfer_distance(a, shifted_near) < chamfer_distance(a, shifted_far));
  }
  SECTION("empty input is an error") {
    REQUIRE_THROWS_WITH(chamfer_distance(PointCloud{}, a),
                        Catch::Matchers::ContainsSubstring("empty cloud"));
    REQUIRE_THROWS_WITH(chamfer_distance(a, PointCloud{}),
                        Catch::Matchers::ContainsSubstring("empty cloud"));
  }
}

TEST_CASE("chamfer distance in 2D matches the oracle") {
  auto rng = seeded_rng(26);
  PointCloud2 a = oracles::random_cloud_2d(rng, 48, -5.0, 5.0);
  PointCloud2 b = oracles::random_cloud_2d(rng, 72, -5.0, 5.0);
  const double got = chamfer_distance<2>(a, b);
  const double expect = oracles::brute_chamfer(a, b);
  REQUIRE(got == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("f-score hand-checked values") {
  PointCloud gt({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  SECTION("perfect match scores 100") {
    REQUIRE(f_score(gt, gt, 0.01) == Catch::Approx(100.0));
  }
  SECTION("half the prediction inside the threshold") {
    // pred = {(0,0,0), (5,0,0)}: precision 50 (one of two within 0.5 of gt),
    // recall 50 ((0,0,0) matched, (1,0,0) nearest pred 1.0 away > 0.5)
    PointCloud pred({Vec3(0, 0, 0), Vec3(5, 0, 0)});
    REQUIRE(f_score(pred, gt, 0.5) == Catch::Approx(50.0));
  }
  SECTION("no overlap scores 0") {
    PointCloud pred({Vec3(100, 0, 0)});
    REQUIRE(f_score(pred, gt, 0.01) == 0.0);
  }
  SECTION("threshold boundary is inclusive") {
    PointCloud pred({Vec3(0.5, 0, 0), Vec3(1.5, 0, 0)});
    // both pred points exactly 0.5 from gt, both gt points exactly 0.5 from pred
    REQUIRE(f_score(pred, gt, 0.5) == Catch::Approx(100.0));
  }
}

TEST_CASE("f-score matches the brute-force oracle") {
  auto rng = seeded_rng(27);
  for (int rep = 0; rep < 10; ++rep) {
    PointCloud pred = oracles::random_cloud(rng, 128, -1.0, 1.0);
    PointCloud gt = oracles::random_cloud(rng, 128, -1.0, 1.0);
    for (double thr : {0.05, 0.2, 1.0}) {
      const double got = f_score(pred, gt, thr);
      const double expect = oracles::brute_f_score(pred.points, gt.points, thr);
      REQUIRE(got == Catch::Approx(expect).margin(1e-9));
    }
  }
}

TEST_CASE("f-score is invariant to point order") {
  auto rng = seeded_rng(28);
  PointCloud pred = oracles::random_cloud(rng, 60, -1.0, 1.0);
  PointCloud gt = oracles::random_cloud(rng, 60, -1.0, 1.0);
  const double base = f_score(pred, gt, 0.3);
  PointCloud pred_shuffled = pred;
  PointCloud gt_shuffled = gt;
  std::reverse(pred_shuffled.points.begin(), pred_shuffled.points.end());
  std::reverse(gt_shuffled.points.begin(), gt_shuffled.points.end());
  REQUIRE(f_score(pred_shuffled, gt_shuffled, 0.3) == Catch::Approx(base));
}

TEST_CASE("f-score rejects bad input") {
  PointCloud a({Vec3(0, 0, 0)});
  REQUIRE_THROWS_WITH(f_score(PointCloud{}, a, 0.1),
                      Catch::Matchers::ContainsSubstring("empty cloud"));
  REQUIRE_THROWS_AS(f_score(a, a, 0.0), Error);
  REQUIRE_THROWS_AS(f_score(a, a, -1.0), Error);
}
