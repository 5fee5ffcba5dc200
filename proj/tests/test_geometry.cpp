#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/random.hpp"

using namespace scenefit;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("normalize_cloud centers and scales to unit max extent") {
  PointCloud c({Vec3(2, 0, 0), Vec3(4, 0, 0)});
  auto [out, rec] = normalize_cloud(c);
  REQUIRE(out.points[0].isApprox(Vec3(-0.5, 0, 0), 1e-15));
  REQUIRE(out.points[1].isApprox(Vec3(0.5, 0, 0), 1e-15));
  REQUIRE(rec.centroid.isApprox(Vec3(3, 0, 0), 1e-15));
  REQUIRE(rec.divisor == Catch::Approx(2.0));
}

TEST_CASE("normalize_cloud is idempotent on normalized input") {
  auto rng = seeded_rng(11);
  PointCloud c = oracles::random_cloud(rng, 64, -3.0, 5.0);
  auto [once, rec1] = normalize_cloud(c);
  auto [twice, rec2] = normalize_cloud(once);
  for (std::size_t i = 0; i < once.size(); ++i)
    REQUIRE((twice.points[i] - once.points[i]).norm() < 1e-12);
  REQUIRE(rec2.divisor == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("normalize_cloud round-trips through denormalize") {
  auto rng = seeded_rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    PointCloud c = oracles::random_cloud(rng, 50, -10.0, 10.0);
    auto [norm, rec] = normalize_cloud(c);
    PointCloud back = denormalize_cloud(norm, rec);
    for (std::size_t i = 0; i < c.size(); ++i)
      REQUIRE((back.points[i] - c.points[i]).norm() < 1e-9);
    // invariants: centroid at origin, max extent 1
    REQUIRE(centroid(norm).norm() < 1e-12);
    REQUIRE(bounds(norm).max_extent() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("normalize_cloud rejects degenerate input") {
  PointCloud c({Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3(1, 2, 3)});
  REQUIRE_THROWS_WITH(normalize_cloud(c), Catch::Matchers::ContainsSubstring("zero extent"));
  REQUIRE_THROWS_WITH(normalize_cloud(PointCloud{}),
                      Catch::Matchers::ContainsSubstring("empty cloud"));
}

TEST_CASE("apply_transform identity and simple cases") {
  PointCloud c({Vec3(1, 1, 1), Vec3(-2, 0.5, 3)});
  SECTION("identity params leave the cloud unchanged") {
    PointCloud out = apply_transform(c, LayoutParams{});
    for (std::size_t i = 0; i < c.size(); ++i) REQUIRE(out.points[i] == c.points[i]);
  }
  SECTION("scale then translate") {
    LayoutParams p;
    p.t = Vec3(1, 0, 0);
    p.s = 2.0;
    PointCloud out = apply_transform(c, p);
    REQUIRE(out.points[0].isApprox(Vec3(3, 2, 2), 1e-15));
  }
  SECTION("quarter turn about z") {
    LayoutParams p;
    p.r.rz = kPi / 2;
    PointCloud out = apply_transform(PointCloud({Vec3(1, 0, 0)}), p);
    REQUIRE((out.points[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  }
  SECTION("non-positive scale is an error") {
    LayoutParams p;
    p.s = 0.0;
    REQUIRE_THROWS_AS(apply_transform(c, p), Error);
  }
}

TEST_CASE("apply_transform round-trips through its inverse") {
  auto rng = seeded_rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    PointCloud c = oracles::random_cloud(rng, 32, -2.0, 2.0);
    LayoutParams p;
    p.t = Vec3(uniform_range(rng, -5, 5), uniform_range(rng, -5, 5), uniform_range(rng, -5, 5));
    p.r = oracles::random_rotation(rng);
    p.s = uniform_range(rng, 0.1, 4.0);
    PointCloud back = apply_inverse_transform(apply_transform(c, p), p);
    for (std::size_t i = 0; i < c.size(); ++i)
      REQUIRE((back.points[i] - c.points[i]).norm() < 1e-9);
  }
}

TEST_CASE("rotation_geodesic_error basic values") {
  EulerRotation id;
  REQUIRE(rotation_geodesic_error(id, id) == 0.0);
  EulerRotation half;
  half.rz = kPi;
  REQUIRE(rotation_geodesic_error(id, half) == Catch::Approx(kPi));
}

TEST_CASE("rotation_geodesic_error matches quaternion oracle") {
  auto rng = seeded_rng(14);
  for (int rep = 0; rep < 100; ++rep) {
    EulerRotation a = oracles::random_rotation(rng);
    EulerRotation b = oracles::random_rotation(rng);
    const double got = rotation_geodesic_error(a, b);
    const double expect = oracles::quaternion_geodesic(rotation_matrix(a), rotation_matrix(b));
    REQUIRE(got == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("rotation_geodesic_error is right-composition invariant") {
  auto rng = seeded_rng(15);
  for (int rep = 0; rep < 50; ++rep) {
    EulerRotation a = oracles::random_rotation(rng);
    EulerRotation b = oracles::random_rotation(rng);
    EulerRotation c = oracles::random_rotation(rng);
    const Mat3 rc = rotation_matrix(c);
    const double plain = rotation_geodesic_error(a, b);
    const double composed = rotation_geodesic_error(
        euler_from_matrix(rotation_matrix(a) * rc), euler_from_matrix(rotation_matrix(b) * rc));
    REQUIRE(plain == Catch::Approx(composed).margin(1e-9));
  }
}

TEST_CASE("euler_from_matrix inverts rotation_matrix") {
  auto rng = seeded_rng(16);
  for (int rep = 0; rep < 100; ++rep) {
    EulerRotation r = oracles::random_rotation(rng);
    const Mat3 m = rotation_matrix(r);
    const Mat3 back = rotation_matrix(euler_from_matrix(m));
    REQUIRE((back - m).norm() < 1e-9);
  }
}

TEST_CASE("bounds and centroid") {
  PointCloud c({Vec3(1, -1, 0), Vec3(3, 5, -2)});
  const Aabb box = bounds(c);
  REQUIRE(box.min.isApprox(Vec3(1, -1, -2)));
  REQUIRE(box.max.isApprox(Vec3(3, 5, 0)));
  REQUIRE(box.max_extent() == Catch::Approx(6.0));
  REQUIRE(centroid(c).isApprox(Vec3(2, 2, -1)));
}
