#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "nfbench/core/rng.hpp"
#include "nfbench/encoding/camera.hpp"
#include "nfbench/encoding/posenc.hpp"

using namespace nfbench;
using Catch::Approx;

TEST_CASE("positional encoding analytic fixtures") {
  SECTION("gamma(0), l=2") {
    Tensord out = positional_encode_vec<double>({0.0}, {.octaves = 2});
    REQUIRE(out.size() == 4);
    double expect[4] = {0, 0, 1, 1};
    for (int i = 0; i < 4; ++i) REQUIRE(out[i] == Approx(expect[i]).margin(1e-12));
  }
  SECTION("gamma(0.5), l=1") {
    Tensord out = positional_encode_vec<double>({0.5}, {.octaves = 1});
    REQUIRE(out[0] == Approx(1.0).margin(1e-12));
    REQUIRE(out[1] == Approx(0.0).margin(1e-12));
  }
  SECTION("gamma(1), l=3") {
    Tensord out = positional_encode_vec<double>({1.0}, {.octaves = 3});
    double expect[6] = {0, 0, 0, -1, 1, 1};
    for (int i = 0; i < 6; ++i) REQUIRE(out[i] == Approx(expect[i]).margin(1e-12));
  }
}

TEST_CASE("positional encoding dimensions and range") {
  PosEncConfig cfg{.octaves = 5};
  REQUIRE(cfg.out_dim(3) == 3 * 10);
  REQUIRE(PosEncConfig{.octaves = 4, .include_identity = true}.out_dim(2) == 18);

  CounterRng rng(3, 0);
  Tensord coords({64, 3});
  for (std::size_t i = 0; i < coords.size(); ++i)
    coords[i] = rng.uniform(-1, 1);
  Tensord out = positional_encode(coords, cfg);
  REQUIRE(out.rows() == 64);
  REQUIRE(out.cols() == cfg.out_dim(3));
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out[i] <= 1.0);
    REQUIRE(out[i] >= -1.0);
  }
}

TEST_CASE("positional encoding rejects zero octaves") {
  REQUIRE_THROWS(positional_encode_vec<double>({0.0}, {.octaves = 0}));
}

TEST_CASE("ray through the principal point is the optical axis") {
  Camera cam;
  cam.fx = cam.fy = 100;
  cam.cx = 32;
  cam.cy = 32;
  cam.width = cam.height = 64;
  Ray r = ray_from_pixel(cam, 32, 32);
  REQUIRE(r.direction.x == Approx(0.0).margin(1e-12));
  REQUIRE(r.direction.y == Approx(0.0).margin(1e-12));
  REQUIRE(r.direction.z == Approx(-1.0).margin(1e-12));

  SECTION("translation moves the origin, not the direction") {
    Camera moved = cam;
    moved.translation = {3, -1, 7};
    Ray r2 = ray_from_pixel(moved, 32, 32);
    REQUIRE(r2.direction.x == r.direction.x);
    REQUIRE(r2.direction.y == r.direction.y);
    REQUIRE(r2.direction.z == r.direction.z);
    REQUIRE(r2.origin.x == 3.0);
    REQUIRE(r2.origin.y == -1.0);
    REQUIRE(r2.origin.z == 7.0);
  }
}

TEST_CASE("every pixel ray has unit direction") {
  Camera cam = look_at_camera({2, 1.5, 3}, {0, 0, 0}, 80, 64, 48);
  REQUIRE(cam.rotation_orthonormal());
  CounterRng rng(17, 0);
  for (int i = 0; i < 200; ++i) {
    Ray r = ray_from_pixel(cam, rng.uniform(0, 64), rng.uniform(0, 48));
    REQUIRE(r.direction.norm() == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("degenerate intrinsics are rejected") {
  Camera cam;
  cam.width = cam.height = 8;
  cam.fx = 0;
  cam.fy = 10;
  REQUIRE_THROWS_WITH(ray_from_pixel(cam, 4, 4),
                      Catch::Matchers::ContainsSubstring("focal"));
}

TEST_CASE("plucker fixtures") {
  auto p0 = plucker_from_ray({{0, 0, 0}, {0, 0, 1}});
  std::array<double, 6> want0{0, 0, 1, 0, 0, 0};
  REQUIRE(p0 == want0);

  // co-linear ray: same 6-vector exactly
  auto p1 = plucker_from_ray({{0, 0, 5}, {0, 0, 1}});
  REQUIRE(p1 == want0);

  // hand-computed cross product
  auto p2 = plucker_from_ray({{1, 0, 0}, {0, 0, 1}});
  std::array<double, 6> want2{0, 0, 1, 0, -1, 0};
  REQUIRE(p2 == want2);
}

TEST_CASE("plucker invariance under origin sliding") {
  CounterRng rng(99, 0);
  for (int i = 0; i < 10000; ++i) {
    Vec3 o{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    Vec3 d = Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}
                 .normalized();
    double t = rng.uniform(-10, 10);
    auto a = plucker_from_ray({o, d});
    auto b = plucker_from_ray({o + d * t, d});
    for (int k = 0; k < 6; ++k) REQUIRE(a[k] == Approx(b[k]).margin(1e-6));
  }
}

TEST_CASE("camera fixtures round-trip through text") {
  std::vector<Camera> cams;
  for (int i = 0; i < 4; ++i) {
    double a = i * 1.3;
    cams.push_back(look_at_camera({3 * std::cos(a), 1.0, 3 * std::sin(a)},
                                  {0, 0, 0}, 60, 32, 32));
  }
  std::ostringstream os;
  write_cameras(os, cams);
  std::istringstream is(os.str());
  std::vector<Camera> back = read_cameras(is);
  REQUIRE(back.size() == cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    REQUIRE(back[i].fx == cams[i].fx);
    REQUIRE(back[i].translation.x == cams[i].translation.x);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        REQUIRE(back[i].rot[r][c] == cams[i].rot[r][c]);
  }
}

TEST_CASE("camera fixture with bad rotation is rejected") {
  std::istringstream is(
      "camera 8 8 10 10 4 4\n"
      "pose 2 0 0 0  0 1 0 0  0 0 1 0\n");
  REQUIRE_THROWS_WITH(read_cameras(is),
                      Catch::Matchers::ContainsSubstring("orthonormal"));
}
