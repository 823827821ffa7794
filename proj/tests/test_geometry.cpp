#include "kinetrack/geometry.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace kinetrack;

namespace {

// Overlap measured by counting cell centers of a fine grid over [0,1]^2.
double grid_iou(const BBox& a, const BBox& b, int cells) {
  long in_a = 0, in_b = 0, both = 0;
  auto inside = [](const BBox& r, double x, double y) {
    return x >= r.left() && x < r.right() && y >= r.top() && y < r.bottom();
  };
  for (int i = 0; i < cells; ++i) {
    const double x = (i + 0.5) / cells;
    for (int j = 0; j < cells; ++j) {
      const double y = (j + 0.5) / cells;
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// Edges on multiples of 1/200, so counting 200x200 cells is exact.
BBox lattice_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pos(0, 150), ext(1, 50);
  const int l = pos(rng), t = pos(rng), w = ext(rng), h = ext(rng);
  return BBox::from_tlwh(l, t, w, h, 200, 200);
}

BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.2, 0.8), s(0.05, 0.3);
  return BBox{c(rng), c(rng), s(rng), s(rng)};
}

}  // namespace

TEST_CASE("iou fixed cases") {
  const BBox a{0.3, 0.4, 0.2, 0.1};
  CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(iou(BBox{0.1, 0.1, 0.1, 0.1}, BBox{0.9, 0.9, 0.1, 0.1}) == 0.0);
  // corner form (0,0,2,2) and (1,0,2,2) in a 10x10 image
  const BBox p = BBox::from_tlwh(0, 0, 2, 2, 10, 10);
  const BBox q = BBox::from_tlwh(1, 0, 2, 2, 10, 10);
  CHECK(iou(p, q) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  // touching edges share no area
  CHECK(iou(BBox::from_tlwh(0, 0, 2, 2, 10, 10), BBox::from_tlwh(2, 0, 2, 2, 10, 10)) < 1e-12);
}

TEST_CASE("iou against grid counting, symmetric, bounded") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 300; ++k) {
    const BBox a = lattice_box(rng), b = lattice_box(rng);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    CHECK(v == doctest::Approx(grid_iou(a, b, 200)).epsilon(1e-12));
  }
}

TEST_CASE("encode/decode") {
  const BBox prev{0.5, 0.5, 0.1, 0.2};
  const Offset4 zero = encode_offset(prev, prev);
  CHECK(zero == Offset4{});
  const Offset4 o = encode_offset(prev, BBox{0.52, 0.5, 0.1, 0.2});
  CHECK(o.d_cx == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(o.d_cy == 0.0);
  CHECK(o.d_w == 0.0);
  CHECK(o.d_h == 0.0);
  CHECK(decode_offset(prev, Offset4{}) == prev);

  std::mt19937_64 rng(11);
  for (int k = 0; k < 1000; ++k) {
    const BBox a = random_box(rng), b = random_box(rng);
    DecodeStats stats;
    const BBox r = decode_offset(a, encode_offset(a, b), &stats);
    CHECK(std::abs(r.cx - b.cx) < 1e-15);
    CHECK(std::abs(r.cy - b.cy) < 1e-15);
    CHECK(std::abs(r.w - b.w) < 1e-15);
    CHECK(std::abs(r.h - b.h) < 1e-15);
    CHECK(stats.center_clamps == 0);
    CHECK(stats.dim_clamps == 0);
  }
}

TEST_CASE("decode clamps and counts") {
  DecodeStats stats;
  const BBox b = decode_offset(BBox{0.5, 0.5, 0.01, 0.1}, Offset4{0, 0, -0.02, 0}, &stats);
  CHECK(b.w == kMinBoxDim);
  CHECK(stats.dim_clamps == 1);
  const BBox c = decode_offset(BBox{0.99, 0.01, 0.1, 0.1}, Offset4{0.05, -0.05, 0, -1.0}, &stats);
  CHECK(c.cx == 1.0);
  CHECK(c.cy == 0.0);
  CHECK(c.h == kMinBoxDim);
  CHECK(stats.center_clamps == 2);
  CHECK(stats.dim_clamps == 2);
}

TEST_CASE("pixel round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1500.0), s(1.0, 400.0);
  for (int k = 0; k < 500; ++k) {
    const double l = u(rng), t = u(rng) * 0.6, w = s(rng), h = s(rng);
    const auto back = BBox::from_tlwh(l, t, w, h, 1920, 1080).to_tlwh(1920, 1080);
    CHECK(std::abs(back.left - l) < 1e-9);
    CHECK(std::abs(back.top - t) < 1e-9);
    CHECK(std::abs(back.width - w) < 1e-9);
    CHECK(std::abs(back.height - h) < 1e-9);
  }
  const BBox b = BBox::from_tlwh(10, 20, 30, 40, 100, 100);
  CHECK(b.cx == doctest::Approx(0.25));
  CHECK(b.cy == doctest::Approx(0.40));
  CHECK(b.aspect() == doctest::Approx(0.75));
}
