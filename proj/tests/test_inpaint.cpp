#include <doctest.h>

#include <algorithm>

#include "cxr/inpaint.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

ImageBuffer random_image(Rng& rng, int h, int w) {
  ImageBuffer img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(y, x) = static_cast<float>(rng.next_double());
  return img;
}

}  // namespace

TEST_CASE("empty mask is a no-op") {
  Rng rng(3);
  ImageBuffer img = random_image(rng, 8, 8);
  BinaryMask mask = BinaryMask::Zero(8, 8);
  FmmTrace trace;
  ImageBuffer out = fmm_inpaint(img, mask, 3.0, &trace);
  CHECK((out == img).all());
  CHECK(trace.fill_order.empty());
}

TEST_CASE("constant image refills to the same constant") {
  ImageBuffer img = ImageBuffer::Constant(16, 16, 0.6f);
  BinaryMask mask = BinaryMask::Zero(16, 16);
  for (int y = 5; y < 10; ++y)
    for (int x = 4; x < 11; ++x) mask(y, x) = 1;
  ImageBuffer out = fmm_inpaint(img, mask);
  CHECK(((out - 0.6f).abs() < 1e-6f).all());
}

TEST_CASE("linear ramp is restored by the gradient-extrapolated average") {
  const int n = 32;
  ImageBuffer img(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img(y, x) = static_cast<float>(x) / (n - 1);
  BinaryMask mask = BinaryMask::Zero(n, n);
  for (int y = 14; y < 18; ++y)
    for (int x = 14; x < 18; ++x) mask(y, x) = 1;
  ImageBuffer out = fmm_inpaint(img, mask, 3.0);
  float worst = 0.0f;
  for (int y = 14; y < 18; ++y)
    for (int x = 14; x < 18; ++x)
      worst = std::max(worst, std::abs(out(y, x) - static_cast<float>(x) / (n - 1)));
  CHECK(worst <= 0.02f);
}

TEST_CASE("pixels outside the mask are untouched and output is clean") {
  Rng rng(17);
  ImageBuffer img = random_image(rng, 24, 20);
  BinaryMask mask = BinaryMask::Zero(24, 20);
  // a few scattered blobs, including one touching the border
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) mask(y, x) = 1;
  for (int y = 10; y < 15; ++y)
    for (int x = 8; x < 16; ++x) mask(y, x) = 1;
  mask(23, 19) = 1;

  ImageBuffer out = fmm_inpaint(img, mask, 4.0);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 20; ++x) {
      if (mask(y, x) == 0) CHECK(out(y, x) == img(y, x));
      CHECK(std::isfinite(out(y, x)));
      CHECK(out(y, x) >= 0.0f);
      CHECK(out(y, x) <= 1.0f);
    }
}

TEST_CASE("march order is monotone in arrival time and covers the mask") {
  Rng rng(29);
  ImageBuffer img = random_image(rng, 20, 20);
  BinaryMask mask = BinaryMask::Zero(20, 20);
  for (int y = 4; y < 14; ++y)
    for (int x = 6; x < 17; ++x) mask(y, x) = 1;

  FmmTrace trace;
  fmm_inpaint(img, mask, 3.0, &trace);

  // every masked pixel filled exactly once
  BinaryMask seen = BinaryMask::Zero(20, 20);
  for (auto [y, x] : trace.fill_order) {
    CHECK(mask(y, x) == 1);
    CHECK(seen(y, x) == 0);
    seen(y, x) = 1;
  }
  CHECK((seen == mask).all());

  double prev = 0.0;
  for (auto [y, x] : trace.fill_order) {
    CHECK(trace.arrival(y, x) >= prev);
    prev = trace.arrival(y, x);
  }

  // arrival time is zero exactly on the initial boundary: known pixels and
  // mask pixels with a 4-neighbour outside the mask
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      if (mask(y, x) == 0) {
        CHECK(trace.arrival(y, x) == 0.0);
        continue;
      }
      bool boundary = false;
      if (y > 0) boundary = boundary || mask(y - 1, x) == 0;
      if (y < 19) boundary = boundary || mask(y + 1, x) == 0;
      if (x > 0) boundary = boundary || mask(y, x - 1) == 0;
      if (x < 19) boundary = boundary || mask(y, x + 1) == 0;
      if (boundary)
        CHECK(trace.arrival(y, x) == 0.0);
      else
        CHECK(trace.arrival(y, x) > 0.0);
    }
}

TEST_CASE("degenerate inputs are rejected") {
  ImageBuffer img = ImageBuffer::Constant(6, 6, 0.5f);
  CHECK_THROWS_AS(fmm_inpaint(img, BinaryMask::Constant(6, 6, 1)), std::invalid_argument);
  CHECK_THROWS_AS(fmm_inpaint(img, BinaryMask::Zero(5, 6)), std::invalid_argument);
  CHECK_THROWS_AS(fmm_inpaint(img, BinaryMask::Zero(6, 6), 0.5), std::invalid_argument);
}

TEST_CASE("remove_markers passes clean images through untouched") {
  ImageBuffer plate(96, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) plate(y, x) = 0.3f + 0.2f * static_cast<float>(y) / 95.0f;
  MarkerRemoval res = remove_markers(plate);
  CHECK(res.markers.boxes.empty());
  CHECK((res.markers.mask == 0).all());
  CHECK((res.image == plate).all());
}

TEST_CASE("remove_markers restores a plate under a corner text block") {
  ImageBuffer plate(128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) plate(y, x) = 0.3f + 0.2f * static_cast<float>(y) / 127.0f;
  ImageBuffer marked = plate;
  const Box block{6, 6, 40, 12};
  for (int y = block.y; y < block.y + block.h; ++y)
    for (int x = block.x; x < block.x + block.w; ++x) marked(y, x) = 0.95f;

  MarkerRemoval res = remove_markers(marked);
  REQUIRE(res.markers.boxes.size() == 1);

  double err = 0.0;
  for (int y = block.y; y < block.y + block.h; ++y)
    for (int x = block.x; x < block.x + block.w; ++x)
      err += std::abs(res.image(y, x) - plate(y, x));
  err /= static_cast<double>(block.w) * block.h;
  CHECK(err <= 0.1);

  // nothing inside the detected box may stay much brighter than its
  // surroundings: compare against the 99th percentile of a ring around it
  const Box b = res.markers.boxes[0];
  std::vector<float> ring;
  float peak = 0.0f;
  for (int y = std::max(0, b.y - 6); y < std::min(128, b.y + b.h + 6); ++y)
    for (int x = std::max(0, b.x - 6); x < std::min(128, b.x + b.w + 6); ++x) {
      if (b.contains(x, y))
        peak = std::max(peak, res.image(y, x));
      else
        ring.push_back(res.image(y, x));
    }
  std::sort(ring.begin(), ring.end());
  const float p99 = ring[static_cast<size_t>(0.99 * (ring.size() - 1))];
  CHECK(peak <= p99 + 0.1f);

  // the mask used is the one reported, and set bits stay inside boxes
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      if (res.markers.mask(y, x) == 0) {
        CHECK(res.image(y, x) == marked(y, x));
      } else {
        bool inside = false;
        for (const Box& bb : res.markers.boxes) inside = inside || bb.contains(x, y);
        CHECK(inside);
      }
    }
}
