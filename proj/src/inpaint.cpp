#include "cxr/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace cxr {

namespace {

enum Flag : unsigned char { KNOWN = 0, BAND = 1, INSIDE = 2 };

constexpr double kFar = 1e6;

using Raster = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Flags = Eigen::Array<unsigned char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One quadratic solve of |grad T| = 1 from a horizontal/vertical neighbour
// pair; only finalised (KNOWN) neighbours contribute.
double eikonal_pair(double t1, bool k1, double t2, bool k2) {
  if (k1 && k2) {
    if (std::abs(t1 - t2) >= 1.0) return 1.0 + std::min(t1, t2);
    const double d = 2.0 - (t1 - t2) * (t1 - t2);
    return (t1 + t2 + std::sqrt(d)) / 2.0;
  }
  if (k1) return 1.0 + t1;
  if (k2) return 1.0 + t2;
  return kFar;
}

double eikonal_solve(const Raster& T, const Flags& flags, int y, int x) {
  const int h = static_cast<int>(T.rows()), w = static_cast<int>(T.cols());
  const auto at = [&](int yy, int xx) -> std::pair<double, bool> {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return {kFar, false};
    return {T(yy, xx), flags(yy, xx) == KNOWN};
  };
  const auto [tl, kl] = at(y, x - 1);
  const auto [tr, kr] = at(y, x + 1);
  const auto [tu, ku] = at(y - 1, x);
  const auto [td, kd] = at(y + 1, x);
  double best = eikonal_pair(tl, kl, tu, ku);
  best = std::min(best, eikonal_pair(tr, kr, tu, ku));
  best = std::min(best, eikonal_pair(tl, kl, td, kd));
  best = std::min(best, eikonal_pair(tr, kr, td, kd));
  return best;
}

// Central difference where both side pixels are KNOWN, one-sided where only
// one is, zero otherwise.
template <typename Array>
std::pair<double, double> known_gradient(const Array& v, const Flags& flags, int y, int x) {
  const int h = static_cast<int>(v.rows()), w = static_cast<int>(v.cols());
  const auto known = [&](int yy, int xx) {
    return yy >= 0 && yy < h && xx >= 0 && xx < w && flags(yy, xx) == KNOWN;
  };
  double gx = 0.0, gy = 0.0;
  const bool l = known(y, x - 1), r = known(y, x + 1);
  if (l && r)
    gx = (static_cast<double>(v(y, x + 1)) - v(y, x - 1)) / 2.0;
  else if (r)
    gx = static_cast<double>(v(y, x + 1)) - v(y, x);
  else if (l)
    gx = static_cast<double>(v(y, x)) - v(y, x - 1);
  const bool u = known(y - 1, x), d = known(y + 1, x);
  if (u && d)
    gy = (static_cast<double>(v(y + 1, x)) - v(y - 1, x)) / 2.0;
  else if (d)
    gy = static_cast<double>(v(y + 1, x)) - v(y, x);
  else if (u)
    gy = static_cast<double>(v(y, x)) - v(y - 1, x);
  return {gx, gy};
}

}  // namespace

ImageBuffer fmm_inpaint(const ImageBuffer& img, const BinaryMask& mask, double radius,
                        FmmTrace* trace) {
  const int h = height(img), w = width(img);
  if (mask.rows() != img.rows() || mask.cols() != img.cols())
    throw std::invalid_argument("fmm_inpaint: mask dimensions do not match image");
  if (radius < 1.0) throw std::invalid_argument("fmm_inpaint: radius must be >= 1");
  if (img.size() == 0) throw std::invalid_argument("fmm_inpaint: empty image");
  if ((mask != 0).all())
    throw std::invalid_argument("fmm_inpaint: mask covers the whole image, nothing to march from");

  ImageBuffer out = img;
  if ((mask == 0).all()) {
    if (trace) {
      trace->arrival = Raster::Zero(h, w);
      trace->fill_order.clear();
    }
    return out;
  }

  Flags flags(h, w);
  Raster T(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      flags(y, x) = mask(y, x) ? INSIDE : KNOWN;
      T(y, x) = mask(y, x) ? kFar : 0.0;
    }

  // Min-heap on (T, y, x); stale entries are skipped when popped.
  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  static const int dy4[] = {-1, 0, 0, 1};
  static const int dx4[] = {0, -1, 1, 0};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (flags(y, x) != INSIDE) continue;
      for (int n = 0; n < 4; ++n) {
        const int ny = y + dy4[n], nx = x + dx4[n];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        if (flags(ny, nx) == KNOWN) {
          flags(y, x) = BAND;
          T(y, x) = 0.0;
          heap.emplace(0.0, y, x);
          break;
        }
      }
    }

  const int ir = static_cast<int>(std::ceil(radius));
  const double r2max = radius * radius;
  if (trace) trace->fill_order.clear();

  while (!heap.empty()) {
    const auto [t, y, x] = heap.top();
    heap.pop();
    if (flags(y, x) == KNOWN || t != T(y, x)) continue;  // stale entry

    // Fill the pixel from finalised neighbours within the radius.
    const auto [gtx, gty] = known_gradient(T, flags, y, x);
    double wsum = 0.0, vsum = 0.0;
    for (int dy = -ir; dy <= ir; ++dy)
      for (int dx = -ir; dx <= ir; ++dx) {
        const int qy = y + dy, qx = x + dx;
        if ((dy == 0 && dx == 0) || qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
        if (flags(qy, qx) != KNOWN) continue;
        const double r2 = static_cast<double>(dx) * dx + static_cast<double>(dy) * dy;
        if (r2 > r2max) continue;
        const double rlen = std::sqrt(r2);
        // vector from contributor q to target p is (-dx, -dy)
        double dir = std::abs((-dx) * gtx + (-dy) * gty) / rlen;
        if (dir < 1e-6) dir = 1e-6;
        const double dst = 1.0 / r2;
        const double lev = 1.0 / (1.0 + std::abs(T(qy, qx) - t));
        const double weight = dir * dst * lev;
        const auto [gix, giy] = known_gradient(out, flags, qy, qx);
        vsum += weight * (out(qy, qx) + gix * (-dx) + giy * (-dy));
        wsum += weight;
      }
    out(y, x) = static_cast<float>(std::clamp(vsum / wsum, 0.0, 1.0));
    flags(y, x) = KNOWN;
    if (trace) trace->fill_order.emplace_back(y, x);

    for (int n = 0; n < 4; ++n) {
      const int ny = y + dy4[n], nx = x + dx4[n];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      if (flags(ny, nx) == KNOWN) continue;
      const double tn = eikonal_solve(T, flags, ny, nx);
      if (flags(ny, nx) == INSIDE || tn < T(ny, nx)) {
        flags(ny, nx) = BAND;
        T(ny, nx) = tn;
        heap.emplace(tn, ny, nx);
      }
    }
  }

  if ((flags == INSIDE).any())
    throw std::logic_error("fmm_inpaint: march left unfilled pixels");
  if (trace) trace->arrival = T;
  return out;
}

MarkerRemoval remove_markers(const ImageBuffer& img, const MarkerParams& params, double radius) {
  MarkerRemoval out;
  out.markers = detect_markers(img, params);
  if (out.markers.boxes.empty()) {
    out.image = img;
    out.markers.mask = BinaryMask::Zero(img.rows(), img.cols());
    out.markers.boxes.clear();
    return out;
  }
  const int w = width(img), h = height(img);
  out.markers.mask = morph(out.markers.mask, MorphOp::dilate, 3, 3);
  for (Box& b : out.markers.boxes) {
    const int x1 = std::min(w, b.x + b.w + 1), y1 = std::min(h, b.y + b.h + 1);
    b.x = std::max(0, b.x - 1);
    b.y = std::max(0, b.y - 1);
    b.w = x1 - b.x;
    b.h = y1 - b.y;
  }
  out.image = fmm_inpaint(img, out.markers.mask, radius);
  return out;
}

}  // namespace cxr
