#include "cxr/enhance.hpp"

#include <algorithm>
#include <stdexcept>

namespace cxr {

namespace {

int bin_of(float v, int bins) {
  const float p = std::min(1.0f, std::max(0.0f, v));
  return std::min(static_cast<int>(p * bins), bins - 1);
}

// One tile's equalisation map: clipped histogram -> cdf scaled to [0,1].
std::vector<double> tile_map(const ImageBuffer& img, int x0, int x1, int y0, int y1,
                             double clip_limit, int bins) {
  std::vector<long> hist(bins, 0);
  const long npix = static_cast<long>(x1 - x0) * (y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) ++hist[bin_of(img(y, x), bins)];

  const long threshold = std::max(1L, static_cast<long>(clip_limit * npix / bins));
  long excess = 0;
  for (long& h : hist)
    if (h > threshold) {
      excess += h - threshold;
      h = threshold;
    }
  const long add = excess / bins;
  const long rem = excess % bins;
  for (int b = 0; b < bins; ++b) hist[b] += add + (b < rem ? 1 : 0);

  std::vector<double> map(bins);
  long cdf = 0;
  for (int b = 0; b < bins; ++b) {
    cdf += hist[b];
    map[b] = static_cast<double>(cdf) / npix;
  }
  return map;
}

// For each pixel coordinate along one axis, the pair of bracketing tile
// centres and the blend weight towards the second one.
struct AxisBlend {
  std::vector<int> lo, hi;
  std::vector<double> w;
};

AxisBlend axis_blend(int extent, const std::vector<double>& centres) {
  AxisBlend ab;
  ab.lo.resize(extent);
  ab.hi.resize(extent);
  ab.w.resize(extent);
  const int n = static_cast<int>(centres.size());
  for (int p = 0; p < extent; ++p) {
    int lo = -1;
    while (lo + 1 < n && centres[lo + 1] <= p) ++lo;
    int hi = lo + 1;
    if (lo < 0) {
      lo = hi = 0;
    } else if (hi >= n) {
      hi = lo;
    }
    ab.lo[p] = lo;
    ab.hi[p] = hi;
    ab.w[p] = lo == hi ? 0.0 : (p - centres[lo]) / (centres[hi] - centres[lo]);
  }
  return ab;
}

}  // namespace

std::vector<int> histogram(const ImageBuffer& img, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (img.size() == 0) throw std::invalid_argument("histogram: empty image");
  std::vector<int> h(bins, 0);
  for (Eigen::Index i = 0; i < img.size(); ++i) ++h[bin_of(img.data()[i], bins)];
  return h;
}

ImageBuffer equalize_clahe(const ImageBuffer& img, int tiles_x, int tiles_y,
                           double clip_limit, int bins) {
  const int w = width(img), h = height(img);
  if (img.size() == 0) throw std::invalid_argument("equalize_clahe: empty image");
  if (tiles_x < 1 || tiles_y < 1) throw std::invalid_argument("equalize_clahe: tile grid must be >= 1x1");
  if (tiles_x > w || tiles_y > h) throw std::invalid_argument("equalize_clahe: more tiles than pixels");
  if (clip_limit <= 0.0) throw std::invalid_argument("equalize_clahe: clip limit must be positive");
  if (bins < 2) throw std::invalid_argument("equalize_clahe: need at least 2 bins");

  // Tile spans; the last row/column absorbs the division remainder.
  std::vector<int> xs(tiles_x + 1), ys(tiles_y + 1);
  for (int t = 0; t < tiles_x; ++t) xs[t] = t * (w / tiles_x);
  xs[tiles_x] = w;
  for (int t = 0; t < tiles_y; ++t) ys[t] = t * (h / tiles_y);
  ys[tiles_y] = h;

  std::vector<std::vector<double>> maps(static_cast<size_t>(tiles_x) * tiles_y);
  std::vector<double> cx(tiles_x), cy(tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx)
      maps[static_cast<size_t>(ty) * tiles_x + tx] =
          tile_map(img, xs[tx], xs[tx + 1], ys[ty], ys[ty + 1], clip_limit, bins);
  for (int tx = 0; tx < tiles_x; ++tx) cx[tx] = xs[tx] + (xs[tx + 1] - xs[tx] - 1) / 2.0;
  for (int ty = 0; ty < tiles_y; ++ty) cy[ty] = ys[ty] + (ys[ty + 1] - ys[ty] - 1) / 2.0;

  const AxisBlend bx = axis_blend(w, cx);
  const AxisBlend by = axis_blend(h, cy);

  ImageBuffer out(h, w);
  for (int y = 0; y < h; ++y) {
    const auto& m0 = by.lo[y];
    const auto& m1 = by.hi[y];
    const double wy = by.w[y];
    for (int x = 0; x < w; ++x) {
      const int b = bin_of(img(y, x), bins);
      const double top = (1.0 - bx.w[x]) * maps[static_cast<size_t>(m0) * tiles_x + bx.lo[x]][b] +
                         bx.w[x] * maps[static_cast<size_t>(m0) * tiles_x + bx.hi[x]][b];
      const double bot = (1.0 - bx.w[x]) * maps[static_cast<size_t>(m1) * tiles_x + bx.lo[x]][b] +
                         bx.w[x] * maps[static_cast<size_t>(m1) * tiles_x + bx.hi[x]][b];
      out(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

}  // namespace cxr
