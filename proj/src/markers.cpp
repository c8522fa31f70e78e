#include "cxr/markers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include <json.hpp>

#include "cxr/enhance.hpp"

namespace cxr {

namespace {

std::vector<double> sampled_gaussian(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

int bin_of(float v, int bins) {
  const float p = std::min(1.0f, std::max(0.0f, v));
  return std::min(static_cast<int>(p * bins), bins - 1);
}

// 1d dilate/erode along rows or columns; rectangular kernels separate into
// the two axis passes exactly.
BinaryMask morph1d(const BinaryMask& m, int radius, bool horizontal, bool dilate) {
  const int h = static_cast<int>(m.rows()), w = static_cast<int>(m.cols());
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool hit = !dilate;
      for (int d = -radius; d <= radius; ++d) {
        const int xx = horizontal ? x + d : x;
        const int yy = horizontal ? y : y + d;
        // out of bounds counts as background either way
        const bool v = xx >= 0 && xx < w && yy >= 0 && yy < h && m(yy, xx) != 0;
        if (dilate && v) {
          hit = true;
          break;
        }
        if (!dilate && !v) {
          hit = false;
          break;
        }
      }
      out(y, x) = hit ? 1 : 0;
    }
  return out;
}

BinaryMask dilate_rect(const BinaryMask& m, int rw, int rh) {
  return morph1d(morph1d(m, rw, true, true), rh, false, true);
}

BinaryMask erode_rect(const BinaryMask& m, int rw, int rh) {
  return morph1d(morph1d(m, rw, true, false), rh, false, false);
}

}  // namespace

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be positive");
  if (img.size() == 0) throw std::invalid_argument("gaussian_blur: empty image");
  const std::vector<double> k = sampled_gaussian(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int h = height(img), w = width(img);

  ImageBuffer tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += k[d + radius] * img(y, std::clamp(x + d, 0, w - 1));
      tmp(y, x) = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += k[d + radius] * tmp(std::clamp(y + d, 0, h - 1), x);
      out(y, x) = static_cast<float>(acc);
    }
  return out;
}

int otsu_threshold(const std::vector<int>& hist) {
  if (hist.empty()) throw std::invalid_argument("otsu_threshold: empty histogram");
  const int bins = static_cast<int>(hist.size());
  long total = 0, weighted = 0;
  int nonzero = -1, nonzero_count = 0;
  for (int b = 0; b < bins; ++b) {
    if (hist[b] < 0) throw std::invalid_argument("otsu_threshold: negative count");
    if (hist[b] > 0) {
      nonzero = b;
      ++nonzero_count;
    }
    total += hist[b];
    weighted += static_cast<long>(hist[b]) * b;
  }
  if (total == 0) throw std::invalid_argument("otsu_threshold: histogram has no mass");
  if (nonzero_count == 1) return nonzero;  // no split exists, report the only bin

  int best_t = 0;
  double best_var = -1.0;
  long n0 = 0, s0 = 0;
  for (int t = 0; t < bins; ++t) {
    n0 += hist[t];
    s0 += static_cast<long>(hist[t]) * t;
    const long n1 = total - n0;
    if (n0 == 0) continue;
    if (n1 == 0) break;
    const double w0 = static_cast<double>(n0) / total;
    const double w1 = static_cast<double>(n1) / total;
    const double mu0 = static_cast<double>(s0) / n0;
    const double mu1 = static_cast<double>(weighted - s0) / n1;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

BinaryMask binarize(const ImageBuffer& img, int level, int bins) {
  if (bins < 1) throw std::invalid_argument("binarize: bins must be >= 1");
  if (level < 0 || level >= bins) throw std::invalid_argument("binarize: level must be in [0, bins)");
  BinaryMask out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < img.size(); ++i)
    out.data()[i] = bin_of(img.data()[i], bins) > level ? 1 : 0;
  return out;
}

BinaryMask morph(const BinaryMask& mask, MorphOp op, int kw, int kh) {
  if (kw < 1 || kh < 1 || kw % 2 == 0 || kh % 2 == 0)
    throw std::invalid_argument("morph: kernel dimensions must be odd and >= 1");
  const int rw = kw / 2, rh = kh / 2;
  switch (op) {
    case MorphOp::dilate:
      return dilate_rect(mask, rw, rh);
    case MorphOp::erode:
      return erode_rect(mask, rw, rh);
    case MorphOp::open:
      return dilate_rect(erode_rect(mask, rw, rh), rw, rh);
    case MorphOp::close: {
      // Work on a canvas padded by the kernel radius: dilated mass near the
      // border lands in the pad instead of being clipped, which keeps the
      // subsequent erosion from eating border pixels. This makes closing
      // idempotent and extensive, which clipping at the frame would break.
      const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
      BinaryMask canvas = BinaryMask::Zero(h + 2 * rh, w + 2 * rw);
      canvas.block(rh, rw, h, w) = mask;
      canvas = erode_rect(dilate_rect(canvas, rw, rh), rw, rh);
      return canvas.block(rh, rw, h, w);
    }
  }
  throw std::invalid_argument("morph: unknown op");
}

ComponentLabels connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  ComponentLabels out;
  out.labels = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(h, w);

  static const int dx8[] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static const int dy8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static const int dx4[] = {0, -1, 1, 0};
  static const int dy4[] = {-1, 0, 0, 1};
  const int* dx = connectivity == 8 ? dx8 : dx4;
  const int* dy = connectivity == 8 ? dy8 : dy4;
  const int nn = connectivity;

  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask(y, x) == 0 || out.labels(y, x) != 0) continue;
      const int label = static_cast<int>(out.components.size()) + 1;
      Component comp;
      comp.box = {x, y, 1, 1};
      int x1 = x, y1 = y;
      out.labels(y, x) = label;
      queue.emplace_back(y, x);
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        ++comp.pixels;
        comp.box.x = std::min(comp.box.x, cx);
        comp.box.y = std::min(comp.box.y, cy);
        x1 = std::max(x1, cx);
        y1 = std::max(y1, cy);
        for (int n = 0; n < nn; ++n) {
          const int ny = cy + dy[n], nx = cx + dx[n];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (mask(ny, nx) == 0 || out.labels(ny, nx) != 0) continue;
          out.labels(ny, nx) = label;
          queue.emplace_back(ny, nx);
        }
      }
      comp.box.w = x1 - comp.box.x + 1;
      comp.box.h = y1 - comp.box.y + 1;
      out.components.push_back(comp);
    }
  return out;
}

MarkerMask detect_markers(const ImageBuffer& img, const MarkerParams& params) {
  if (params.min_area < 1) throw std::invalid_argument("detect_markers: min_area must be >= 1");
  if (params.max_area_frac <= 0.0 || params.max_area_frac >= 1.0)
    throw std::invalid_argument("detect_markers: max_area_frac must be in (0,1)");
  if (params.aspect_min > params.aspect_max)
    throw std::invalid_argument("detect_markers: aspect_min must be <= aspect_max");

  const int h = height(img), w = width(img);
  ImageBuffer work = gaussian_blur(img, params.blur_sigma);
  if (params.highpass) work = (img - work).cwiseMax(0.0f).cwiseMin(1.0f);

  const int level = otsu_threshold(histogram(work, params.bins));
  BinaryMask bw = binarize(work, level, params.bins);
  BinaryMask closed = morph(bw, MorphOp::close, params.close_kernel_w, params.close_kernel_h);
  ComponentLabels cc = connected_components(closed, params.connectivity);

  MarkerMask out;
  out.mask = BinaryMask::Zero(h, w);
  const double max_area = params.max_area_frac * static_cast<double>(w) * h;
  for (const Component& comp : cc.components) {
    const double aspect = static_cast<double>(comp.box.w) / comp.box.h;
    if (comp.pixels < params.min_area || static_cast<double>(comp.pixels) > max_area) continue;
    if (aspect < params.aspect_min || aspect > params.aspect_max) continue;
    out.boxes.push_back(comp.box);
  }
  for (const Box& b : out.boxes)
    for (int y = b.y; y < b.y + b.h; ++y)
      for (int x = b.x; x < b.x + b.w; ++x)
        if (closed(y, x) != 0) out.mask(y, x) = 1;
  return out;
}

std::string boxes_to_json(const std::vector<Box>& boxes) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Box& b : boxes) arr.push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
  return arr.dump();
}

}  // namespace cxr
