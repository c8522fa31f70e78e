#include "cxr/image.hpp"

#include <algorithm>
#include <stdexcept>

namespace cxr {

ImageBuffer normalize_intensity(const ImageBuffer& img) {
  const float lo = img.minCoeff();
  const float hi = img.maxCoeff();
  if (hi == lo) return ImageBuffer::Zero(img.rows(), img.cols());
  return (img - lo) / (hi - lo);
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize_bilinear: target dimension must be >= 1");
  const int w = width(img), h = height(img);
  ImageBuffer out(out_h, out_w);
  const double sx = static_cast<double>(w) / out_w;
  const double sy = static_cast<double>(h) / out_h;
  for (int j = 0; j < out_h; ++j) {
    double fy = (j + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int i = 0; i < out_w; ++i) {
      double fx = (i + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * img(y0, x0) + wx * img(y0, x1);
      const double bot = (1.0 - wx) * img(y1, x0) + wx * img(y1, x1);
      out(j, i) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

ModelInput to_model_input(const ImageBuffer& img, const std::array<float, 3>& mean,
                          const std::array<float, 3>& stdev) {
  if (img.rows() != img.cols()) throw std::invalid_argument("to_model_input: image must be square");
  for (float s : stdev)
    if (s == 0.0f) throw std::invalid_argument("to_model_input: zero std component");
  ModelInput in;
  in.side = static_cast<int>(img.rows());
  in.mean = Eigen::Vector3f(mean[0], mean[1], mean[2]);
  in.stdev = Eigen::Vector3f(stdev[0], stdev[1], stdev[2]);
  const Eigen::Index plane = img.size();
  in.values.resize(3 * plane);
  Eigen::Map<const Eigen::ArrayXf> grey(img.data(), plane);
  for (int c = 0; c < 3; ++c) in.values.segment(c * plane, plane) = (grey - mean[c]) / stdev[c];
  return in;
}

}  // namespace cxr
