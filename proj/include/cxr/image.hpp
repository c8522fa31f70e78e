#pragma once

#include <Eigen/Core>

#include <array>

namespace cxr {

// Single-channel raster with intensities in [0, 1]. Row-major so that the
// flat coefficient order matches the on-disk pixel order; indexed as
// img(y, x).
using ImageBuffer = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline int width(const ImageBuffer& img) { return static_cast<int>(img.cols()); }
inline int height(const ImageBuffer& img) { return static_cast<int>(img.rows()); }

// Channel statistics used to standardize inputs for the classifier
// (ImageNet convention).
inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

// Standardized side x side x 3 tensor fed to the classifier. The grey plane
// is replicated to three channels before per-channel standardization;
// values are stored channel-major (plane 0, plane 1, plane 2), each plane
// row-major.
struct ModelInput {
  int side = 0;
  Eigen::Vector3f mean;
  Eigen::Vector3f stdev;
  Eigen::VectorXf values;  // 3 * side * side
};

// Min-max rescale to [0, 1]; a constant image maps to all zeros.
ImageBuffer normalize_intensity(const ImageBuffer& img);

// Pixel-center-aligned bilinear resampling: output (i, j) reads the source
// at ((i+0.5)*W/out_w - 0.5, (j+0.5)*H/out_h - 0.5), clamped to bounds.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h);

ModelInput to_model_input(const ImageBuffer& img,
                          const std::array<float, 3>& mean = kImageNetMean,
                          const std::array<float, 3>& stdev = kImageNetStd);

}  // namespace cxr
