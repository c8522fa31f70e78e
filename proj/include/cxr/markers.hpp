#pragma once

#include <string>
#include <vector>

#include "cxr/image.hpp"

namespace cxr {

// Row-major 0/1 raster. Same indexing convention as ImageBuffer: mask(y, x).
using BinaryMask = Eigen::Array<unsigned char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Axis-aligned pixel box, top-left corner plus extent.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool operator==(const Box&) const = default;
};

struct MarkerParams {
  double blur_sigma = 1.0;
  bool highpass = false;  // work on the residual img - blur instead of the blur
  int bins = 256;
  long min_area = 50;          // component pixel count, lower bound
  double max_area_frac = 0.05;  // upper bound as a fraction of image area
  double aspect_min = 1.0;      // box w/h bounds, tuned for horizontal text
  double aspect_max = 15.0;
  int close_kernel_w = 9;
  int close_kernel_h = 3;
  int connectivity = 8;
};

struct MarkerMask {
  BinaryMask mask;         // every set bit lies inside one of the boxes
  std::vector<Box> boxes;  // all boxes fit inside the source image
};

enum class MorphOp { dilate, erode, open, close };

struct Component {
  Box box;          // tight bounds
  long pixels = 0;  // exact component size
};

struct ComponentLabels {
  // 0 is background; components are labelled 1..K in row-major discovery order.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels;
  std::vector<Component> components;  // components[i] has label i+1
};

// Separable convolution with a normalised sampled Gaussian, kernel radius
// ceil(3 sigma), replicate padding at the edges.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

// Threshold index maximising the between-class variance w0*w1*(mu0-mu1)^2.
// Ties break toward the lowest index; a histogram with all its mass in one
// bin returns that bin's index.
int otsu_threshold(const std::vector<int>& hist);

// Bit set where the pixel's histogram bin is strictly above level.
BinaryMask binarize(const ImageBuffer& img, int level, int bins = 256);

// Rectangular structuring element, kw x kh, both odd. Out-of-bounds pixels
// count as background for dilation and for erosion (border components
// shrink). Opening and closing run on a padded canvas so closing stays
// idempotent and extensive right up to the image border.
BinaryMask morph(const BinaryMask& mask, MorphOp op, int kw, int kh);

ComponentLabels connected_components(const BinaryMask& mask, int connectivity = 8);

// Burned-in text detection: blur -> (optional high-pass residual) ->
// histogram -> otsu -> binarize -> close -> components -> keep components
// whose pixel count and box aspect pass the filters. The mask is the closed
// binary image restricted to the kept boxes.
MarkerMask detect_markers(const ImageBuffer& img, const MarkerParams& params = {});

// [{"x":..,"y":..,"w":..,"h":..}, ...]
std::string boxes_to_json(const std::vector<Box>& boxes);

}  // namespace cxr
