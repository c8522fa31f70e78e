#pragma once

#include <utility>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/markers.hpp"

namespace cxr {

// Optional trace of the fast-marching state, mainly for tests: the arrival
// time raster after the march and the order in which masked pixels were
// filled. Arrival times are 0 exactly on the initial boundary (known pixels
// and the first ring of mask pixels) and non-decreasing along fill_order.
struct FmmTrace {
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arrival;
  std::vector<std::pair<int, int>> fill_order;  // (y, x)
};

// Telea fast-marching inpainting. Pixels where mask is set are refilled in
// arrival-time order; each is a normalised weighted sum of the already-known
// pixels within `radius`, the weight being the product of direction
// alignment with the arrival gradient, inverse square distance and inverse
// arrival-time difference. Gradient terms extrapolate each contributor
// toward the target pixel. Pixels outside the mask are returned bit-exact;
// filled values are clamped to [0,1].
ImageBuffer fmm_inpaint(const ImageBuffer& img, const BinaryMask& mask, double radius = 3.0,
                        FmmTrace* trace = nullptr);

struct MarkerRemoval {
  ImageBuffer image;
  MarkerMask markers;  // the mask actually inpainted (detection grown by 1 px)
};

// detect_markers followed by fmm_inpaint. The detected mask and its boxes
// are grown by one pixel (clamped to the frame) before inpainting to catch
// anti-aliased glyph fringes. A detection-free image comes back untouched
// with an empty mask.
MarkerRemoval remove_markers(const ImageBuffer& img, const MarkerParams& params = {},
                             double radius = 3.0);

}  // namespace cxr
