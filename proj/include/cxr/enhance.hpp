#pragma once

#include <vector>

#include "cxr/image.hpp"

namespace cxr {

// Intensity histogram over [0,1]. Values are clamped into range first and a
// value v lands in bin min(floor(v * bins), bins - 1), so 1.0 falls in the
// top bin rather than one past it.
std::vector<int> histogram(const ImageBuffer& img, int bins = 256);

// Contrast limited adaptive histogram equalisation. The image is cut into a
// tiles_x by tiles_y grid (remainder pixels join the last row/column of
// tiles), each tile's histogram is clipped at
// max(1, floor(clip_limit * tile_pixels / bins)) with the clipped mass
// redistributed uniformly (division remainder going one count each to the
// lowest bins, so total mass is conserved exactly), and every pixel is
// remapped by bilinear interpolation between the equalisation maps of the
// four nearest tile centres. Edge pixels beyond the outermost centres clamp
// to the nearest tile. A 1x1 grid with a huge clip limit reduces to plain
// global histogram equalisation.
ImageBuffer equalize_clahe(const ImageBuffer& img, int tiles_x, int tiles_y,
                           double clip_limit, int bins = 256);

}  // namespace cxr
