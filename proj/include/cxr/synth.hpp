#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxr/dataset.hpp"
#include "cxr/image.hpp"
#include "cxr/markers.hpp"

namespace cxr {

// Deterministic chest-like test image: an elliptical thorax whose width
// tracks the population (adult spans 0.80 of the frame, paediatric 0.55),
// two darker lung fields, rib bands at the population's inclination (adult
// 20 degrees and arched, paediatric 5 degrees and nearly flat), optional
// severity opacities, and an optional burned-in annotation block.
struct SynthSpec {
  int side = 128;  // >= 64
  Population population = Population::adult;
  Severity severity = Severity::none;
  std::optional<Box> marker;      // bright text block, rendered last
  double contrast_jitter = 0.07;  // whole-image exposure scale range
  std::uint64_t seed = 0;
};

struct SynthImage {
  ImageBuffer image;
  std::string label;          // covid for any PCR-positive severity, else normal
  std::optional<Box> marker;  // exact bounds of the lit block pixels
};

// Opacity blob count and peak amplitude per severity. A PCR-positive image
// without radiographic findings renders no blobs at all, so it is
// pixel-identical to a plain normal under the same seed.
struct BlobParams {
  int count = 0;
  double peak = 0.0;
};
BlobParams severity_blobs(Severity s);

SynthImage generate_image(const SynthSpec& spec);

// Bar-glyph annotation block: bright vertical strokes arranged so the lit
// pixels bound exactly to `box` (full-height strokes hug both box edges).
void render_text_block(ImageBuffer& img, const Box& box, float value = 0.95f);

// confounded correlates the class label with anatomy (normal arm paediatric,
// covid arm adult); deconfounded draws both arms from the adult population.
enum class SynthMode { confounded, deconfounded };

struct SynthTask {
  // none draws each covid record's severity from {mild, moderate, severe};
  // any other value fixes it (normal_pcr_plus gives the no-signal task)
  Severity covid_severity = Severity::none;
  int side = 128;
  double contrast_jitter = 0.07;
  bool markers = false;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<ImageBuffer> images;  // aligned with manifest.records
};

// n_per_class records per arm, normal arm first. Deterministic in
// (n, mode, task, seed); record i of arm a depends only on (seed, a, i).
SynthDataset generate_dataset(int n_per_class, SynthMode mode, const SynthTask& task,
                              std::uint64_t seed);

}  // namespace cxr
