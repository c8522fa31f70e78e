#include "cxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cxr/rng.hpp"

namespace cxr {

namespace {

// free calibration constants (tissue levels, jitters, blob spread); the
// population geometry and the per-severity blob table are contract values
constexpr double kBackground = 0.05;
constexpr double kThoraxLevel = 0.45;
constexpr double kLungLevel = 0.22;
constexpr double kRibLevel = 0.18;
constexpr double kBlobSigmaFrac = 0.055;  // of the side length

struct Anatomy {
  double cx, cy;          // thorax centre
  double a, b;            // thorax semi-axes
  double lung_dx;         // lateral lung offset from centre
  double la, lb;          // lung semi-axes
  double thorax_amp, lung_amp, rib_amp;
  double rib_theta;       // inclination, radians
  double rib_arch;        // quadratic arch strength
  double rib_period;
  double rib_phase[2];    // per lung
};

double chest_width_fraction(Population p) { return p == Population::adult ? 0.80 : 0.55; }

// one jitter stream, fixed draw order: centre x, centre y, height, thorax
// level, lung level, rib level, rib period, left phase, right phase
Anatomy draw_anatomy(const SynthSpec& spec, Rng& g) {
  const double s = spec.side;
  Anatomy an;
  an.cx = (0.5 + g.uniform(-0.015, 0.015)) * s;
  an.cy = (0.54 + g.uniform(-0.015, 0.015)) * s;
  an.a = 0.5 * chest_width_fraction(spec.population) * s;
  const double base_b = spec.population == Population::adult ? 0.38 : 0.30;
  an.b = base_b * s * (1.0 + g.uniform(-0.05, 0.05));
  an.lung_dx = 0.48 * an.a;
  an.la = 0.34 * an.a;
  an.lb = 0.72 * an.b;
  an.thorax_amp = kThoraxLevel * (1.0 + g.uniform(-0.06, 0.06));
  an.lung_amp = kLungLevel * (1.0 + g.uniform(-0.09, 0.09));
  an.rib_amp = kRibLevel * (1.0 + g.uniform(-0.08, 0.08));
  const bool adult = spec.population == Population::adult;
  an.rib_theta = (adult ? 20.0 : 5.0) * 3.14159265358979323846 / 180.0;
  an.rib_arch = adult ? 0.06 * s : 0.006 * s;
  an.rib_period = 0.085 * s * (1.0 + g.uniform(-0.1, 0.1));
  an.rib_phase[0] = g.uniform(0.0, an.rib_period);
  an.rib_phase[1] = g.uniform(0.0, an.rib_period);
  return an;
}

void render_plate(ImageBuffer& img, const Anatomy& an) {
  const int s = static_cast<int>(img.rows());
  const double lcy = an.cy - 0.02 * s;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      double val = kBackground;
      const double tx = (x - an.cx) / an.a, ty = (y - an.cy) / an.b;
      const double tq = tx * tx + ty * ty;
      if (tq < 1.0) {
        const double rim = std::min(1.0, (1.0 - tq) / 0.08);
        val += (an.thorax_amp - kBackground) * rim;
        for (int side = 0; side < 2; ++side) {
          const double lcx = an.cx + (side == 0 ? -an.lung_dx : an.lung_dx);
          const double lx = (x - lcx) / an.la, ly = (y - lcy) / an.lb;
          const double lq = lx * lx + ly * ly;
          if (lq >= 1.0) continue;
          const double wl = std::min(1.0, (1.0 - lq) / 0.10);
          val += (an.lung_amp - an.thorax_amp) * wl;
          // rib band coordinate: slope away from the spine, plus the arch
          const double sgn = side == 0 ? -1.0 : 1.0;
          const double u = (y - lcy) * std::cos(an.rib_theta) -
                           sgn * (x - an.cx) * std::sin(an.rib_theta) +
                           an.rib_arch * lx * lx;
          const double phase = std::fmod(std::fmod(u - an.rib_phase[side], an.rib_period) +
                                             an.rib_period,
                                         an.rib_period);
          if (phase < 0.42 * an.rib_period) val += an.rib_amp * wl;
        }
      }
      img(y, x) = static_cast<float>(val);
    }
}

// draw order per blob: lung pick, angle, radius
void render_blobs(ImageBuffer& img, const Anatomy& an, const BlobParams& blobs, Rng& b) {
  const int s = static_cast<int>(img.rows());
  const double lcy = an.cy - 0.02 * s;
  const double sigma = kBlobSigmaFrac * s;
  for (int i = 0; i < blobs.count; ++i) {
    const int side = static_cast<int>(b.below(2));
    const double angle = b.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double radius = std::sqrt(b.next_double());
    const double lcx = an.cx + (side == 0 ? -an.lung_dx : an.lung_dx);
    const double bx = lcx + radius * std::cos(angle) * an.la * 0.8;
    const double by = lcy + radius * std::sin(angle) * an.lb * 0.8;

    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    const int x0 = std::max(0, static_cast<int>(bx) - reach);
    const int x1 = std::min(s - 1, static_cast<int>(bx) + reach);
    const int y0 = std::max(0, static_cast<int>(by) - reach);
    const int y1 = std::min(s - 1, static_cast<int>(by) + reach);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        img(y, x) += static_cast<float>(blobs.peak * std::exp(-d2 / (2.0 * sigma * sigma)));
      }
  }
}

}  // namespace

BlobParams severity_blobs(Severity s) {
  switch (s) {
    case Severity::mild:
      return {2, 0.08};
    case Severity::moderate:
      return {4, 0.15};
    case Severity::severe:
      return {7, 0.25};
    default:
      return {0, 0.0};  // none and normal_pcr_plus show nothing
  }
}

void render_text_block(ImageBuffer& img, const Box& box, float value) {
  if (box.w < 3 || box.h < 3) throw std::invalid_argument("render_text_block: box too small");
  if (box.x < 0 || box.y < 0 || box.x + box.w > static_cast<int>(img.cols()) ||
      box.y + box.h > static_cast<int>(img.rows()))
    throw std::invalid_argument("render_text_block: box outside the image");

  const int stroke = std::max(1, box.h / 5);
  const auto bar = [&](int x0, int frac_height) {
    const int h = box.h * frac_height / 100;
    for (int y = box.y; y < box.y + h; ++y)
      for (int x = x0; x < std::min(x0 + stroke, box.x + box.w); ++x) img(y, x) = value;
  };
  int i = 0;
  for (int x0 = box.x; x0 < box.x + box.w; x0 += 2 * stroke, ++i)
    bar(x0, i % 2 == 0 ? 100 : 60);
  bar(box.x + box.w - stroke, 100);  // make the right edge part of the block
}

SynthImage generate_image(const SynthSpec& spec) {
  if (spec.side < 64) throw std::invalid_argument("generate_image: side must be >= 64");
  if (spec.contrast_jitter < 0 || spec.contrast_jitter >= 1)
    throw std::invalid_argument("generate_image: contrast_jitter must be in [0, 1)");
  if (spec.marker) {
    const Box& m = *spec.marker;
    if (m.x < 0 || m.y < 0 || m.w < 3 || m.h < 3 || m.x + m.w > spec.side ||
        m.y + m.h > spec.side)
      throw std::invalid_argument("generate_image: side too small to place requested marker");
  }

  Rng geometry(mix_seed(spec.seed, 0));
  Rng blobs(mix_seed(spec.seed, 1));
  Rng exposure(mix_seed(spec.seed, 2));

  SynthImage out;
  out.image.resize(spec.side, spec.side);
  const Anatomy an = draw_anatomy(spec, geometry);
  render_plate(out.image, an);
  render_blobs(out.image, an, severity_blobs(spec.severity), blobs);

  const float scale =
      static_cast<float>(1.0 + spec.contrast_jitter * exposure.uniform(-1.0, 1.0));
  out.image *= scale;
  out.image = out.image.cwiseMax(0.0f).cwiseMin(1.0f);

  if (spec.marker) {
    render_text_block(out.image, *spec.marker);
    out.marker = *spec.marker;
  }
  out.label = spec.severity == Severity::none ? kNormalLabel : kCovidLabel;
  return out;
}

SynthDataset generate_dataset(int n_per_class, SynthMode mode, const SynthTask& task,
                              std::uint64_t seed) {
  if (n_per_class < 4) throw std::invalid_argument("generate_dataset: need at least 4 per class");

  SynthDataset out;
  out.manifest.records.reserve(2 * n_per_class);
  out.images.reserve(2 * n_per_class);

  const Severity severity_pool[3] = {Severity::mild, Severity::moderate, Severity::severe};
  for (int arm = 0; arm < 2; ++arm) {
    for (int i = 0; i < n_per_class; ++i) {
      SynthSpec spec;
      spec.side = task.side;
      spec.contrast_jitter = task.contrast_jitter;
      spec.seed = mix_seed(seed, static_cast<std::uint64_t>(arm), static_cast<std::uint64_t>(i));
      if (arm == 0) {
        spec.severity = Severity::none;
        spec.population =
            mode == SynthMode::confounded ? Population::paediatric : Population::adult;
      } else {
        spec.severity = task.covid_severity == Severity::none
                            ? severity_pool[Rng(mix_seed(seed, 7, static_cast<std::uint64_t>(i)))
                                                .below(3)]
                            : task.covid_severity;
        spec.population = Population::adult;
      }
      if (task.markers)
        spec.marker = Box{task.side / 16, task.side / 16, task.side / 4, task.side / 12};

      SynthImage img = generate_image(spec);
      SampleRecord rec;
      rec.label = img.label;
      rec.path = "synth/" + rec.label + "_" + std::to_string(arm) + "_" + std::to_string(i) + ".png";
      rec.source = "synth";
      rec.severity = spec.severity;
      rec.population = spec.population;
      rec.patient_id = rec.label + "-" + std::to_string(arm) + "-" + std::to_string(i);
      out.manifest.records.push_back(std::move(rec));
      out.images.push_back(std::move(img.image));
    }
  }
  return out;
}

}  // namespace cxr
