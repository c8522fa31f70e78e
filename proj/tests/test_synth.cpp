#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "cxr/inpaint.hpp"
#include "cxr/synth.hpp"

using namespace cxr;

namespace {

// width of the column range containing anything brighter than background
int bright_width(const ImageBuffer& img, float thresh = 0.12f) {
  int lo = static_cast<int>(img.cols()), hi = -1;
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x)
      if (img(y, x) > thresh) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
  return hi < lo ? 0 : hi - lo + 1;
}

Box diff_bbox(const ImageBuffer& a, const ImageBuffer& b) {
  int x0 = static_cast<int>(a.cols()), y0 = static_cast<int>(a.rows()), x1 = -1, y1 = -1;
  for (int y = 0; y < a.rows(); ++y)
    for (int x = 0; x < a.cols(); ++x)
      if (a(y, x) != b(y, x)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double iou(const Box& a, const Box& b) {
  const int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w), y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0, x1 - x0) * std::max(0, y1 - y0);
  return inter / (static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter);
}

}  // namespace

TEST_CASE("generation is deterministic given identical parameters") {
  SynthSpec spec;
  spec.side = 64;
  spec.severity = Severity::moderate;
  spec.seed = 31;
  SynthImage a = generate_image(spec);
  SynthImage b = generate_image(spec);
  CHECK((a.image == b.image).all());
  CHECK(a.label == kCovidLabel);
  CHECK((a.image >= 0.0f).all());
  CHECK((a.image <= 1.0f).all());

  spec.seed = 32;
  SynthImage c = generate_image(spec);
  CHECK_FALSE((a.image == c.image).all());
}

TEST_CASE("paediatric frames hold a narrower thorax than adult ones") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.side = 96;
    spec.seed = seed;
    spec.population = Population::adult;
    const int adult = bright_width(generate_image(spec).image);
    spec.population = Population::paediatric;
    const int paed = bright_width(generate_image(spec).image);
    CHECK(paed < adult);
  }
}

TEST_CASE("higher severity adds strictly more lung opacity") {
  SynthSpec spec;
  spec.side = 96;
  spec.seed = 5;
  spec.severity = Severity::none;
  ImageBuffer plain = generate_image(spec).image;
  spec.severity = Severity::mild;
  ImageBuffer mild = generate_image(spec).image;
  spec.severity = Severity::moderate;
  ImageBuffer moderate = generate_image(spec).image;
  spec.severity = Severity::severe;
  ImageBuffer severe = generate_image(spec).image;

  const double added_mild = static_cast<double>((mild - plain).sum());
  const double added_moderate = static_cast<double>((moderate - plain).sum());
  const double added_severe = static_cast<double>((severe - plain).sum());
  CHECK(added_mild > 0.0);
  CHECK(added_moderate > added_mild);
  CHECK(added_severe > added_moderate);
}

TEST_CASE("a pcr-positive image without findings is the normal image") {
  SynthSpec spec;
  spec.side = 64;
  spec.seed = 12;
  spec.severity = Severity::none;
  SynthImage plain = generate_image(spec);
  spec.severity = Severity::normal_pcr_plus;
  SynthImage pcr = generate_image(spec);
  CHECK((plain.image == pcr.image).all());
  CHECK(plain.label == kNormalLabel);
  CHECK(pcr.label == kCovidLabel);
}

TEST_CASE("the marker block lights exactly its ground-truth box") {
  SynthSpec spec;
  spec.side = 128;
  spec.seed = 9;
  ImageBuffer clean = generate_image(spec).image;
  spec.marker = Box{8, 8, 32, 10};
  SynthImage marked = generate_image(spec);
  REQUIRE(marked.marker.has_value());
  CHECK(*marked.marker == *spec.marker);

  const Box bounds = diff_bbox(marked.image, clean);
  CHECK(bounds == *spec.marker);
  // the block never edits outside its rectangle
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      if (!spec.marker->contains(x, y)) CHECK(marked.image(y, x) == clean(y, x));
  CHECK(marked.image(8, 8) == 0.95f);
}

TEST_CASE("severity blob table is fixed") {
  CHECK(severity_blobs(Severity::none).count == 0);
  CHECK(severity_blobs(Severity::normal_pcr_plus).count == 0);
  CHECK(severity_blobs(Severity::mild).count == 2);
  CHECK(severity_blobs(Severity::mild).peak == 0.08);
  CHECK(severity_blobs(Severity::moderate).count == 4);
  CHECK(severity_blobs(Severity::moderate).peak == 0.15);
  CHECK(severity_blobs(Severity::severe).count == 7);
  CHECK(severity_blobs(Severity::severe).peak == 0.25);
}

TEST_CASE("generation rejects bad specs") {
  SynthSpec spec;
  spec.side = 32;
  CHECK_THROWS_AS(generate_image(spec), std::invalid_argument);

  spec.side = 128;
  spec.marker = Box{100, 8, 64, 10};  // runs off the right edge
  CHECK_THROWS_AS(generate_image(spec), std::invalid_argument);
  spec.marker = Box{8, 8, 2, 2};
  CHECK_THROWS_AS(generate_image(spec), std::invalid_argument);

  spec.marker.reset();
  spec.contrast_jitter = 1.5;
  CHECK_THROWS_AS(generate_image(spec), std::invalid_argument);

  ImageBuffer img = ImageBuffer::Zero(32, 32);
  CHECK_THROWS_AS(render_text_block(img, Box{20, 20, 20, 5}), std::invalid_argument);
}

TEST_CASE("confounded datasets tie the label to the population") {
  SynthTask task;
  task.side = 64;
  SynthDataset conf = generate_dataset(5, SynthMode::confounded, task, 3);
  REQUIRE(conf.manifest.records.size() == 10);
  REQUIRE(conf.images.size() == 10);
  for (int i = 0; i < 5; ++i) {
    CHECK(conf.manifest.records[i].label == kNormalLabel);
    CHECK(conf.manifest.records[i].population == Population::paediatric);
    CHECK(conf.manifest.records[i].severity == Severity::none);
  }
  for (int i = 5; i < 10; ++i) {
    CHECK(conf.manifest.records[i].label == kCovidLabel);
    CHECK(conf.manifest.records[i].population == Population::adult);
    const Severity s = conf.manifest.records[i].severity;
    CHECK((s == Severity::mild || s == Severity::moderate || s == Severity::severe));
  }

  SynthDataset deconf = generate_dataset(5, SynthMode::deconfounded, task, 3);
  for (const auto& rec : deconf.manifest.records) CHECK(rec.population == Population::adult);
  // covid images are shared between the modes; only the normal arm moved
  CHECK((conf.images[7] == deconf.images[7]).all());

  // patient ids are unique so split units are single records
  auto ids = conf.manifest.records;
  std::sort(ids.begin(), ids.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.patient_id < b.patient_id; });
  CHECK(std::adjacent_find(ids.begin(), ids.end(), [](const SampleRecord& a, const SampleRecord& b) {
          return a.patient_id == b.patient_id;
        }) == ids.end());

  CHECK_THROWS_AS(generate_dataset(3, SynthMode::confounded, task, 1), std::invalid_argument);
}

TEST_CASE("severity tasks fix the covid arm's grade") {
  SynthTask task;
  task.side = 64;
  task.covid_severity = Severity::normal_pcr_plus;
  SynthDataset d = generate_dataset(4, SynthMode::deconfounded, task, 8);
  for (int i = 4; i < 8; ++i) {
    CHECK(d.manifest.records[i].severity == Severity::normal_pcr_plus);
    CHECK(d.manifest.records[i].label == kCovidLabel);
  }

  // rerun is byte-identical, manifest and pixels
  SynthDataset e = generate_dataset(4, SynthMode::deconfounded, task, 8);
  for (size_t i = 0; i < d.images.size(); ++i) {
    CHECK((d.images[i] == e.images[i]).all());
    CHECK(d.manifest.records[i].path == e.manifest.records[i].path);
  }
}

TEST_CASE("synth markers are found and cleaned by the removal pipeline") {
  SynthSpec spec;
  spec.side = 128;
  spec.seed = 41;
  spec.severity = Severity::mild;
  ImageBuffer clean = generate_image(spec).image;
  spec.marker = Box{8, 8, 32, 10};
  ImageBuffer marked = generate_image(spec).image;

  MarkerRemoval removed = remove_markers(marked);
  REQUIRE_FALSE(removed.markers.boxes.empty());
  double best = 0.0;
  for (const auto& box : removed.markers.boxes) best = std::max(best, iou(box, *spec.marker));
  CHECK(best >= 0.5);

  // inpainting should sit close to the never-marked plate inside the block
  double err = 0.0;
  long n = 0;
  for (int y = 8; y < 18; ++y)
    for (int x = 8; x < 40; ++x, ++n)
      err += std::abs(static_cast<double>(removed.image(y, x)) - clean(y, x));
  CHECK(err / static_cast<double>(n) <= 0.1);
}
