#include "cxr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace cxr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageBuffer load_png(std::FILE* f, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: failed to create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng: failed to create info struct");
  }

  // Declared ahead of setjmp so a longjmp does not skip their construction.
  ImageBuffer out;
  std::vector<png_byte> row;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw TruncatedDataError(path, "png decode failed");
  }

  png_init_io(png, f);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const double scale = depth == 16 ? 65535.0 : 255.0;

  out.resize(h, w);
  row.resize(png_get_rowbytes(png, info));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) {
        if (depth == 16) {
          // PNG stores 16-bit samples big-endian.
          const size_t i = (static_cast<size_t>(x) * channels + c) * 2;
          sum += (row[i] << 8) | row[i + 1];
        } else {
          sum += row[static_cast<size_t>(x) * channels + c];
        }
      }
      out(y, x) = static_cast<float>(sum / (channels * scale));
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

// Reads the next integer token from a PGM header, skipping whitespace and
// '#' comment lines.
long pgm_token(std::FILE* f, const std::string& path) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (std::isspace(c)) {
      c = std::fgetc(f);
    } else {
      break;
    }
  }
  if (c == EOF) throw TruncatedDataError(path, "pgm header ended early");
  if (!std::isdigit(c)) throw TruncatedDataError(path, "malformed pgm header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return v;
}

ImageBuffer load_pgm(std::FILE* f, const std::string& path) {
  if (std::fgetc(f) != 'P' || std::fgetc(f) != '5')
    throw TruncatedDataError(path, "bad pgm magic");
  const long w = pgm_token(f, path);
  const long h = pgm_token(f, path);
  const long maxval = pgm_token(f, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw TruncatedDataError(path, "bad pgm dimensions");
  // pgm_token consumed the single whitespace byte after maxval already.
  const int bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> data(static_cast<size_t>(w) * h * bpp);
  if (std::fread(data.data(), 1, data.size(), f) != data.size())
    throw TruncatedDataError(path, "pgm pixel data ended early");
  ImageBuffer out(h, w);
  size_t i = 0;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      long v;
      if (bpp == 2) {
        v = (data[i] << 8) | data[i + 1];  // big-endian per the format
        i += 2;
      } else {
        v = data[i++];
      }
      out(y, x) = static_cast<float>(static_cast<double>(v) / maxval);
    }
  return out;
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FileMissingError(path);
  unsigned char magic[2];
  if (std::fread(magic, 1, 2, f.get()) != 2) throw TruncatedDataError(path, "file shorter than 2 bytes");
  std::rewind(f.get());
  if (magic[0] == 0x89 && magic[1] == 'P') return load_png(f.get(), path);
  if (magic[0] == 'P' && magic[1] == '5') return load_pgm(f.get(), path);
  if (magic[0] == 'P' && magic[1] == '2')
    throw UnsupportedFormatError(path, "ascii pgm, only binary P5 is supported");
  throw UnsupportedFormatError(path, "unrecognised magic bytes");
}

void save_png(const std::string& path, const ImageBuffer& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("save_png: bit depth must be 8 or 16");
  if (img.size() == 0) throw std::invalid_argument("save_png: empty image");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(path, "cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: failed to create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng: failed to create info struct");
  }

  std::vector<png_byte> row;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path, "png encode failed");
  }

  const int w = width(img), h = height(img);
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const long maxval = bit_depth == 16 ? 65535 : 255;
  row.resize(static_cast<size_t>(w) * (bit_depth / 8));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = std::min(1.0f, std::max(0.0f, img(y, x)));
      const long q = std::lround(static_cast<double>(v) * maxval);
      if (bit_depth == 16) {
        row[static_cast<size_t>(x) * 2] = static_cast<png_byte>(q >> 8);
        row[static_cast<size_t>(x) * 2 + 1] = static_cast<png_byte>(q & 0xff);
      } else {
        row[x] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace cxr
