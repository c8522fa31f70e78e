#pragma once

#include <stdexcept>
#include <string>

#include "cxr/image.hpp"

namespace cxr {

// I/O failures carry the offending path so callers can report it without
// threading it through by hand.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class FileMissingError : public IoError {
 public:
  explicit FileMissingError(const std::string& path) : IoError(path, "file not found") {}
};

class UnsupportedFormatError : public IoError {
 public:
  UnsupportedFormatError(const std::string& path, const std::string& detail)
      : IoError(path, "unsupported format (" + detail + ")") {}
};

class TruncatedDataError : public IoError {
 public:
  TruncatedDataError(const std::string& path, const std::string& detail)
      : IoError(path, "truncated or corrupt data (" + detail + ")") {}
};

// Loads a greyscale image as floats in [0,1]. Dispatches on magic bytes:
// PNG (8/16 bit, grey or colour; colour channels are averaged) and binary
// PGM (P5). Anything else raises UnsupportedFormatError.
ImageBuffer load_image(const std::string& path);

// Writes a greyscale PNG. bit_depth must be 8 or 16; values are clamped to
// [0,1] and quantised by rounding. Output bytes are deterministic for a
// given buffer.
void save_png(const std::string& path, const ImageBuffer& img, int bit_depth = 16);

}  // namespace cxr
