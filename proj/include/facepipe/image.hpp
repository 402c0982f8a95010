#pragma once

#include <filesystem>
#include <vector>

namespace facepipe {

// Row-major H×W×3 image, values nominally in [0, 1].
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<double> pix;  // size height*width*3, rgb interleaved

  ImageRGB() = default;
  ImageRGB(int w, int h) : width(w), height(h), pix(static_cast<size_t>(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) { return pix[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return pix[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

// Row-major H×W single-channel image.
struct ImageGray {
  int width = 0;
  int height = 0;
  std::vector<double> pix;  // size height*width

  ImageGray() = default;
  ImageGray(int w, int h, double fill = 0.0)
      : width(w), height(h), pix(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return pix[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return pix[static_cast<size_t>(y) * width + x]; }
};

// Binary PPM (P6, maxval 255). Samples are round(255*v), half away from
// zero, with v clamped to [0,1] first. Header is "P6\n<w> <h>\n255\n".
void write_ppm(const ImageRGB& img, const std::filesystem::path& path);
ImageRGB read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 65535, most significant byte first). Samples are
// round(65535*v). Header is "P5\n<w> <h>\n65535\n".
void write_pgm16(const ImageGray& img, const std::filesystem::path& path);
ImageGray read_pgm16(const std::filesystem::path& path);

}  // namespace facepipe
