#include "facepipe/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace facepipe {

namespace {

std::uint16_t quantize(double v, int maxval) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(v * maxval));
}

// Reads one whitespace-delimited token, skipping PNM '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error("pnm: truncated header");
  return tok;
}

int parse_int(std::istream& in, const char* what) {
  std::string tok = next_token(in);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("pnm: bad ") + what + " field '" + tok + "'");
  }
}

}  // namespace

void write_ppm(const ImageRGB& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<unsigned char>(quantize(img.at(x, y, c), 255));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string magic = next_token(in);
  if (magic != "P6") throw std::runtime_error("ppm: bad magic '" + magic + "'");
  int w = parse_int(in, "width");
  int h = parse_int(in, "height");
  int maxval = parse_int(in, "maxval");
  if (w <= 0 || h <= 0) throw std::runtime_error("ppm: bad dimensions");
  if (maxval != 255) throw std::runtime_error("ppm: unsupported maxval " + std::to_string(maxval));
  // single whitespace after maxval already consumed by tokenizer
  ImageRGB img(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (in.gcount() != static_cast<std::streamsize>(row.size()))
      throw std::runtime_error("ppm: truncated payload in " + path.string());
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
  }
  return img;
}

void write_pgm16(const ImageGray& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::uint16_t q = quantize(img.at(x, y), 65535);
      row[static_cast<size_t>(x) * 2] = static_cast<unsigned char>(q >> 8);
      row[static_cast<size_t>(x) * 2 + 1] = static_cast<unsigned char>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ImageGray read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string magic = next_token(in);
  if (magic != "P5") throw std::runtime_error("pgm: bad magic '" + magic + "'");
  int w = parse_int(in, "width");
  int h = parse_int(in, "height");
  int maxval = parse_int(in, "maxval");
  if (w <= 0 || h <= 0) throw std::runtime_error("pgm: bad dimensions");
  ImageGray img(w, h);
  if (maxval == 65535) {
    std::vector<unsigned char> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (in.gcount() != static_cast<std::streamsize>(row.size()))
        throw std::runtime_error("pgm: truncated payload in " + path.string());
      for (int x = 0; x < w; ++x) {
        std::uint16_t q = static_cast<std::uint16_t>((row[static_cast<size_t>(x) * 2] << 8) |
                                                     row[static_cast<size_t>(x) * 2 + 1]);
        img.at(x, y) = q / 65535.0;
      }
    }
  } else if (maxval == 255) {  // accepted on read for external skin masks
    std::vector<unsigned char> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (in.gcount() != static_cast<std::streamsize>(row.size()))
        throw std::runtime_error("pgm: truncated payload in " + path.string());
      for (int x = 0; x < w; ++x) img.at(x, y) = row[x] / 255.0;
    }
  } else {
    throw std::runtime_error("pgm: unsupported maxval " + std::to_string(maxval));
  }
  return img;
}

}  // namespace facepipe
