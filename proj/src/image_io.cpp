#include "lanepe/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lanepe/errors.hpp"

namespace lanepe {

void write_pgm(const std::string& path, int w, int h,
               const std::vector<std::uint8_t>& pixels) {
  if (w <= 0 || h <= 0 ||
      pixels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
    throw std::invalid_argument("write_pgm: pixel count does not match " +
                                std::to_string(w) + "x" + std::to_string(h));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("image write failed: " + path);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int* w, int* h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("not a binary PGM: " + path);
  int width = 0, height = 0, maxval = 0;
  // skip whitespace and '#' comments between header fields
  const auto next_int = [&](int& v) {
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    in >> v;
  };
  next_int(width);
  next_int(height);
  next_int(maxval);
  if (!in || width <= 0 || height <= 0 || maxval != 255)
    throw DataError("bad PGM header in " + path);
  in.get();  // the single whitespace after maxval
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(pixels.data()),
          static_cast<std::streamsize>(pixels.size()));
  if (!in) throw DataError("truncated PGM data in " + path);
  if (w) *w = width;
  if (h) *h = height;
  return pixels;
}

std::uint8_t quantize_unit(double v) {
  const double scaled = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

}  // namespace lanepe
