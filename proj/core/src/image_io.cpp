#include "pslab/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pslab {

std::uint8_t quantize_byte(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
}

namespace {

void write_pnm(const std::string& path, const char* magic, int channels, const Tensor& t) {
  const int h = t.dim(t.rank() - 2);
  const int w = t.dim(t.rank() - 1);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f << magic << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        row[static_cast<size_t>(x) * channels + c] =
            quantize_byte(t[(static_cast<std::int64_t>(c) * h + y) * w + x]);
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("failed to write " + path);
}

int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments.
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = in.get();
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("malformed PNM header");
  return value;
}

Tensor read_pnm(const std::string& path, const char* magic, int channels) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for read: " + path);
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  if (m0 != magic[0] || m1 != magic[1]) throw IoError("bad PNM magic in " + path);
  const int w = read_pnm_token(f);
  const int h = read_pnm_token(f);
  const int maxval = read_pnm_token(f);
  if (maxval != 255) throw IoError("unsupported PNM maxval in " + path);
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("truncated PNM data in " + path);
  Tensor t(channels == 3 ? Shape{3, h, w} : Shape{h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        t[(static_cast<std::int64_t>(c) * h + y) * w + x] =
            raw[(static_cast<size_t>(y) * w + x) * channels + c] / 255.0;
  return t;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  PSLAB_CHECK_SHAPE(image.rank() == 3 && image.dim(0) == 3,
                    "write_ppm expects [3,H,W], got " << shape_str(image.shape()));
  write_pnm(path, "P6", 3, image);
}

Tensor read_ppm(const std::string& path) { return read_pnm(path, "P6", 3); }

void write_pgm(const std::string& path, const Tensor& map) {
  PSLAB_CHECK_SHAPE(map.rank() == 2, "write_pgm expects [H,W], got " << shape_str(map.shape()));
  write_pnm(path, "P5", 1, map);
}

Tensor read_pgm(const std::string& path) { return read_pnm(path, "P5", 1); }

void write_mask_pgm(const std::string& path, const MaskLabel& mask) {
  Tensor t({mask.height, mask.width});
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = mask.values[static_cast<size_t>(i)] ? 1.0 : 0.0;
  write_pgm(path, t);
}

}  // namespace pslab
