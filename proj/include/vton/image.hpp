#ifndef VTON_IMAGE_HPP
#define VTON_IMAGE_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "vton/tensor.hpp"

namespace vton {

// Images travel through the pipeline as float CHW tensors in [0,1].
// On disk: RGB images are binary PPM (P6), single-channel label/mask images
// are binary PGM (P5) where the pixel value is the label index.

namespace detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
  // PNM allows '#' comments between tokens.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw DataError("truncated PNM header in " + path);
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw DataError("malformed PNM header in " + path);
  return value;
}

}  // namespace detail

inline Tensor<float> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw DataError("not a binary PPM (P6): " + path);
  const int w = detail::pnm_next_int(in, path);
  const int h = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (maxval <= 0 || maxval > 255) throw DataError("unsupported PPM maxval in " + path);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw DataError("truncated PPM payload in " + path);
  Tensor<float> img({3, h, w});
  const float scale = 1.0f / static_cast<float>(maxval);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = scale * raw[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  return img;
}

inline void write_ppm(const std::string& path, const Tensor<float>& img) {
  if (img.ndim() != 3 || img.dim(0) != 3) throw ShapeError("write_ppm: expected [3,H,W], got " + img.shape_str());
  const int h = img.dim(1), w = img.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("failed writing image " + path);
}

inline Tensor<int> read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open label map " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw DataError("not a binary PGM (P5): " + path);
  const int w = detail::pnm_next_int(in, path);
  const int h = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (maxval <= 0 || maxval > 255) throw DataError("unsupported PGM maxval in " + path);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw DataError("truncated PGM payload in " + path);
  Tensor<int> map({h, w});
  for (std::size_t i = 0; i < raw.size(); ++i) map[i] = raw[i];
  return map;
}

inline void write_pgm(const std::string& path, const Tensor<int>& map) {
  if (map.ndim() != 2) throw ShapeError("write_pgm: expected [H,W], got " + map.shape_str());
  const int h = map.dim(0), w = map.dim(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write label map " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int v = map[i];
    if (v < 0 || v > 255) throw DataError("write_pgm: label " + std::to_string(v) + " out of byte range");
    raw[i] = static_cast<std::uint8_t>(v);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("failed writing label map " + path);
}

// Bilinear resize of a CHW float image with half-pixel centers.
inline Tensor<float> resize_bilinear(const Tensor<float>& img, int oh, int ow) {
  if (img.ndim() != 3) throw ShapeError("resize_bilinear: expected CHW");
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (oh == h && ow == w) return img;
  Tensor<float> out({c, oh, ow});
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = (1 - wx) * img.at(ch, y0, x0) + wx * img.at(ch, y0, x1);
        const double bot = (1 - wx) * img.at(ch, y1, x0) + wx * img.at(ch, y1, x1);
        out.at(ch, y, x) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

// Nearest-neighbor resize for integer label maps.
inline Tensor<int> resize_nearest(const Tensor<int>& map, int oh, int ow) {
  if (map.ndim() != 2) throw ShapeError("resize_nearest: expected HW");
  const int h = map.dim(0), w = map.dim(1);
  if (oh == h && ow == w) return map;
  Tensor<int> out({oh, ow});
  for (int y = 0; y < oh; ++y) {
    int sy = static_cast<int>((y + 0.5) * h / oh);
    sy = std::min(sy, h - 1);
    for (int x = 0; x < ow; ++x) {
      int sx = static_cast<int>((x + 0.5) * w / ow);
      sx = std::min(sx, w - 1);
      out.at(y, x) = map.at(sy, sx);
    }
  }
  return out;
}

// Tile a list of same-size CHW images into one sheet, row-major with `cols`
// images per row and a 2px separator, for qualitative inspection outputs.
inline Tensor<float> image_grid(const std::vector<Tensor<float>>& images, int cols) {
  if (images.empty()) throw DataError("image_grid: no images");
  const int c = images[0].dim(0), h = images[0].dim(1), w = images[0].dim(2);
  for (const auto& im : images)
    if (!im.same_shape(images[0])) throw ShapeError("image_grid: mixed image sizes");
  const int n = static_cast<int>(images.size());
  const int rows = (n + cols - 1) / cols;
  const int pad = 2;
  Tensor<float> sheet = Tensor<float>::full({c, rows * h + (rows - 1) * pad, cols * w + (cols - 1) * pad}, 1.0f);
  for (int i = 0; i < n; ++i) {
    const int r = i / cols, col = i % cols;
    const int y0 = r * (h + pad), x0 = col * (w + pad);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) sheet.at(ch, y0 + y, x0 + x) = images[i].at(ch, y, x);
  }
  return sheet;
}

// Render an integer label map to RGB using a color table (CHW in [0,1]).
inline Tensor<float> colorize_labels(const Tensor<int>& map, const std::vector<std::array<float, 3>>& table) {
  const int h = map.dim(0), w = map.dim(1);
  Tensor<float> out({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int v = map.at(y, x);
      const auto& rgb = table[static_cast<std::size_t>(v) % table.size()];
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
    }
  return out;
}

}  // namespace vton

#endif  // VTON_IMAGE_HPP
