#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include <Eigen/Core>
#include <json.hpp>

#include "aaams/dataset.hpp"
#include "aaams/postprocess.hpp"

namespace aaams {

struct Image {
  int width = 0, height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;  // row-major RGB

  const std::array<std::uint8_t, 3>& at(int r, int c) const {
    return pixels[static_cast<size_t>(r) * width + c];
  }
  std::array<std::uint8_t, 3>& at(int r, int c) {
    return pixels[static_cast<size_t>(r) * width + c];
  }
};

// ---------------------------------------------------------------------------
// Color conversion: sRGB (D65) <-> CIELAB

inline std::array<double, 3> rgb_to_lab(const std::array<std::uint8_t, 3>& rgb) {
  const auto linearize = [](double c) {
    c /= 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = linearize(rgb[0]), g = linearize(rgb[1]), b = linearize(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  const auto f = [](double t) {
    constexpr double cube = 216.0 / 24389.0;   // (6/29)^3
    constexpr double slope = 24389.0 / 3132.0; // 1/(3 (6/29)^2)
    return t > cube ? std::cbrt(t) : slope * t + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline std::array<std::uint8_t, 3> lab_to_rgb(const std::array<double, 3>& lab) {
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const auto finv = [](double t) {
    constexpr double eps = 6.0 / 29.0;
    return t > eps ? t * t * t : 3.0 * eps * eps * (t - 4.0 / 29.0);
  };
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  const double x = xn * finv(fx), y = yn * finv(fy), z = zn * finv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  const auto encode = [](double c) {
    c = c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
    const double v = std::round(c * 255.0);
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
  };
  return {encode(r), encode(g), encode(b)};
}

// ---------------------------------------------------------------------------
// PNM (PPM/PGM) I/O

namespace detail {

inline int pnm_next_int(std::istream& in) {
  // skips whitespace and # comments
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw std::runtime_error("malformed PNM header");
  return v;
}

}  // namespace detail

inline Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  const bool color = magic == "P6" || magic == "P3";
  const bool gray = magic == "P5" || magic == "P2";
  if (!color && !gray) throw std::runtime_error(path + ": unsupported PNM type");
  Image img;
  img.width = detail::pnm_next_int(in);
  img.height = detail::pnm_next_int(in);
  const int maxval = detail::pnm_next_int(in);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255)
    throw std::runtime_error(path + ": unsupported PNM geometry/depth");
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  const size_t count = img.pixels.size() * (color ? 3 : 1);
  std::vector<std::uint8_t> raw(count);
  if (magic == "P6" || magic == "P5") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count));
    if (!in) throw std::runtime_error(path + ": truncated PNM data");
  } else {
    for (size_t i = 0; i < count; ++i)
      raw[i] = static_cast<std::uint8_t>(detail::pnm_next_int(in));
  }
  for (size_t p = 0; p < img.pixels.size(); ++p) {
    if (color)
      img.pixels[p] = {raw[3 * p], raw[3 * p + 1], raw[3 * p + 2]};
    else
      img.pixels[p] = {raw[p], raw[p], raw[p]};
  }
  return img;
}

inline void save_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const auto& px : img.pixels)
    out.write(reinterpret_cast<const char*>(px.data()), 3);
}

/// 16-bit big-endian PGM, used for label maps.
inline void save_label_map_pgm(const std::vector<int>& labels, int width,
                               int height, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  for (int v : labels) {
    if (v < 0 || v > 65535)
      throw std::runtime_error("label map value out of 16-bit range");
    const std::uint8_t hi = static_cast<std::uint8_t>(v >> 8);
    const std::uint8_t lo = static_cast<std::uint8_t>(v & 0xff);
    out.put(static_cast<char>(hi));
    out.put(static_cast<char>(lo));
  }
}

inline std::vector<int> load_label_map_pgm(const std::string& path, int& width,
                                           int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P2")
    throw std::runtime_error(path + ": not a PGM label map");
  width = detail::pnm_next_int(in);
  height = detail::pnm_next_int(in);
  const int maxval = detail::pnm_next_int(in);
  std::vector<int> labels(static_cast<size_t>(width) * height);
  if (magic == "P2") {
    for (auto& v : labels) v = detail::pnm_next_int(in);
    return labels;
  }
  in.get();
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<std::uint8_t> raw(labels.size() * static_cast<size_t>(bytes));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error(path + ": truncated PGM data");
  for (size_t i = 0; i < labels.size(); ++i)
    labels[i] = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
  return labels;
}

// ---------------------------------------------------------------------------
// PNG I/O (libpng)

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline Image load_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": PNG decode failed");
  }
  png_init_io(png, fp.get());
  png_read_png(png, info,
               PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA |
                   PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_GRAY_TO_RGB,
               nullptr);
  Image img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  png_bytepp rows = png_get_rows(png, info);
  img.pixels.resize(static_cast<size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      img.at(r, c) = {rows[r][3 * c], rows[r][3 * c + 1], rows[r][3 * c + 2]};
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void save_png_rgb(const Image& img, const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path + ": PNG encode failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  std::vector<std::uint8_t> raw(static_cast<size_t>(img.width) * img.height * 3);
  for (int r = 0; r < img.height; ++r) {
    rows[static_cast<size_t>(r)] = raw.data() + static_cast<size_t>(r) * img.width * 3;
    for (int c = 0; c < img.width; ++c) {
      const auto& px = img.at(r, c);
      std::copy(px.begin(), px.end(),
                raw.begin() + static_cast<size_t>(r) * img.width * 3 + 3 * c);
    }
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 16-bit grayscale PNG label map.
inline void save_label_map_png(const std::vector<int>& labels, int width,
                               int height, const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path + ": PNG encode failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  std::vector<std::uint8_t> raw(static_cast<size_t>(width) * height * 2);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int r = 0; r < height; ++r) {
    rows[static_cast<size_t>(r)] = raw.data() + static_cast<size_t>(r) * width * 2;
    for (int c = 0; c < width; ++c) {
      const int v = labels[static_cast<size_t>(r) * width + c];
      if (v < 0 || v > 65535)
        throw std::runtime_error("label map value out of 16-bit range");
      raw[static_cast<size_t>(r) * width * 2 + 2 * c] =
          static_cast<std::uint8_t>(v >> 8);
      raw[static_cast<size_t>(r) * width * 2 + 2 * c + 1] =
          static_cast<std::uint8_t>(v & 0xff);
    }
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline std::vector<int> load_label_map_png(const std::string& path, int& width,
                                           int& height) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": PNG decode failed");
  }
  png_init_io(png, fp.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND, nullptr);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  std::vector<int> labels(static_cast<size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      int v;
      if (depth == 16)
        v = (rows[r][2 * channels * c] << 8) | rows[r][2 * channels * c + 1];
      else
        v = rows[r][channels * c];
      labels[static_cast<size_t>(r) * width + c] = v;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return labels;
}

// ---------------------------------------------------------------------------
// Dispatch by file magic / extension

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open " + path);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == static_cast<char>(0x89) && magic[1] == 'P')
    return load_png(path);
  if (magic[0] == 'P') return load_pnm(path);
  throw std::runtime_error(path + ": unrecognized image format");
}

inline std::vector<int> load_label_map(const std::string& path, int& width,
                                       int& height) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open " + path);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == static_cast<char>(0x89) && magic[1] == 'P')
    return load_label_map_png(path, width, height);
  return load_label_map_pgm(path, width, height);
}

// ---------------------------------------------------------------------------
// Joint-domain feature construction

struct ImageFeatureSet {
  int width = 0, height = 0;
  PointStore features;
};

/// Feature i = (L, a, b, row, col) in row-major pixel order.
inline ImageFeatureSet image_to_features(const Image& img) {
  Eigen::MatrixXd pts(5, static_cast<Eigen::Index>(img.pixels.size()));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const auto lab = rgb_to_lab(img.at(r, c));
      const Eigen::Index i = static_cast<Eigen::Index>(r) * img.width + c;
      pts(0, i) = lab[0];
      pts(1, i) = lab[1];
      pts(2, i) = lab[2];
      pts(3, i) = r;
      pts(4, i) = c;
    }
  }
  return {img.width, img.height,
          PointStore(std::move(pts), DomainSplit{3, 2})};
}

/// Writes the compacted label map (16-bit PNG or PGM by extension) and the
/// segment image with every pixel painted its cluster mode's color.
inline void emit_segmentation(const Partition& partition,
                              const std::vector<Eigen::VectorXd>& modes,
                              int width, int height,
                              const std::string& label_path,
                              const std::string& segment_path) {
  if (static_cast<int64_t>(partition.labels.size()) !=
      static_cast<int64_t>(width) * height)
    throw std::invalid_argument("emit_segmentation: partition/grid mismatch");
  if (has_suffix(label_path, ".png"))
    save_label_map_png(partition.labels, width, height, label_path);
  else
    save_label_map_pgm(partition.labels, width, height, label_path);

  Image seg;
  seg.width = width;
  seg.height = height;
  seg.pixels.resize(partition.labels.size());
  std::vector<std::array<std::uint8_t, 3>> palette(modes.size());
  for (size_t k = 0; k < modes.size(); ++k)
    palette[k] = lab_to_rgb({modes[k][0], modes[k][1], modes[k][2]});
  for (size_t p = 0; p < partition.labels.size(); ++p)
    seg.pixels[p] = palette[static_cast<size_t>(partition.labels[p])];
  if (has_suffix(segment_path, ".png"))
    save_png_rgb(seg, segment_path);
  else
    save_ppm(seg, segment_path);
}

/// Per-cluster JSON dump for image runs.
inline void write_cluster_dump(const Partition& partition,
                               const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  std::vector<int> sizes(static_cast<size_t>(partition.cluster_count()), 0);
  for (int lbl : partition.labels) ++sizes[static_cast<size_t>(lbl)];
  for (int k = 0; k < partition.cluster_count(); ++k) {
    nlohmann::json item;
    item["id"] = k;
    item["size"] = sizes[static_cast<size_t>(k)];
    const auto& mode = partition.modes[static_cast<size_t>(k)];
    const auto& sigma = partition.sigmas[static_cast<size_t>(k)];
    if (sigma.is_joint()) {
      item["mode_lab"] = {mode[0], mode[1], mode[2]};
      item["mode_xy"] = {mode[3], mode[4]};
      nlohmann::json sr = nlohmann::json::array();
      for (int r = 0; r < 3; ++r)
        sr.push_back({sigma.range().matrix()(r, 0), sigma.range().matrix()(r, 1),
                      sigma.range().matrix()(r, 2)});
      item["sigma_r"] = sr;
      nlohmann::json ss = nlohmann::json::array();
      for (int r = 0; r < 2; ++r)
        ss.push_back(
            {sigma.spatial().matrix()(r, 0), sigma.spatial().matrix()(r, 1)});
      item["sigma_s"] = ss;
    } else {
      std::vector<double> m(mode.data(), mode.data() + mode.size());
      item["mode"] = m;
      nlohmann::json sr = nlohmann::json::array();
      for (int r = 0; r < sigma.range().dim(); ++r) {
        std::vector<double> row(static_cast<size_t>(sigma.range().dim()));
        for (int c = 0; c < sigma.range().dim(); ++c)
          row[static_cast<size_t>(c)] = sigma.range().matrix()(r, c);
        sr.push_back(row);
      }
      item["sigma"] = sr;
    }
    arr.push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << arr.dump(2) << '\n';
}

}  // namespace aaams
