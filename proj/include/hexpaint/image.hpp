// Copyright 2026 The Hexpaint Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HEXPAINT_IMAGE_HPP_
#define HEXPAINT_IMAGE_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexpaint/geometry.hpp"

namespace hexpaint {

// Row-major grid. Out-of-range access is the caller's bug; at() is unchecked
// in release builds just like Eigen coefficients.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const {
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  size_t size() const { return data_.size(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Image<uint8_t>;

// Depth along the optical axis in meters; 0 marks pixels with no surface
// return. Valid pixels are strictly positive.
using DepthImage = Image<double>;

inline bool depth_valid(double d) { return d > 0.0; }

// Per-pixel unit normal in the camera frame; zero vector where undefined.
using NormalImage = Image<Eigen::Vector3f>;

// Binary PGM (P5), 8 bit.
inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data()),
          static_cast<std::streamsize>(img.size()));
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported pgm header in " + path);
  f.get();
  GrayImage img(w, h);
  f.read(reinterpret_cast<char*>(img.data()),
         static_cast<std::streamsize>(img.size()));
  if (!f) throw std::runtime_error("truncated pgm " + path);
  return img;
}

// Depth dumped as 16 bit PGM in millimeters, big-endian per the format.
inline void write_pgm16(const std::string& path, const DepthImage& img,
                        double meters_to_unit = 1000.0) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<uint8_t> buf(img.size() * 2);
  for (size_t i = 0; i < img.size(); ++i) {
    const double v = img.data()[i] * meters_to_unit;
    const uint16_t q =
        static_cast<uint16_t>(std::clamp(v, 0.0, 65535.0) + 0.5);
    buf[2 * i] = static_cast<uint8_t>(q >> 8);
    buf[2 * i + 1] = static_cast<uint8_t>(q & 0xff);
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
}

inline DepthImage read_pgm16(const std::string& path,
                             double unit_to_meters = 1e-3) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 65535)
    throw std::runtime_error("unsupported pgm header in " + path);
  f.get();
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * 2);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated pgm " + path);
  DepthImage img(w, h);
  for (size_t i = 0; i < img.size(); ++i) {
    const uint16_t q =
        static_cast<uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    img.data()[i] = q * unit_to_meters;
  }
  return img;
}

// Binary PPM (P6) from three gray channels, used for annotated dumps.
inline void write_ppm(const std::string& path, const GrayImage& r,
                      const GrayImage& g, const GrayImage& b) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P6\n" << r.width() << " " << r.height() << "\n255\n";
  std::vector<uint8_t> buf(r.size() * 3);
  for (size_t i = 0; i < r.size(); ++i) {
    buf[3 * i] = r.data()[i];
    buf[3 * i + 1] = g.data()[i];
    buf[3 * i + 2] = b.data()[i];
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
}

}  // namespace hexpaint

#endif  // HEXPAINT_IMAGE_HPP_
