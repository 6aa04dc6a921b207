#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "rawforge/imagecore.hpp"
#include "rawforge/random.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("rawforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline rawforge::ImagePlane random_plane(std::uint64_t seed, int w, int h, double lo = 0.0, double hi = 1.0) {
  rawforge::Rng rng(seed);
  rawforge::ImagePlane p(w, h);
  for (float& v : p.samples()) v = static_cast<float>(rng.uniform(lo, hi));
  return p;
}

template <class Img>
Img random_image(std::uint64_t seed, int w, int h, double lo = 0.0, double hi = 1.0) {
  return Img(random_plane(seed, w, h, lo, hi), random_plane(seed + 1, w, h, lo, hi),
             random_plane(seed + 2, w, h, lo, hi));
}

inline double max_abs_diff(const rawforge::ImagePlane& a, const rawforge::ImagePlane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.samples()[i]) - b.samples()[i]));
  }
  return m;
}

template <class Tag>
double max_abs_diff(const rawforge::ColorImage<Tag>& a, const rawforge::ColorImage<Tag>& b) {
  return std::max({max_abs_diff(a.r, b.r), max_abs_diff(a.g, b.g), max_abs_diff(a.b, b.b)});
}

inline rawforge::ImagePlane constant_plane(int w, int h, float v) { return rawforge::ImagePlane(w, h, v); }

// Textbook MSE-based PSNR, straight loops.
template <class Tag>
double reference_psnr(const rawforge::ColorImage<Tag>& a, const rawforge::ColorImage<Tag>& b) {
  long double sum = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < a.plane(c).size(); ++i) {
      const long double d = static_cast<long double>(a.plane(c).samples()[i]) - b.plane(c).samples()[i];
      sum += d * d;
      ++n;
    }
  }
  return static_cast<double>(-10.0L * std::log10(sum / n));
}

}  // namespace testing
