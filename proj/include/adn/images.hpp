#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace adn {

/// Grey-level image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  int label = 0;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

struct ImageSet {
  int width = 0;
  int height = 0;
  std::size_t num_classes = 0;
  std::vector<Image> images;

  std::size_t size() const { return images.size(); }
};

/// MNIST-style IDX pair (magic 2051 images, 2049 labels). `limit` keeps only
/// the first n images when non-zero.
ImageSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit = 0);

/// Plain CSV: header `label,r0c0,r0c1,...`; the last column name fixes the
/// dimensions. Labels are integer class ids.
ImageSet parse_pixel_csv(std::istream& in);
ImageSet load_pixel_csv(const std::filesystem::path& path);
void write_pixel_csv(const ImageSet& set, std::ostream& out);
void write_pixel_csv(const ImageSet& set, const std::filesystem::path& path);

/// Binary PGM; values are scaled linearly from [min, max] onto 0..255.
void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<double>& values);

/// Global pixel standardization (mean 0, sigma 1) fitted on a training set.
struct PixelScaling {
  double mean = 0.0;
  double stddev = 1.0;

  void apply(ImageSet& set) const;
  void apply(Image& img) const;
  nlohmann::json to_json() const;
  static PixelScaling from_json(const nlohmann::json& j);
};

PixelScaling fit_pixel_scaling(const ImageSet& train);

/// Synthetic 8x8 four-class shapes: horizontal bar, vertical bar, diagonal
/// stroke and hollow square, at random positions with random intensity and
/// Gaussian pixel noise.
ImageSet make_shapes(std::size_t count, std::uint64_t seed, double noise = 0.1);
inline const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"hbar", "vbar", "diag", "box"};
  return names;
}

}  // namespace adn
