#include "adn/images.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adn/data.hpp"
#include "adn/error.hpp"
#include "adn/rng.hpp"

namespace adn {

namespace {

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

ImageSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit) {
  auto img = open_binary(images);
  auto lab = open_binary(labels);
  if (read_be32(img) != 2051) throw Error(images.string() + ": not an IDX image file");
  if (read_be32(lab) != 2049) throw Error(labels.string() + ": not an IDX label file");
  std::size_t n = read_be32(img);
  const auto rows = static_cast<int>(read_be32(img));
  const auto cols = static_cast<int>(read_be32(img));
  if (read_be32(lab) != n) throw Error("IDX image and label counts differ");
  if (limit) n = std::min(n, limit);

  ImageSet set;
  set.width = cols;
  set.height = rows;
  const auto px = static_cast<std::size_t>(rows * cols);
  std::vector<unsigned char> buf(px);
  for (std::size_t i = 0; i < n; ++i) {
    Image im{cols, rows, std::vector<double>(px), 0};
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(px)))
      throw Error("truncated IDX image data");
    std::transform(buf.begin(), buf.end(), im.pixels.begin(), [](unsigned char c) { return double(c); });
    char l;
    if (!lab.get(l)) throw Error("truncated IDX label data");
    im.label = static_cast<unsigned char>(l);
    set.num_classes = std::max(set.num_classes, static_cast<std::size_t>(im.label) + 1);
    set.images.push_back(std::move(im));
  }
  return set;
}

ImageSet parse_pixel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw LoadError(1, "empty file");
  const auto last = line.substr(line.rfind(',') + 1);
  int r = -1, c = -1;
  if (std::sscanf(last.c_str(), "r%dc%d", &r, &c) != 2 || line.rfind("label,", 0) != 0)
    throw LoadError(1, "header must be label,r0c0,...,r<H-1>c<W-1>");
  ImageSet set;
  set.width = c + 1;
  set.height = r + 1;
  const auto px = static_cast<std::size_t>(set.width * set.height);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Image im{set.width, set.height, {}, 0};
    im.pixels.reserve(px);
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size()) throw LoadError(row, "bad number '" + cell + "'");
      if (first) {
        if (v < 0 || v != std::floor(v)) throw LoadError(row, "label must be a non-negative integer");
        im.label = static_cast<int>(v);
        first = false;
      } else {
        im.pixels.push_back(v);
      }
    }
    if (im.pixels.size() != px) throw LoadError(row, "expected " + std::to_string(px) + " pixels");
    set.num_classes = std::max(set.num_classes, static_cast<std::size_t>(im.label) + 1);
    set.images.push_back(std::move(im));
  }
  return set;
}

ImageSet load_pixel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_pixel_csv(in);
}

void write_pixel_csv(const ImageSet& set, std::ostream& out) {
  out << "label";
  for (int y = 0; y < set.height; ++y)
    for (int x = 0; x < set.width; ++x) out << ",r" << y << 'c' << x;
  out << '\n';
  for (const auto& im : set.images) {
    out << im.label;
    for (double v : im.pixels) out << ',' << format_real(v);
    out << '\n';
  }
}

void write_pixel_csv(const ImageSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_pixel_csv(set, out);
}

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<double>& values) {
  if (width <= 0 || height <= 0 || values.size() != static_cast<std::size_t>(width * height))
    throw DimensionError("PGM size does not match the value count");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (double v : values) {
    const double s = span > 0.0 ? (v - *lo) / span : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0))));
  }
}

void PixelScaling::apply(Image& img) const {
  for (auto& v : img.pixels) v = (v - mean) / stddev;
}

void PixelScaling::apply(ImageSet& set) const {
  for (auto& im : set.images) apply(im);
}

nlohmann::json PixelScaling::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

PixelScaling PixelScaling::from_json(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("stddev").get<double>()};
}

PixelScaling fit_pixel_scaling(const ImageSet& train) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& im : train.images)
    for (double v : im.pixels) {
      sum += v;
      sq += v * v;
      ++n;
    }
  PixelScaling s;
  if (n == 0) return s;
  s.mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - s.mean * s.mean;
  s.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

ImageSet make_shapes(std::size_t count, std::uint64_t seed, double noise) {
  constexpr int W = 8, H = 8;
  Rng rng(splitmix64(seed));
  std::normal_distribution<double> jitter(0.0, noise);
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1))); };

  ImageSet set;
  set.width = W;
  set.height = H;
  set.num_classes = 4;
  for (std::size_t i = 0; i < count; ++i) {
    Image im{W, H, std::vector<double>(W * H, 0.0), static_cast<int>(i % 4)};
    const double ink = 0.6 + 0.4 * uniform01(rng);
    auto put = [&](int x, int y) { im.pixels[static_cast<std::size_t>(y * W + x)] = ink; };
    switch (im.label) {
      case 0: {
        const int len = pick(4, 6), x = pick(0, W - len), y = pick(0, H - 1);
        for (int d = 0; d < len; ++d) put(x + d, y);
        break;
      }
      case 1: {
        const int len = pick(4, 6), x = pick(0, W - 1), y = pick(0, H - len);
        for (int d = 0; d < len; ++d) put(x, y + d);
        break;
      }
      case 2: {
        const int len = pick(4, 6), x = pick(0, W - len), y = pick(0, H - len);
        for (int d = 0; d < len; ++d) put(x + d, y + d);
        break;
      }
      default: {
        const int s = pick(3, 5), x = pick(0, W - s), y = pick(0, H - s);
        for (int d = 0; d < s; ++d) {
          put(x + d, y);
          put(x + d, y + s - 1);
          put(x, y + d);
          put(x + s - 1, y + d);
        }
      }
    }
    for (auto& v : im.pixels) v += jitter(rng);
    set.images.push_back(std::move(im));
  }
  return set;
}

}  // namespace adn
