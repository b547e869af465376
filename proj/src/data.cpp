#include "fedsfr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace fedsfr {

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "gradients") return SyntheticKind::kGradients;
  if (s == "gaussians") return SyntheticKind::kGaussians;
  if (s == "checker") return SyntheticKind::kChecker;
  throw Error("unknown synthetic kind '" + s + "'");
}

PartitionScheme partition_scheme_from_string(const std::string& s) {
  if (s == "iid-equal") return PartitionScheme::kIidEqual;
  if (s == "size-skewed") return PartitionScheme::kSizeSkewed;
  throw Error("unknown partition scheme '" + s + "'");
}

namespace {

Vector ramp_image(int h, int w, RngStream& rng) {
  const double a = rng.uniform(-1.0, 1.0);
  const double bx = rng.uniform(-1.0, 1.0);
  const double by = rng.uniform(-1.0, 1.0);
  Vector img(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double fx = w > 1 ? double(x) / (w - 1) : 0.0;
      const double fy = h > 1 ? double(y) / (h - 1) : 0.0;
      img[y * w + x] = a + bx * fx + by * fy;
    }
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (hi > lo)
    img = (img.array() - lo) / (hi - lo);
  else
    img.setConstant(0.5);
  return img;
}

Vector blob_image(int h, int w, RngStream& rng) {
  Vector img = Vector::Zero(h * w);
  const int blobs = 1 + rng.uniform_int(3);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0.0, w - 1.0);
    const double cy = rng.uniform(0.0, h - 1.0);
    const double sd = rng.uniform(0.5, 0.25 * std::max(h, w) + 0.5);
    const double amp = rng.uniform(0.3, 1.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img[y * w + x] += amp * std::exp(-d2 / (2.0 * sd * sd));
      }
  }
  return img.cwiseMin(1.0).cwiseMax(0.0);
}

Vector checker_image(int h, int w, RngStream& rng) {
  const int period = 2 + 2 * rng.uniform_int(2);  // 2 or 4
  const int px = rng.uniform_int(period);
  const int py = rng.uniform_int(period);
  const double lo = rng.uniform(0.0, 0.4);
  const double hi = rng.uniform(0.6, 1.0);
  Vector img(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int cell = ((x + px) / (period / 2) + (y + py) / (period / 2)) % 2;
      img[y * w + x] = cell ? hi : lo;
    }
  return img;
}

}  // namespace

Dataset generate_synthetic(int n, int channels, int height, int width,
                           SyntheticKind kind, std::uint64_t seed) {
  if (n < 0) throw Error("generate_synthetic: negative count");
  if (channels <= 0 || height <= 0 || width <= 0)
    throw Error("generate_synthetic: invalid shape");
  Dataset d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.name = "synthetic";
  RngStream rng = derive_stream(seed, {stream_tag::kData});
  for (int i = 0; i < n; ++i) {
    Vector img(channels * height * width);
    for (int c = 0; c < channels; ++c) {
      Vector plane;
      switch (kind) {
        case SyntheticKind::kGradients: plane = ramp_image(height, width, rng); break;
        case SyntheticKind::kGaussians: plane = blob_image(height, width, rng); break;
        case SyntheticKind::kChecker: plane = checker_image(height, width, rng); break;
      }
      img.segment(c * height * width, height * width) = plane;
    }
    d.images.push_back(std::move(img));
  }
  return d;
}

std::vector<Dataset> partition(const Dataset& data, int k, PartitionScheme scheme,
                               std::uint64_t seed) {
  if (k <= 0) throw Error("partition: k must be positive");
  const int n = data.size();
  if (n < k) throw Error("partition: fewer images than clients");
  RngStream rng = derive_stream(seed, {stream_tag::kPartition});

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  if (scheme == PartitionScheme::kIidEqual) {
    for (int i = 0; i < k; ++i) sizes[static_cast<std::size_t>(i)] = n / k;
    for (int i = 0; i < n % k; ++i) sizes[static_cast<std::size_t>(i)] += 1;
  } else {
    // Normalized exponential draws; largest-remainder rounding with a floor
    // of one image per client.
    std::vector<double> weights(static_cast<std::size_t>(k));
    double total = 0.0;
    for (double& w : weights) {
      w = -std::log(std::max(1.0 - rng.uniform(), 0x1.0p-53));
      total += w;
    }
    int assigned = 0;
    std::vector<std::pair<double, int>> remainders;
    for (int i = 0; i < k; ++i) {
      const double exact = weights[static_cast<std::size_t>(i)] / total * n;
      sizes[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(exact));
      assigned += sizes[static_cast<std::size_t>(i)];
      remainders.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) {
                       if (a.first != b.first) return a.first > b.first;
                       return a.second < b.second;
                     });
    for (int i = 0; i < n - assigned; ++i)
      sizes[static_cast<std::size_t>(remainders[static_cast<std::size_t>(i)].second)] += 1;
    for (int i = 0; i < k; ++i) {
      while (sizes[static_cast<std::size_t>(i)] == 0) {
        auto big = std::max_element(sizes.begin(), sizes.end());
        (*big) -= 1;
        sizes[static_cast<std::size_t>(i)] += 1;
      }
    }
  }

  std::vector<Dataset> parts;
  int cursor = 0;
  for (int i = 0; i < k; ++i) {
    Dataset part;
    part.channels = data.channels;
    part.height = data.height;
    part.width = data.width;
    part.name = data.name + ".part" + std::to_string(i);
    for (int j = 0; j < sizes[static_cast<std::size_t>(i)]; ++j)
      part.images.push_back(data.images[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor++)])]);
    parts.push_back(std::move(part));
  }
  return parts;
}

std::vector<int> mark_public(const Dataset& data, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error("mark_public: fraction must be in (0, 1]");
  const int n = data.size();
  if (n == 0) throw Error("mark_public: empty dataset");
  const int count = static_cast<int>(std::ceil(fraction * n));
  RngStream rng = derive_stream(seed, {stream_tag::kPublic});
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  order.resize(static_cast<std::size_t>(count));
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'F', 'I'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw Error("raw image file: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_raw(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("raw image file: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(data.size()));
  write_u32(os, static_cast<std::uint32_t>(data.channels));
  write_u32(os, static_cast<std::uint32_t>(data.height));
  write_u32(os, static_cast<std::uint32_t>(data.width));
  for (const Vector& img : data.images)
    for (Eigen::Index i = 0; i < img.size(); ++i) {
      const float f = static_cast<float>(img[i]);
      std::uint32_t v;
      std::memcpy(&v, &f, 4);
      write_u32(os, v);
    }
  if (!os) throw Error("raw image file: write failed for " + path);
}

Dataset load_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("raw image file: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("raw image file: bad magic in " + path);
  Dataset d;
  const std::uint32_t count = read_u32(is);
  d.channels = static_cast<int>(read_u32(is));
  d.height = static_cast<int>(read_u32(is));
  d.width = static_cast<int>(read_u32(is));
  if (d.channels <= 0 || d.height <= 0 || d.width <= 0)
    throw Error("raw image file: invalid shape");
  d.name = path;
  const int pixels = d.pixel_count();
  for (std::uint32_t i = 0; i < count; ++i) {
    Vector img(pixels);
    for (int p = 0; p < pixels; ++p) {
      const std::uint32_t v = read_u32(is);
      float f;
      std::memcpy(&f, &v, 4);
      if (!(f >= 0.0f && f <= 1.0f))
        throw Error("raw image file: pixel out of [0, 1] range");
      img[p] = static_cast<double>(f);
    }
    d.images.push_back(std::move(img));
  }
  return d;
}

}  // namespace fedsfr
