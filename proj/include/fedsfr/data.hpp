#pragma once

#include <string>
#include <vector>

#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

/// An immutable set of images, each stored flat (channel, row, column order)
/// with entries in [0, 1].
struct Dataset {
  std::vector<Vector> images;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::string name;

  int size() const { return static_cast<int>(images.size()); }
  int pixel_count() const { return channels * height * width; }
};

enum class SyntheticKind { kGradients, kGaussians, kChecker };
enum class PartitionScheme { kIidEqual, kSizeSkewed };

SyntheticKind synthetic_kind_from_string(const std::string& s);
PartitionScheme partition_scheme_from_string(const std::string& s);

Dataset generate_synthetic(int n, int channels, int height, int width,
                           SyntheticKind kind, std::uint64_t seed);

/// Splits into K disjoint datasets whose union is the input. Equal split
/// sizes differ by at most one; the skewed split draws proportions from
/// normalized exponentials with every part kept non-empty.
std::vector<Dataset> partition(const Dataset& data, int k, PartitionScheme scheme,
                               std::uint64_t seed);

/// Uniformly sampled public subset of size ceil(fraction * n), as sorted
/// indices into the dataset.
std::vector<int> mark_public(const Dataset& data, double fraction,
                             std::uint64_t seed);

// Raw image files: "FSFI" magic, u32 count, u32 C/H/W, then images as f32
// little-endian in [0, 1].
Dataset load_raw(const std::string& path);
void save_raw(const std::string& path, const Dataset& data);

}  // namespace fedsfr
