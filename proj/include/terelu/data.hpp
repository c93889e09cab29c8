// Copyright 2026 The TERELU Workbench Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "terelu/numerics.hpp"

namespace terelu {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxFormatError : public DataError {
 public:
  using DataError::DataError;
};
class IdxConsistencyError : public DataError {
 public:
  using DataError::DataError;
};
class IdxIoError : public DataError {
 public:
  using DataError::DataError;
};

struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

struct Batch {
  Matrix features;
  std::vector<std::size_t> labels;
};

namespace idx {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;

inline constexpr const char* kTrainImages = "train-images-idx3-ubyte";
inline constexpr const char* kTrainLabels = "train-labels-idx1-ubyte";
inline constexpr const char* kTestImages = "t10k-images-idx3-ubyte";
inline constexpr const char* kTestLabels = "t10k-labels-idx1-ubyte";

/// Unsigned-byte IDX array: shape plus flat payload.
struct Array {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

/// Parses an unsigned-byte IDX buffer whose magic must equal expected_magic.
/// The low byte of the magic is the dimension count.
inline Array parse(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic,
                   const std::string& what) {
  if (bytes.size() < 4) throw IdxIoError(what + ": truncated IDX header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08X, expected 0x%08X", magic, expected_magic);
    throw IdxFormatError(what + ": " + buf);
  }
  const std::size_t ndims = magic & 0xFFu;
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) throw IdxIoError(what + ": truncated IDX dimension header");
  Array arr;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    arr.dims.push_back(read_be32(bytes, 4 + 4 * d));
    count *= arr.dims.back();
  }
  if (bytes.size() - header < count)
    throw IdxIoError(what + ": truncated payload, expected " + std::to_string(count) +
                     " bytes, found " + std::to_string(bytes.size() - header));
  arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                  bytes.begin() + static_cast<std::ptrdiff_t>(header + count));
  return arr;
}

inline std::vector<std::uint8_t> serialize(const Array& arr) {
  std::vector<std::uint8_t> out;
  append_be32(out, 0x00000800u | static_cast<std::uint32_t>(arr.dims.size()));
  for (auto d : arr.dims) append_be32(out, d);
  out.insert(out.end(), arr.data.begin(), arr.data.end());
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Builds a Dataset from parsed image and label arrays. Pixels are divided by 255.
inline Dataset to_dataset(const Array& images, const Array& labels, std::size_t class_count,
                          std::string name) {
  if (images.dims.empty() || labels.dims.size() != 1)
    throw IdxFormatError("unexpected IDX dimensionality");
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n)
    throw IdxConsistencyError("image count " + std::to_string(n) + " != label count " +
                              std::to_string(labels.dims[0]));
  std::size_t d = 1;
  for (std::size_t k = 1; k < images.dims.size(); ++k) d *= images.dims[k];
  Dataset ds;
  ds.name = std::move(name);
  ds.class_count = class_count;
  ds.features = Matrix(n, d);
  auto dst = ds.features.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(images.data[i]) / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels.data[i] >= class_count)
      throw IdxConsistencyError("label " + std::to_string(labels.data[i]) + " at index " +
                                std::to_string(i) + " is outside [0, " +
                                std::to_string(class_count) + ")");
    ds.labels[i] = labels.data[i];
  }
  return ds;
}

}  // namespace idx

/// Loads an IDX image/label pair, e.g. the MNIST training files.
inline Dataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path,
                              std::size_t class_count = 10) {
  const auto images = idx::parse(idx::read_file(images_path), idx::kImageMagic,
                                 images_path.filename().string());
  const auto labels = idx::parse(idx::read_file(labels_path), idx::kLabelMagic,
                                 labels_path.filename().string());
  return idx::to_dataset(images, labels, class_count, images_path.filename().string());
}

/// Rows of ds selected by index, in the given order.
inline Dataset select(const Dataset& ds, std::span<const std::size_t> indices, std::string name) {
  Dataset out;
  out.name = std::move(name);
  out.class_count = ds.class_count;
  out.features = Matrix(indices.size(), ds.dim());
  out.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = ds.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels[r] = ds.labels[indices[r]];
  }
  return out;
}

/// Seeded stratified sample of n rows. Each class receives its proportional
/// share rounded by largest remainder, so counts are within one of exact.
inline Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > ds.size())
    throw std::invalid_argument("subset: n = " + std::to_string(n) + " outside [1, " +
                                std::to_string(ds.size()) + "]");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i : rng.permutation(ds.size())) by_class[ds.labels[i]].push_back(i);

  const std::size_t total = ds.size();
  std::vector<std::size_t> take(ds.class_count);
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (numerator mod total, class)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    const std::size_t num = n * by_class[c].size();
    take[c] = num / total;
    assigned += take[c];
    remainders.emplace_back(num % total, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r) {
    const std::size_t c = remainders[r % remainders.size()].second;
    if (take[c] < by_class[c].size()) {
      ++take[c];
      ++assigned;
    }
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t c = 0; c < ds.class_count; ++c)
    chosen.insert(chosen.end(), by_class[c].begin(),
                  by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
  const auto order = rng.permutation(chosen.size());
  std::vector<std::size_t> shuffled(chosen.size());
  for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = chosen[order[i]];
  return select(ds, shuffled, ds.name + "[" + std::to_string(n) + "]");
}

/// Splits a dataset into a seeded random holdout of holdout_n rows and the rest.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, std::size_t holdout_n,
                                                 std::uint64_t seed) {
  if (holdout_n >= ds.size())
    throw std::invalid_argument("split_holdout: holdout must leave at least one example");
  Rng rng(seed);
  const auto perm = rng.permutation(ds.size());
  std::span<const std::size_t> all(perm);
  return {select(ds, all.subspan(holdout_n), ds.name + "/train"),
          select(ds, all.first(holdout_n), ds.name + "/holdout")};
}

/// Seeded shuffled mini-batches covering every row once. A trailing batch of
/// a single row is merged into the one before it so batch statistics stay defined.
inline std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw std::invalid_argument("batches: batch_size must be >= 2");
  Rng rng(seed);
  const auto perm = rng.permutation(ds.size());
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < perm.size(); start += batch_size)
    ranges.emplace_back(start, std::min(perm.size(), start + batch_size));
  if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  std::vector<Batch> out;
  out.reserve(ranges.size());
  for (auto [lo, hi] : ranges) {
    std::span<const std::size_t> idx(perm.data() + lo, hi - lo);
    Dataset part = select(ds, idx, "");
    out.push_back({std::move(part.features), std::move(part.labels)});
  }
  return out;
}

/// Unit-variance Gaussian clusters. When classes <= dim the centers sit on
/// scaled coordinate axes so every pair is exactly `separation` apart;
/// otherwise they are spaced `separation` apart along the first axis.
inline Dataset synthetic_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                               double separation, std::uint64_t seed) {
  if (n_per_class == 0 || classes == 0 || dim == 0)
    throw std::invalid_argument("synthetic_blobs: counts must be positive");
  if (!(separation >= 0.0)) throw std::invalid_argument("synthetic_blobs: separation < 0");
  Matrix centers(classes, dim);
  if (classes <= dim) {
    const double r = separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < classes; ++c) centers(c, c) = r;
  } else {
    for (std::size_t c = 0; c < classes; ++c) centers(c, 0) = separation * static_cast<double>(c);
  }
  Rng rng(seed);
  Dataset ds;
  ds.name = "blobs";
  ds.class_count = classes;
  ds.features = Matrix(n_per_class * classes, dim);
  ds.labels.resize(n_per_class * classes);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t j = 0; j < dim; ++j) ds.features(row, j) = centers(c, j) + rng.normal();
      ds.labels[row] = c;
    }
  }
  return ds;
}

}  // namespace terelu
