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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "terelu/data.hpp"

using namespace terelu;
namespace fs = std::filesystem;

namespace {

// Two 2x2 images and their labels, built byte by byte.
std::vector<std::uint8_t> image_fixture() {
  return {0x00, 0x00, 0x08, 0x03,  // magic
          0x00, 0x00, 0x00, 0x02,  // count
          0x00, 0x00, 0x00, 0x02,  // rows
          0x00, 0x00, 0x00, 0x02,  // cols
          0,    255,  51,   102,   // image 0
          255,  0,    0,    204};  // image 1
}

std::vector<std::uint8_t> label_fixture() {
  return {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3};
}

Dataset from_fixtures(const std::vector<std::uint8_t>& img, const std::vector<std::uint8_t>& lab) {
  return idx::to_dataset(idx::parse(img, idx::kImageMagic, "images"),
                         idx::parse(lab, idx::kLabelMagic, "labels"), 10, "fixture");
}

Dataset labelled(std::size_t n, std::size_t classes) {
  Dataset ds;
  ds.features = Matrix(n, 1);
  ds.class_count = classes;
  for (std::size_t i = 0; i < n; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.labels.push_back(i % classes);
  }
  return ds;
}

std::vector<double> ids(const Dataset& ds) {
  std::vector<double> v(ds.features.values().begin(), ds.features.values().end());
  std::sort(v.begin(), v.end());
  return v;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("terelu_data_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::optional<fs::path> mnist_dir() {
  for (const char* candidate : {static_cast<const char*>(std::getenv("TERELU_DATA_DIR")), "/root/mnist"}) {
    if (!candidate || !*candidate) continue;
    if (fs::exists(fs::path(candidate) / idx::kTrainImages)) return fs::path(candidate);
  }
  return std::nullopt;
}

}  // namespace

// IDX.

TEST(Idx, FixtureDecodesToExpectedFeatures) {
  const Dataset ds = from_fixtures(image_fixture(), label_fixture());
  ASSERT_EQ(ds.size(), 2u);
  ASSERT_EQ(ds.dim(), 4u);
  EXPECT_EQ(ds.features, (Matrix{{0.0, 1.0, 0.2, 0.4}, {1.0, 0.0, 0.0, 0.8}}));
  EXPECT_EQ(ds.labels, (std::vector<std::size_t>{7, 3}));
}

TEST(Idx, BadMagicIsFormatError) {
  auto img = image_fixture();
  img[3] = 0x01;
  EXPECT_THROW(idx::parse(img, idx::kImageMagic, "images"), IdxFormatError);
  EXPECT_THROW(idx::parse(label_fixture(), idx::kImageMagic, "labels"), IdxFormatError);
}

TEST(Idx, CountMismatchIsConsistencyError) {
  auto lab = label_fixture();
  lab[7] = 1;
  lab.pop_back();
  EXPECT_THROW(from_fixtures(image_fixture(), lab), IdxConsistencyError);
}

TEST(Idx, LabelOutsideClassRangeIsConsistencyError) {
  auto lab = label_fixture();
  lab[8] = 10;
  EXPECT_THROW(from_fixtures(image_fixture(), lab), IdxConsistencyError);
}

TEST(Idx, TruncationIsIoError) {
  auto img = image_fixture();
  img.pop_back();
  EXPECT_THROW(idx::parse(img, idx::kImageMagic, "images"), IdxIoError);
  const std::vector<std::uint8_t> header_only{0x00, 0x00, 0x08};
  EXPECT_THROW(idx::parse(header_only, idx::kImageMagic, "images"), IdxIoError);
}

TEST(Idx, FilesRoundTrip) {
  const auto dir = temp_dir("roundtrip");
  const auto images = idx::parse(image_fixture(), idx::kImageMagic, "images");
  EXPECT_EQ(idx::serialize(images), image_fixture());
  idx::write_file(dir / "img", idx::serialize(images));
  idx::write_file(dir / "lab", label_fixture());
  const Dataset ds = load_mnist_idx(dir / "img", dir / "lab");
  EXPECT_EQ(ds.features, from_fixtures(image_fixture(), label_fixture()).features);
  EXPECT_THROW(load_mnist_idx(dir / "nope", dir / "lab"), IdxIoError);
  fs::remove_all(dir);
}

// Subsets and batches.

TEST(Subset, FullSizeIsAPermutation) {
  const Dataset ds = labelled(30, 3);
  const Dataset s = subset(ds, 30, 1);
  EXPECT_EQ(ids(s), ids(ds));
}

TEST(Subset, ClassCountGivesOnePerClass) {
  const Dataset s = subset(labelled(50, 5), 5, 2);
  std::vector<std::size_t> labels = s.labels;
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(labels, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Subset, StratificationWithinOnePerClass) {
  Dataset ds;
  ds.class_count = 3;
  ds.features = Matrix(100, 1);
  for (std::size_t i = 0; i < 100; ++i) ds.labels.push_back(i < 50 ? 0 : i < 80 ? 1 : 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset s = subset(ds, 37, seed);
    std::map<std::size_t, std::size_t> counts;
    for (auto l : s.labels) ++counts[l];
    EXPECT_NEAR(static_cast<double>(counts[0]), 37 * 0.5, 1.0);
    EXPECT_NEAR(static_cast<double>(counts[1]), 37 * 0.3, 1.0);
    EXPECT_NEAR(static_cast<double>(counts[2]), 37 * 0.2, 1.0);
  }
}

TEST(Subset, NeverDuplicatesAndIsSeeded) {
  const Dataset ds = labelled(200, 4);
  const Dataset a = subset(ds, 77, 9);
  auto v = ids(a);
  EXPECT_EQ(std::adjacent_find(v.begin(), v.end()), v.end());
  EXPECT_EQ(subset(ds, 77, 9).features, a.features);
}

TEST(Subset, OutOfRangeIsAnError) {
  EXPECT_THROW(subset(labelled(10, 2), 11, 0), std::invalid_argument);
  EXPECT_THROW(subset(labelled(10, 2), 0, 0), std::invalid_argument);
}

TEST(SplitHoldout, PartitionsTheSource) {
  const Dataset ds = labelled(40, 4);
  auto [rest, hold] = split_holdout(ds, 10, 3);
  EXPECT_EQ(rest.size(), 30u);
  EXPECT_EQ(hold.size(), 10u);
  auto all = ids(rest);
  const auto h = ids(hold);
  all.insert(all.end(), h.begin(), h.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, ids(ds));
}

TEST(Batches, EvenSplit) {
  const auto b = batches(labelled(10, 2), 5, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].labels.size(), 5u);
  EXPECT_EQ(b[1].labels.size(), 5u);
}

TEST(Batches, TrailingSingletonIsMerged) {
  const auto b = batches(labelled(11, 2), 5, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].labels.size(), 5u);
  EXPECT_EQ(b[1].labels.size(), 6u);
}

TEST(Batches, PartialBatchKept) {
  const auto b = batches(labelled(13, 2), 5, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2].labels.size(), 3u);
}

TEST(Batches, SameSeedSameOrderAndMultisetPreserved) {
  const Dataset ds = labelled(23, 3);
  const auto a = batches(ds, 4, 8);
  const auto b = batches(ds, 4, 8);
  ASSERT_EQ(a.size(), b.size());
  std::vector<double> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].labels, b[i].labels);
    for (std::size_t r = 0; r < a[i].labels.size(); ++r) {
      const double id = a[i].features(r, 0);
      seen.push_back(id);
      EXPECT_EQ(a[i].labels[r], static_cast<std::size_t>(id) % 3);
    }
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, ids(ds));
  EXPECT_NE(batches(ds, 4, 9)[0].features, a[0].features);
}

TEST(Batches, RejectsBatchSizeBelowTwo) {
  EXPECT_THROW(batches(labelled(4, 2), 1, 0), std::invalid_argument);
}

// Synthetic blobs.

TEST(Blobs, ShapesAndLabels) {
  const Dataset ds = synthetic_blobs(25, 4, 8, 3.0, 1);
  EXPECT_EQ(ds.size(), 100u);
  EXPECT_EQ(ds.dim(), 8u);
  EXPECT_EQ(ds.class_count, 4u);
  std::map<std::size_t, std::size_t> counts;
  for (auto l : ds.labels) ++counts[l];
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(counts[c], 25u);
  EXPECT_EQ(synthetic_blobs(25, 4, 8, 3.0, 1).features, ds.features);
}

namespace {

double nearest_centroid_accuracy(const Dataset& ds) {
  Matrix centroids(ds.class_count, ds.dim());
  std::vector<double> counts(ds.class_count, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    counts[ds.labels[i]] += 1.0;
    for (std::size_t j = 0; j < ds.dim(); ++j) centroids(ds.labels[i], j) += ds.features(i, j);
  }
  for (std::size_t c = 0; c < ds.class_count; ++c)
    for (std::size_t j = 0; j < ds.dim(); ++j) centroids(c, j) /= counts[c];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < ds.class_count; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < ds.dim(); ++j) d += std::pow(ds.features(i, j) - centroids(c, j), 2);
      if (d < best_d) best_d = d, best = c;
    }
    hits += best == ds.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace

TEST(Blobs, SeparationTenIsLinearlySeparable) {
  EXPECT_GE(nearest_centroid_accuracy(synthetic_blobs(1000, 2, 4, 10.0, 2)), 0.999);
}

TEST(Blobs, SeparationZeroIsChanceLevel) {
  // Centroids fitted on one draw, scored on an independent draw.
  const Dataset fit = synthetic_blobs(1000, 4, 8, 0.0, 3);
  const Dataset test = synthetic_blobs(1000, 4, 8, 0.0, 4);
  Matrix centroids(4, 8);
  for (std::size_t i = 0; i < fit.size(); ++i)
    for (std::size_t j = 0; j < 8; ++j) centroids(fit.labels[i], j) += fit.features(i, j) / 1000.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < 4; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 8; ++j) d += std::pow(test.features(i, j) - centroids(c, j), 2);
      if (d < best_d) best_d = d, best = c;
    }
    hits += best == test.labels[i];
  }
  EXPECT_NEAR(static_cast<double>(hits) / 4000.0, 0.25, 0.05);
}

// Official files, when available.

TEST(Mnist, OfficialSplitsHaveStandardSizes) {
  const auto dir = mnist_dir();
  if (!dir) GTEST_SKIP() << "MNIST IDX files not found";
  const Dataset train = load_mnist_idx(*dir / idx::kTrainImages, *dir / idx::kTrainLabels);
  EXPECT_EQ(train.size(), 60000u);
  EXPECT_EQ(train.dim(), 784u);
  const Dataset test = load_mnist_idx(*dir / idx::kTestImages, *dir / idx::kTestLabels);
  EXPECT_EQ(test.size(), 10000u);
  for (double v : train.features.row(0)) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }

  // MNIST digits are not balanced (digit 5 is 9.0%, digit 1 is 11.2%), so
  // the stratified counts track each digit's share of the source.
  std::map<std::size_t, double> share;
  for (auto l : train.labels) share[l] += 1.0 / static_cast<double>(train.size());
  const Dataset s = subset(train, 1000, 1);
  std::map<std::size_t, std::size_t> counts;
  for (auto l : s.labels) ++counts[l];
  for (std::size_t d = 0; d < 10; ++d)
    EXPECT_LE(std::abs(static_cast<double>(counts[d]) - 1000.0 * share[d]), 1.0) << d;
}
