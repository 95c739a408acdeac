// Copyright 2026 The fasgd-sim Authors. All Rights Reserved.
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

// IDX ingestion, a synthetic stand-in for MNIST, and minibatch sampling.
//
// IDX layout (all header integers big-endian):
//
//   images: magic 0x00000803 | count | rows | cols | count*rows*cols bytes
//   labels: magic 0x00000801 | count | count bytes
//
// Pixel bytes are scaled by 1/255 so every input lies in [0, 1].

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fasgd/errors.hpp"
#include "fasgd/mlp.hpp"
#include "fasgd/rng.hpp"

namespace fasgd {

enum class DatasetSplit { kTrain, kValidation };

struct Dataset {
  std::size_t dim = 0;
  std::vector<double> images;  // size() rows of `dim` values, row-major
  std::vector<int> labels;
  DatasetSplit split = DatasetSplit::kTrain;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {images.data() + i * dim, dim}; }

  // Rows [first, first + count) as a new dataset.
  Dataset slice(std::size_t first, std::size_t count, DatasetSplit as) const {
    if (first + count > size()) {
      throw ConfigError("dataset slice [" + std::to_string(first) + ", " +
                        std::to_string(first + count) + ") exceeds " + std::to_string(size()) +
                        " rows");
    }
    Dataset out;
    out.dim = dim;
    out.split = as;
    out.images.assign(images.begin() + static_cast<std::ptrdiff_t>(first * dim),
                      images.begin() + static_cast<std::ptrdiff_t>((first + count) * dim));
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                      labels.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
  }

  // Gathers the given rows into a minibatch.
  Minibatch gather(std::span<const std::size_t> idx) const {
    Minibatch b;
    b.dim = dim;
    b.inputs.reserve(idx.size() * dim);
    b.labels.reserve(idx.size());
    for (std::size_t i : idx) {
      auto r = row(i);
      b.inputs.insert(b.inputs.end(), r.begin(), r.end());
      b.labels.push_back(labels[i]);
    }
    return b;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& path) {
  if (offset + 4 > buf.size()) {
    throw IngestionError(path + ": truncated header at offset " + std::to_string(offset) +
                         " (file is " + std::to_string(buf.size()) + " bytes)");
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

inline void check_payload(const std::vector<unsigned char>& buf, std::size_t offset,
                          std::size_t expected, const std::string& path) {
  const std::size_t actual = buf.size() - offset;
  if (actual < expected) {
    throw IngestionError(path + ": truncated payload at offset " + std::to_string(offset) +
                         ": expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(actual));
  }
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t classes = kMnistClasses) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != kIdxImagesMagic) {
    throw IngestionError(images_path + ": bad magic " + detail::hex32(img_magic) +
                         " at offset 0, expected " + detail::hex32(kIdxImagesMagic));
  }
  const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic) {
    throw IngestionError(labels_path + ": bad magic " + detail::hex32(lab_magic) +
                         " at offset 0, expected " + detail::hex32(kIdxLabelsMagic));
  }

  const std::size_t n_img = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t n_lab = detail::read_be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw IngestionError(images_path + " holds " + std::to_string(n_img) + " images but " +
                         labels_path + " holds " + std::to_string(n_lab) +
                         " labels (count at offset 4)");
  }
  if (n_img == 0 || rows * cols == 0) throw IngestionError(images_path + ": empty dataset");

  constexpr std::size_t kImgHeader = 16, kLabHeader = 8;
  detail::check_payload(img, kImgHeader, n_img * rows * cols, images_path);
  detail::check_payload(lab, kLabHeader, n_lab, labels_path);

  Dataset ds;
  ds.dim = rows * cols;
  ds.images.resize(n_img * ds.dim);
  for (std::size_t j = 0; j < ds.images.size(); ++j) {
    ds.images[j] = static_cast<double>(img[kImgHeader + j]) / 255.0;
  }
  ds.labels.resize(n_lab);
  for (std::size_t j = 0; j < n_lab; ++j) {
    const int label = lab[kLabHeader + j];
    if (static_cast<std::size_t>(label) >= classes) {
      throw IngestionError(labels_path + ": label " + std::to_string(label) + " at offset " +
                           std::to_string(kLabHeader + j) + " is not below " +
                           std::to_string(classes));
    }
    ds.labels[j] = label;
  }
  return ds;
}

// Class-conditional Gaussian clusters, clipped to [0,1]. Each class gets a
// sparse prototype (about 15% of pixels lit); samples add N(0, 0.25^2) noise.
// Sample i has label i % classes, so labels are balanced when classes | n.
inline Dataset synthetic_dataset(RngStream& rng, std::size_t n, std::size_t classes = kMnistClasses,
                                 std::size_t dim = kMnistPixels) {
  if (classes == 0 || n < classes) {
    throw ConfigError("synthetic_dataset: need n >= classes (n=" + std::to_string(n) +
                      ", classes=" + std::to_string(classes) + ")");
  }
  constexpr double kLitFraction = 0.15, kNoise = 0.25;

  std::vector<double> prototypes(classes * dim, 0.0);
  for (double& p : prototypes) {
    const double u = rng.next_uniform();
    const double level = rng.next_uniform();
    p = u < kLitFraction ? 0.6 + 0.4 * level : 0.0;
  }

  Dataset ds;
  ds.dim = dim;
  ds.images.resize(n * dim);
  ds.labels.resize(n);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) {
      // Box-Muller, one normal per pair of draws; 1 - u keeps the log finite.
      const double u1 = 1.0 - rng.next_uniform();
      const double u2 = rng.next_uniform();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
      const double v = prototypes[c * dim + j] + kNoise * z;
      ds.images[i * dim + j] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
  }
  return ds;
}

// Draws minibatches i.i.d. uniform with replacement. Each batch consumes
// exactly mu draws from the stream.
class Sampler {
 public:
  Sampler(const Dataset& data, RngStream rng, std::size_t mu)
      : data_(&data), rng_(std::move(rng)), mu_(mu) {
    if (mu_ == 0) throw ConfigError("sampler: mu must be ≥ 1");
    if (data_->size() == 0) throw ConfigError("sampler: empty dataset");
    if (mu_ > data_->size()) {
      throw ConfigError("sampler: mu (" + std::to_string(mu_) + ") exceeds dataset size (" +
                        std::to_string(data_->size()) + ")");
    }
  }

  std::vector<std::size_t> next_indices() {
    std::vector<std::size_t> idx(mu_);
    const auto n = data_->size();
    for (auto& i : idx) {
      i = static_cast<std::size_t>(rng_.next_uniform() * static_cast<double>(n));
      if (i >= n) i = n - 1;
    }
    return idx;
  }

  Minibatch next_batch() {
    const auto idx = next_indices();
    return data_->gather(idx);
  }

  std::size_t mu() const noexcept { return mu_; }
  const RngStream& rng() const noexcept { return rng_; }
  const Dataset& data() const noexcept { return *data_; }

 private:
  const Dataset* data_;
  RngStream rng_;
  std::size_t mu_;
};

}  // namespace fasgd
