#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "laprop/errors.hpp"
#include "laprop/mlp.hpp"
#include "laprop/rng.hpp"

namespace laprop {

/// In-memory classification dataset, either synthetic or read from IDX files.
struct DatasetHandle {
  std::size_t rows = 0;
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::vector<double> inputs;  // rows x input_dim, row-major
  std::vector<int> labels;
  std::string source;         // "synthetic" | "mnist-idx"
  std::string normalization;  // e.g. "pixels/255"

  Batch batch_of(const std::vector<std::size_t>& indices) const {
    Batch b;
    b.rows = indices.size();
    b.input_dim = input_dim;
    b.inputs.resize(b.rows * input_dim);
    b.labels.resize(b.rows);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const std::size_t i = indices[r];
      std::copy_n(inputs.data() + i * input_dim, input_dim,
                  b.inputs.data() + r * input_dim);
      b.labels[r] = labels[i];
    }
    return b;
  }
};

/// Gaussian class-centroid blobs: centroid coordinates are standard normal,
/// points are centroid + spread * N(0, I). Labels are assigned round-robin so
/// class counts differ by at most one. Separable by a wide margin at the
/// default spread.
inline DatasetHandle synth_classification(std::size_t n, std::size_t input_dim,
                                          std::size_t classes, std::uint64_t seed,
                                          double spread = 0.15) {
  if (classes < 1 || input_dim < 1)
    throw std::invalid_argument("synth_classification: classes and input_dim must be >= 1");
  if (n < classes)
    throw std::invalid_argument("synth_classification: need n >= classes");
  Rng rng(seed);
  std::vector<double> centroids(classes * input_dim);
  for (double& c : centroids) c = rng.normal();
  DatasetHandle d;
  d.rows = n;
  d.input_dim = input_dim;
  d.classes = classes;
  d.inputs.resize(n * input_dim);
  d.labels.resize(n);
  d.source = "synthetic";
  d.normalization = "none";
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = static_cast<int>(c);
    const double* mu = centroids.data() + c * input_dim;
    double* x = d.inputs.data() + i * input_dim;
    for (std::size_t j = 0; j < input_dim; ++j) x[j] = mu[j] + spread * rng.normal();
  }
  return d;
}

namespace detail {

inline std::uint32_t read_be32(std::ifstream& in, const std::string& path,
                               std::size_t offset, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4)
    throw FormatError(path + ": truncated " + what + " at byte offset " +
                      std::to_string(offset));
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

/// Read an IDX image/label file pair. Pixels are scaled to [0, 1]. `limit`
/// caps the number of examples kept; 0 means no limit.
inline DatasetHandle load_mnist_idx(const std::string& images_path,
                                    const std::string& labels_path,
                                    std::size_t limit = 0) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open");
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open");

  const std::uint32_t img_magic = detail::read_be32(img, images_path, 0, "magic");
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad magic at byte offset 0 (expected 0x00000803)");
  const std::uint32_t img_count = detail::read_be32(img, images_path, 4, "count");
  const std::uint32_t rows = detail::read_be32(img, images_path, 8, "row count");
  const std::uint32_t cols = detail::read_be32(img, images_path, 12, "column count");

  const std::uint32_t lab_magic = detail::read_be32(lab, labels_path, 0, "magic");
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad magic at byte offset 0 (expected 0x00000801)");
  const std::uint32_t lab_count = detail::read_be32(lab, labels_path, 4, "count");

  if (img_count != lab_count)
    throw FormatError("image count " + std::to_string(img_count) +
                      " does not match label count " + std::to_string(lab_count));

  std::size_t keep = img_count;
  if (limit != 0 && limit < keep) keep = limit;
  const std::size_t pixels = std::size_t(rows) * cols;

  std::vector<unsigned char> raw(keep * pixels);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(img.gcount()) != raw.size())
    throw FormatError(images_path + ": truncated image payload at byte offset 16 (expected " +
                      std::to_string(raw.size()) + " bytes, got " +
                      std::to_string(img.gcount()) + ")");

  std::vector<unsigned char> raw_labels(keep);
  lab.read(reinterpret_cast<char*>(raw_labels.data()),
           static_cast<std::streamsize>(raw_labels.size()));
  if (static_cast<std::size_t>(lab.gcount()) != raw_labels.size())
    throw FormatError(labels_path + ": truncated label payload at byte offset 8 (expected " +
                      std::to_string(raw_labels.size()) + " bytes, got " +
                      std::to_string(lab.gcount()) + ")");

  DatasetHandle d;
  d.rows = keep;
  d.input_dim = pixels;
  d.inputs.resize(keep * pixels);
  d.labels.resize(keep);
  d.source = "mnist-idx";
  d.normalization = "pixels/255";
  for (std::size_t i = 0; i < raw.size(); ++i)
    d.inputs[i] = static_cast<double>(raw[i]) / 255.0;
  int max_label = 0;
  for (std::size_t i = 0; i < keep; ++i) {
    d.labels[i] = static_cast<int>(raw_labels[i]);
    max_label = std::max(max_label, d.labels[i]);
  }
  d.classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

}  // namespace laprop
