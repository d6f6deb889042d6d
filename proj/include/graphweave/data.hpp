#pragma once

// Dataset container plus the three loaders: synthetic generators, IDX image
// files, and labeled CSV.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graphweave/errors.hpp"
#include "graphweave/rng.hpp"
#include "graphweave/tensor.hpp"

namespace gw {

// Row-major feature matrix with integer class labels.
struct Dataset {
  int num_features = 0;
  int num_classes = 0;
  std::vector<float> features;  // size() * num_features
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  const float* row(std::size_t i) const { return features.data() + i * num_features; }

  Tensor features_tensor() const {
    Tensor t({static_cast<int>(size()), num_features});
    t.data = features;
    return t;
  }

  // Gathers the given rows into a (batch x num_features) tensor.
  Tensor batch_features(const std::vector<int>& rows) const {
    Tensor t({static_cast<int>(rows.size()), num_features});
    for (std::size_t b = 0; b < rows.size(); ++b)
      std::copy_n(row(static_cast<std::size_t>(rows[b])), num_features,
                  t.data.begin() + static_cast<std::ptrdiff_t>(b) * num_features);
    return t;
  }

  std::vector<int> batch_labels(const std::vector<int>& rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const int r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
    return out;
  }
};

enum class SyntheticKind { Xor, Blobs };

inline SyntheticKind synthetic_kind_from_name(const std::string& name) {
  if (name == "xor") return SyntheticKind::Xor;
  if (name == "blobs") return SyntheticKind::Blobs;
  throw SpecError("unknown synthetic dataset '" + name + "' (expected xor or blobs)");
}

// Deterministic synthetic classification sets. xor: the four corner points of
// {0,1}^2 with parity labels plus Gaussian noise (default sigma 0.1). blobs:
// three Gaussian clusters with round-robin labels (default sigma 0.5).
// noise_sigma < 0 selects the per-kind default.
inline Dataset synthesize(SyntheticKind kind, int n, std::uint64_t seed,
                          double noise_sigma = -1.0) {
  if (n < 4) throw SpecError("synthetic datasets need n >= 4, got " + std::to_string(n));

  Rng rng(seed);
  Dataset ds;
  ds.num_features = 2;
  ds.features.reserve(static_cast<std::size_t>(n) * 2);
  ds.labels.reserve(static_cast<std::size_t>(n));

  if (kind == SyntheticKind::Xor) {
    const double sigma = noise_sigma < 0 ? 0.1 : noise_sigma;
    static constexpr double corners[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    static constexpr int parity[4] = {0, 1, 1, 0};
    ds.num_classes = 2;
    for (int i = 0; i < n; ++i) {
      const int c = i % 4;
      ds.features.push_back(static_cast<float>(corners[c][0] + sigma * rng.normal()));
      ds.features.push_back(static_cast<float>(corners[c][1] + sigma * rng.normal()));
      ds.labels.push_back(parity[c]);
    }
  } else {
    const double sigma = noise_sigma < 0 ? 0.5 : noise_sigma;
    static constexpr double centers[3][2] = {{0, 0}, {3, 0}, {0, 3}};
    ds.num_classes = 3;
    for (int i = 0; i < n; ++i) {
      const int c = i % 3;
      ds.features.push_back(static_cast<float>(centers[c][0] + sigma * rng.normal()));
      ds.features.push_back(static_cast<float>(centers[c][1] + sigma * rng.normal()));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw TruncationError("unexpected end of file while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace detail

// IDX readers (big-endian headers, unsigned-byte payloads). Images carry
// magic 0x00000803 with dims [count, rows, cols]; labels carry 0x00000801
// with dims [count]. Pixels are scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open " + images_path);
  const std::uint32_t img_magic = detail::read_u32_be(img, "image magic");
  if (img_magic != 0x00000803u)
    throw MagicError("bad image magic " + detail::hex32(img_magic) + " in " + images_path +
                     " (expected 0x00000803)");
  const std::uint32_t count = detail::read_u32_be(img, "image count");
  const std::uint32_t rows = detail::read_u32_be(img, "image rows");
  const std::uint32_t cols = detail::read_u32_be(img, "image cols");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open " + labels_path);
  const std::uint32_t lab_magic = detail::read_u32_be(lab, "label magic");
  if (lab_magic != 0x00000801u)
    throw MagicError("bad label magic " + detail::hex32(lab_magic) + " in " + labels_path +
                     " (expected 0x00000801)");
  const std::uint32_t lab_count = detail::read_u32_be(lab, "label count");
  if (count != lab_count)
    throw CountMismatchError(std::to_string(count) + " images vs " + std::to_string(lab_count) +
                             " labels");

  Dataset ds;
  ds.num_features = static_cast<int>(rows * cols);

  std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * rows * cols);
  if (!img.read(reinterpret_cast<char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size())))
    throw TruncationError("image payload shorter than header declares in " + images_path);
  std::vector<unsigned char> raw_labels(count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size())))
    throw TruncationError("label payload shorter than header declares in " + labels_path);

  ds.features.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    ds.features[i] = static_cast<float>(pixels[i]) / 255.0f;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = 0;
  for (const int l : ds.labels) max_label = std::max(max_label, l);
  ds.num_classes = max_label + 1;
  return ds;
}

// CSV loader: numeric feature columns plus one integer label column
// (label_col = -1 means the last column). A non-numeric first line is treated
// as a header and skipped.
inline Dataset load_csv(const std::string& path, int label_col = -1) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);

  Dataset ds;
  std::string line;
  bool first = true;
  int columns = -1;
  int max_label = 0;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);

    std::vector<double> values;
    bool numeric = true;
    for (const auto& f : fields) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(f, &used));
        while (used < f.size() && std::isspace(static_cast<unsigned char>(f[used]))) ++used;
        if (used != f.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    first = false;

    if (columns < 0) {
      columns = static_cast<int>(values.size());
      if (columns < 2)
        throw FormatError(path + ": need at least one feature column and a label column");
      ds.num_features = columns - 1;
    } else if (static_cast<int>(values.size()) != columns) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(columns) + " fields, got " +
                        std::to_string(values.size()));
    }

    const int lc = label_col < 0 ? columns - 1 : label_col;
    if (lc >= columns)
      throw FormatError(path + ": label column " + std::to_string(lc) + " out of range");
    const double raw_label = values[static_cast<std::size_t>(lc)];
    const int label = static_cast<int>(raw_label);
    if (label < 0 || static_cast<double>(label) != raw_label)
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": label must be a non-negative integer");
    max_label = std::max(max_label, label);

    for (int c = 0; c < columns; ++c)
      if (c != lc) ds.features.push_back(static_cast<float>(values[static_cast<std::size_t>(c)]));
    ds.labels.push_back(label);
  }

  if (ds.labels.empty()) throw FormatError(path + ": no data rows");
  ds.num_classes = max_label + 1;
  return ds;
}

}  // namespace gw
