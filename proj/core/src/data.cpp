#include "advw/data.hpp"

#include <algorithm>
#include <fstream>

#include "advw/rng.hpp"

namespace advw {

std::vector<int> LabeledDataset::item_shape() const {
  std::vector<int> s(images.shape().begin() + 1, images.shape().end());
  return s;
}

Tensor LabeledDataset::item(int index) const {
  const int one[] = {index};
  Tensor t = gather(one);
  return t.reshaped(item_shape());
}

Tensor LabeledDataset::gather(std::span<const int> indices) const {
  const std::size_t stride = item_elements();
  std::vector<int> shape = images.shape();
  shape[0] = static_cast<int>(indices.size());
  Tensor out = Tensor::zeros(std::move(shape));
  auto src = images.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= size()) {
      throw std::invalid_argument("gather: index " + std::to_string(idx) + " out of range [0, " +
                                  std::to_string(size()) + ")");
    }
    std::copy_n(src.begin() + static_cast<std::size_t>(idx) * stride, stride,
                dst.begin() + i * stride);
  }
  return out;
}

void validate_dataset(const LabeledDataset& ds) {
  if (ds.images.rank() != 4) {
    throw std::invalid_argument("dataset: images must be [N x C x H x W], got " +
                                Tensor::shape_string(ds.images.shape()));
  }
  if (static_cast<int>(ds.labels.size()) != ds.size()) {
    throw std::invalid_argument("dataset: " + std::to_string(ds.labels.size()) + " labels for " +
                                std::to_string(ds.size()) + " images");
  }
  if (ds.class_count < 2) throw std::invalid_argument("dataset: class count must be at least 2");
  for (int label : ds.labels) {
    if (label < 0 || label >= ds.class_count) {
      throw std::invalid_argument("dataset: label " + std::to_string(label) + " out of range [0, " +
                                  std::to_string(ds.class_count) + ")");
    }
  }
  for (double v : ds.images.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("dataset: pixel " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (int i = n - 1; i >= 1; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

namespace {

LabeledDataset take(const LabeledDataset& ds, std::span<const int> indices, const std::string& suffix) {
  LabeledDataset out;
  out.class_count = ds.class_count;
  out.name = ds.name + "/" + suffix;
  out.labels.reserve(indices.size());
  for (int idx : indices) out.labels.push_back(ds.labels[static_cast<std::size_t>(idx)]);
  out.images = indices.empty() ? Tensor() : ds.gather(indices);
  return out;
}

}  // namespace

Splits split(const LabeledDataset& ds, const SplitSpec& spec) {
  if (spec.train_count < 0 || spec.val_count < 0 || spec.test_count < 0) {
    throw std::invalid_argument("split: negative count");
  }
  const long long total = static_cast<long long>(spec.train_count) + spec.val_count + spec.test_count;
  if (total > ds.size()) {
    throw std::invalid_argument("split: counts " + std::to_string(total) + " exceed dataset size " +
                                std::to_string(ds.size()));
  }
  const std::vector<int> order = shuffled_indices(ds.size(), spec.shuffle_seed);
  std::span<const int> all(order);
  Splits out;
  out.train = take(ds, all.subspan(0, static_cast<std::size_t>(spec.train_count)), "train");
  out.val = take(ds, all.subspan(static_cast<std::size_t>(spec.train_count),
                                 static_cast<std::size_t>(spec.val_count)),
                 "val");
  out.test = take(ds, all.subspan(static_cast<std::size_t>(spec.train_count + spec.val_count),
                                  static_cast<std::size_t>(spec.test_count)),
                  "test");
  return out;
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& context) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IdxError(IdxError::Kind::kTruncated, "idx: truncated file while reading " + context);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IdxError(IdxError::Kind::kTruncated, "idx: cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IdxError(IdxError::Kind::kTruncated, "idx: cannot open " + labels_path.string());

  const std::uint32_t img_magic = read_u32_be(img, "image magic");
  if (img_magic != 0x00000803u) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "idx: bad image magic 0x" + std::to_string(img_magic) + " in " + images_path.string());
  }
  const std::uint32_t lab_magic = read_u32_be(lab, "label magic");
  if (lab_magic != 0x00000801u) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   "idx: bad label magic 0x" + std::to_string(lab_magic) + " in " + labels_path.string());
  }

  const std::uint32_t image_count = read_u32_be(img, "image count");
  const std::uint32_t rows = read_u32_be(img, "row count");
  const std::uint32_t cols = read_u32_be(img, "column count");
  const std::uint32_t label_count = read_u32_be(lab, "label count");
  if (image_count != label_count) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "idx: " + std::to_string(image_count) + " images but " +
                       std::to_string(label_count) + " labels");
  }

  const std::size_t pixel_count = static_cast<std::size_t>(image_count) * rows * cols;
  std::vector<unsigned char> pixels(pixel_count);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixel_count))) {
    throw IdxError(IdxError::Kind::kTruncated, "idx: truncated pixel data in " + images_path.string());
  }
  std::vector<unsigned char> raw_labels(image_count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(image_count))) {
    throw IdxError(IdxError::Kind::kTruncated, "idx: truncated label data in " + labels_path.string());
  }

  LabeledDataset ds;
  ds.name = images_path.filename().string();
  std::vector<double> data(pixel_count);
  for (std::size_t i = 0; i < pixel_count; ++i) data[i] = pixels[i] / 255.0;
  ds.images = Tensor({static_cast<int>(image_count), 1, static_cast<int>(rows), static_cast<int>(cols)},
                     std::move(data));
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = 0;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.class_count = max_label + 1;
  return ds;
}

Tensor synthetic_base_patterns(int classes, int side, std::uint64_t seed) {
  // Stream 0 of the seed is reserved for patterns, stream 1 for noise, so
  // patterns can be recomputed without generating the images.
  Rng rng(mix_seed(seed, 0));
  Tensor patterns = Tensor::zeros({classes, 1, side, side});
  for (double& v : patterns.data()) {
    v = 0.5 + (rng.uniform01() < 0.5 ? -kSyntheticSignal : kSyntheticSignal);
  }
  return patterns;
}

LabeledDataset generate_synthetic(int classes, int per_class, int side, std::uint64_t seed) {
  if (classes < 6) {
    throw std::invalid_argument("generate_synthetic: needs at least 6 classes, got " +
                                std::to_string(classes));
  }
  if (side < 8) {
    throw std::invalid_argument("generate_synthetic: side must be at least 8, got " +
                                std::to_string(side));
  }
  if (per_class < 1) throw std::invalid_argument("generate_synthetic: per_class must be positive");

  const Tensor patterns = synthetic_base_patterns(classes, side, seed);
  const std::size_t item = static_cast<std::size_t>(side) * side;
  Rng noise(mix_seed(seed, 1));

  LabeledDataset ds;
  ds.class_count = classes;
  ds.name = "synthetic(classes=" + std::to_string(classes) + ",per_class=" + std::to_string(per_class) +
            ",side=" + std::to_string(side) + ",seed=" + std::to_string(seed) + ")";
  ds.images = Tensor::zeros({classes * per_class, 1, side, side});
  ds.labels.resize(static_cast<std::size_t>(classes) * per_class);
  auto dst = ds.images.data();
  auto pat = patterns.data();
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const std::size_t row = static_cast<std::size_t>(c) * per_class + i;
      ds.labels[row] = c;
      for (std::size_t p = 0; p < item; ++p) {
        const double v = pat[static_cast<std::size_t>(c) * item + p] +
                         noise.uniform(-kSyntheticNoise, kSyntheticNoise);
        dst[row * item + p] = clamp01(v);
      }
    }
  }
  return ds;
}

}  // namespace advw
