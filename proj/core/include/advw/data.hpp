#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advw/tensor.hpp"

namespace advw {

// Images are [N, C, H, W] with every pixel in [0, 1] (the box the attacks
// project onto) and labels[i] in [0, class_count). Immutable once built.
struct LabeledDataset {
  Tensor images;
  std::vector<int> labels;
  int class_count = 0;
  std::string name;

  int size() const { return images.rank() == 0 ? 0 : images.dim(0); }
  std::size_t item_elements() const { return images.size() / static_cast<std::size_t>(size()); }
  std::vector<int> item_shape() const;
  Tensor item(int index) const;
  Tensor gather(std::span<const int> indices) const;
};

// Validates the dataset invariants (pixel range, label range, counts).
void validate_dataset(const LabeledDataset& ds);

struct SplitSpec {
  int train_count = 0;
  int val_count = 0;
  int test_count = 0;
  std::uint64_t shuffle_seed = 0;
};

struct Splits {
  LabeledDataset train, val, test;
};

// Disjoint splits drawn from a Fisher-Yates shuffle (highest index down,
// swap with rng.below(i + 1)) of indices seeded with spec.shuffle_seed.
Splits split(const LabeledDataset& ds, const SplitSpec& spec);

// The permutation used by split(), exposed for reproducibility checks.
std::vector<int> shuffled_indices(int n, std::uint64_t seed);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kCountMismatch, kTruncated };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Loads an IDX image/label file pair (big-endian magics 0x00000803 and
// 0x00000801). Pixels are divided by 255 into [0, 1]; the class count is
// inferred as max label + 1.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// Deterministic synthetic classification set: class c's images are its base
// pattern plus uniform noise of amplitude 0.1, clamped to [0, 1]. Requires
// classes >= 6 (so top-5 error is nondegenerate) and side >= 8.
LabeledDataset generate_synthetic(int classes, int per_class, int side, std::uint64_t seed);

// The base patterns behind generate_synthetic, shape [classes, 1, side, side].
// Pattern pixels are 0.5 +/- kSyntheticSignal with seeded random signs.
Tensor synthetic_base_patterns(int classes, int side, std::uint64_t seed);

// Per-pixel class signature amplitude of the synthetic set. Small relative
// to the pixel range so that percent-scale perturbation budgets are
// meaningful against trained models.
inline constexpr double kSyntheticSignal = 0.04;
inline constexpr double kSyntheticNoise = 0.1;

}  // namespace advw
