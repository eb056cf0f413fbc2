#pragma once

#include <string>
#include <vector>

#include "jarn/rng.hpp"
#include "jarn/tensor.hpp"

namespace jarn::data {

// One batch of images in [0,1] (shape [n,h,w,c]) with one-hot labels [n,k].
struct ImageBatch {
  Tensor images;
  Tensor labels;

  int64_t count() const { return images.defined() ? images.shape()[0] : 0; }
};

enum class Source : uint8_t { kMnistIdx, kSynthetic };

// Read-only after load; iteration order is a pure function of (seed, epoch).
struct DatasetHandle {
  Source source = Source::kSynthetic;
  std::string split;
  int64_t count = 0;
  int64_t h = 0, w = 0, c = 1;
  int64_t num_classes = 10;
  // Pixel storage: IDX files keep the raw bytes (scaled to [0,1] at batch
  // assembly); generated sets keep doubles.
  std::vector<uint8_t> byte_pixels;
  std::vector<double> real_pixels;
  std::vector<uint8_t> labels;
  uint64_t shuffle_seed = 0;
};

// Parses the IDX pair bit-exactly: images magic 0x00000803 then count/rows/
// cols (big-endian u32) and row-major bytes; labels magic 0x00000801. Bad
// magic, truncated payloads, and image/label count mismatches are rejected
// with distinct messages.
DatasetHandle load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Writes a handle back out as an IDX pair (byte pixels required).
void write_idx(const DatasetHandle& ds, const std::string& images_path,
               const std::string& labels_path);

// Class-conditional Gaussian blobs, linearly separable by construction.
DatasetHandle synthetic_dataset(int64_t num_classes, int64_t image_size,
                                int64_t samples_per_class, uint64_t seed);

// Harder 10-class surrogate corpus: 28x28 digit glyphs rendered from a pixel
// font with per-sample shift/scale/shear jitter, stroke-intensity variation,
// and background noise. Byte pixels, so it can round-trip through IDX files.
DatasetHandle glyph_digits_dataset(int64_t samples_per_class, uint64_t seed,
                                   const std::string& split);

// First `count` entries of a seeded permutation, as a new handle.
DatasetHandle subset(const DatasetHandle& ds, int64_t count, uint64_t seed);

// Deterministic epoch order: fixed permutation per (shuffle_seed, epoch),
// distinct epochs reshuffle.
std::vector<int64_t> epoch_permutation(const DatasetHandle& ds, int64_t epoch);

ImageBatch make_batch(const DatasetHandle& ds, const std::vector<int64_t>& indices,
                      int64_t offset, int64_t batch_size);
// The whole set (or its first `limit` samples) as one batch.
ImageBatch full_batch(const DatasetHandle& ds, int64_t limit = -1);

// x <- clip(x + xi, 0, 1) with xi iid uniform on [-eps, eps]; labels
// unchanged. eps == 0 returns the batch untouched.
ImageBatch uniform_noise_augment(const ImageBatch& batch, double eps, Rng& rng);

int label_of(const ImageBatch& batch, int64_t i);

}  // namespace jarn::data
