#include "jarn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "jarn/errors.hpp"

namespace jarn::data {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw PreconditionError("idx: truncated header in " + path);
  }
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_be32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

DatasetHandle load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("idx: cannot open images file: " + images_path);
  const uint32_t imagic = read_be32(imgs, images_path);
  if (imagic != kImagesMagic) {
    throw PreconditionError("idx: bad magic number in images file " + images_path +
                            " (expected 0x00000803)");
  }
  const uint32_t icount = read_be32(imgs, images_path);
  const uint32_t rows = read_be32(imgs, images_path);
  const uint32_t cols = read_be32(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("idx: cannot open labels file: " + labels_path);
  const uint32_t lmagic = read_be32(labs, labels_path);
  if (lmagic != kLabelsMagic) {
    throw PreconditionError("idx: bad magic number in labels file " + labels_path +
                            " (expected 0x00000801)");
  }
  const uint32_t lcount = read_be32(labs, labels_path);
  if (icount != lcount) {
    throw PreconditionError("idx: count mismatch: " + std::to_string(icount) + " images in " +
                            images_path + " vs " + std::to_string(lcount) + " labels in " +
                            labels_path);
  }

  DatasetHandle ds;
  ds.source = Source::kMnistIdx;
  ds.count = icount;
  ds.h = rows;
  ds.w = cols;
  ds.c = 1;
  ds.num_classes = 10;
  ds.byte_pixels.resize(static_cast<size_t>(icount) * rows * cols);
  if (!imgs.read(reinterpret_cast<char*>(ds.byte_pixels.data()),
                 static_cast<std::streamsize>(ds.byte_pixels.size()))) {
    throw PreconditionError("idx: truncated pixel payload in " + images_path);
  }
  ds.labels.resize(icount);
  if (!labs.read(reinterpret_cast<char*>(ds.labels.data()),
                 static_cast<std::streamsize>(ds.labels.size()))) {
    throw PreconditionError("idx: truncated label payload in " + labels_path);
  }
  for (uint8_t l : ds.labels) {
    if (l > 9) throw PreconditionError("idx: label byte out of range in " + labels_path);
  }
  return ds;
}

void write_idx(const DatasetHandle& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.byte_pixels.empty()) {
    throw PreconditionError("idx: dataset has no byte pixels to write");
  }
  std::ofstream imgs(images_path, std::ios::binary | std::ios::trunc);
  if (!imgs) throw IoError("idx: cannot open for writing: " + images_path);
  write_be32(imgs, kImagesMagic);
  write_be32(imgs, static_cast<uint32_t>(ds.count));
  write_be32(imgs, static_cast<uint32_t>(ds.h));
  write_be32(imgs, static_cast<uint32_t>(ds.w));
  imgs.write(reinterpret_cast<const char*>(ds.byte_pixels.data()),
             static_cast<std::streamsize>(ds.byte_pixels.size()));
  if (!imgs.flush()) throw IoError("idx: write failed: " + images_path);

  std::ofstream labs(labels_path, std::ios::binary | std::ios::trunc);
  if (!labs) throw IoError("idx: cannot open for writing: " + labels_path);
  write_be32(labs, kLabelsMagic);
  write_be32(labs, static_cast<uint32_t>(ds.count));
  labs.write(reinterpret_cast<const char*>(ds.labels.data()),
             static_cast<std::streamsize>(ds.labels.size()));
  if (!labs.flush()) throw IoError("idx: write failed: " + labels_path);
}

DatasetHandle synthetic_dataset(int64_t num_classes, int64_t image_size,
                                int64_t samples_per_class, uint64_t seed) {
  if (image_size < 4) throw PreconditionError("synthetic: image size must be >= 4");
  if (num_classes < 2) throw PreconditionError("synthetic: need at least 2 classes");
  DatasetHandle ds;
  ds.source = Source::kSynthetic;
  ds.split = "train";
  ds.count = num_classes * samples_per_class;
  ds.h = image_size;
  ds.w = image_size;
  ds.c = 1;
  ds.num_classes = num_classes;
  ds.shuffle_seed = seed;
  ds.real_pixels.resize(static_cast<size_t>(ds.count * image_size * image_size));
  ds.labels.resize(static_cast<size_t>(ds.count));
  Rng rng(seed_for(seed, "synthetic-dataset"));

  const double mid = (static_cast<double>(image_size) - 1.0) / 2.0;
  const double ring = static_cast<double>(image_size) / 3.0;
  const double sigma = static_cast<double>(image_size) / 6.0;
  int64_t idx = 0;
  for (int64_t k = 0; k < num_classes; ++k) {
    const double angle = 6.283185307179586 * static_cast<double>(k) / static_cast<double>(num_classes);
    const double cy = mid + ring * std::sin(angle);
    const double cx = mid + ring * std::cos(angle);
    for (int64_t s = 0; s < samples_per_class; ++s, ++idx) {
      const double jx = cx + 0.5 * rng.normal();
      const double jy = cy + 0.5 * rng.normal();
      double* img = ds.real_pixels.data() + idx * image_size * image_size;
      for (int64_t y = 0; y < image_size; ++y) {
        for (int64_t x = 0; x < image_size; ++x) {
          const double d2 = (x - jx) * (x - jx) + (y - jy) * (y - jy);
          double v = std::exp(-d2 / (2.0 * sigma * sigma)) + 0.02 * rng.uniform01();
          img[y * image_size + x] = std::clamp(v, 0.0, 1.0);
        }
      }
      ds.labels[static_cast<size_t>(idx)] = static_cast<uint8_t>(k);
    }
  }
  return ds;
}

namespace {

// 5x7 digit bitmaps, row-major top to bottom.
constexpr const char* kGlyphs[10][7] = {
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}};

// Bilinear sample of a glyph bitmap at continuous coordinates, cells centered
// on the integer lattice.
double glyph_sample(int digit, double u, double v) {
  auto bit = [digit](int i, int j) -> double {
    if (i < 0 || i >= 5 || j < 0 || j >= 7) return 0.0;
    return kGlyphs[digit][j][i] == '1' ? 1.0 : 0.0;
  };
  const double fu = std::floor(u), fv = std::floor(v);
  const int i0 = static_cast<int>(fu), j0 = static_cast<int>(fv);
  const double du = u - fu, dv = v - fv;
  return bit(i0, j0) * (1 - du) * (1 - dv) + bit(i0 + 1, j0) * du * (1 - dv) +
         bit(i0, j0 + 1) * (1 - du) * dv + bit(i0 + 1, j0 + 1) * du * dv;
}

}  // namespace

DatasetHandle glyph_digits_dataset(int64_t samples_per_class, uint64_t seed,
                                   const std::string& split) {
  DatasetHandle ds;
  ds.source = Source::kSynthetic;
  ds.split = split;
  ds.count = 10 * samples_per_class;
  ds.h = 28;
  ds.w = 28;
  ds.c = 1;
  ds.num_classes = 10;
  ds.shuffle_seed = seed;
  ds.byte_pixels.resize(static_cast<size_t>(ds.count) * 28 * 28);
  ds.labels.resize(static_cast<size_t>(ds.count));
  Rng rng(seed_for(seed, "glyph-digits-" + split));

  int64_t idx = 0;
  for (int64_t digit = 0; digit < 10; ++digit) {
    for (int64_t s = 0; s < samples_per_class; ++s, ++idx) {
      const double scale = rng.uniform(0.82, 1.18);
      const double rot = rng.uniform(-0.18, 0.18);
      const double shear = rng.uniform(-0.15, 0.15);
      const double dx = rng.uniform(-2.5, 2.5);
      const double dy = rng.uniform(-2.5, 2.5);
      const double stroke = rng.uniform(0.72, 1.0);
      const double bg = rng.uniform(0.0, 0.06);
      // cells-per-pixel at neutral scale: glyph spans ~16x22 of the 28x28 box
      const double cell = 3.1 * scale;
      const double cr = std::cos(rot), sr = std::sin(rot);
      uint8_t* img = ds.byte_pixels.data() + idx * 28 * 28;
      for (int py = 0; py < 28; ++py) {
        for (int px = 0; px < 28; ++px) {
          // inverse affine from canvas to glyph space
          const double xs = (px - 13.5 - dx);
          const double ys = (py - 13.5 - dy);
          const double xr = cr * xs + sr * ys + shear * ys;
          const double yr = -sr * xs + cr * ys;
          const double u = 2.0 + xr / cell;
          const double v = 3.0 + yr / cell;
          double val = stroke * glyph_sample(static_cast<int>(digit), u, v);
          val += bg * rng.uniform01();
          const double clipped = std::clamp(val, 0.0, 1.0);
          img[py * 28 + px] = static_cast<uint8_t>(std::lround(clipped * 255.0));
        }
      }
      ds.labels[static_cast<size_t>(idx)] = static_cast<uint8_t>(digit);
    }
  }
  return ds;
}

DatasetHandle subset(const DatasetHandle& ds, int64_t count, uint64_t seed) {
  if (count < 1 || count > ds.count) {
    throw PreconditionError("subset: requested " + std::to_string(count) + " of " +
                            std::to_string(ds.count) + " samples");
  }
  std::vector<int64_t> order(static_cast<size_t>(ds.count));
  for (int64_t i = 0; i < ds.count; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(seed_for(seed, "subset"));
  for (int64_t i = ds.count - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  DatasetHandle out;
  out.source = ds.source;
  out.split = ds.split;
  out.count = count;
  out.h = ds.h;
  out.w = ds.w;
  out.c = ds.c;
  out.num_classes = ds.num_classes;
  out.shuffle_seed = ds.shuffle_seed;
  const int64_t px = ds.h * ds.w * ds.c;
  const bool bytes = !ds.byte_pixels.empty();
  if (bytes) {
    out.byte_pixels.resize(static_cast<size_t>(count * px));
  } else {
    out.real_pixels.resize(static_cast<size_t>(count * px));
  }
  out.labels.resize(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    const int64_t src = order[static_cast<size_t>(i)];
    if (bytes) {
      std::memcpy(out.byte_pixels.data() + i * px, ds.byte_pixels.data() + src * px,
                  static_cast<size_t>(px));
    } else {
      std::memcpy(out.real_pixels.data() + i * px, ds.real_pixels.data() + src * px,
                  static_cast<size_t>(px) * sizeof(double));
    }
    out.labels[static_cast<size_t>(i)] = ds.labels[static_cast<size_t>(src)];
  }
  return out;
}

std::vector<int64_t> epoch_permutation(const DatasetHandle& ds, int64_t epoch) {
  std::vector<int64_t> order(static_cast<size_t>(ds.count));
  for (int64_t i = 0; i < ds.count; ++i) order[static_cast<size_t>(i)] = i;
  uint64_t mix = ds.shuffle_seed;
  mix ^= 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(epoch);
  Rng rng(seed_for(mix, "epoch-permutation"));
  for (int64_t i = ds.count - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  return order;
}

ImageBatch make_batch(const DatasetHandle& ds, const std::vector<int64_t>& indices,
                      int64_t offset, int64_t batch_size) {
  const int64_t n = std::min<int64_t>(batch_size, static_cast<int64_t>(indices.size()) - offset);
  if (n <= 0) throw PreconditionError("make_batch: empty index range");
  const int64_t px = ds.h * ds.w * ds.c;
  std::vector<double> images(static_cast<size_t>(n * px));
  std::vector<double> labels(static_cast<size_t>(n * ds.num_classes), 0.0);
  const bool bytes = !ds.byte_pixels.empty();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t src = indices[static_cast<size_t>(offset + i)];
    if (bytes) {
      const uint8_t* sp = ds.byte_pixels.data() + src * px;
      double* dp = images.data() + i * px;
      for (int64_t j = 0; j < px; ++j) dp[j] = static_cast<double>(sp[j]) / 255.0;
    } else {
      std::memcpy(images.data() + i * px, ds.real_pixels.data() + src * px,
                  static_cast<size_t>(px) * sizeof(double));
    }
    labels[static_cast<size_t>(i * ds.num_classes + ds.labels[static_cast<size_t>(src)])] = 1.0;
  }
  ImageBatch b;
  b.images = Tensor(Shape{n, ds.h, ds.w, ds.c}, std::move(images));
  b.labels = Tensor(Shape{n, ds.num_classes}, std::move(labels));
  return b;
}

ImageBatch full_batch(const DatasetHandle& ds, int64_t limit) {
  if (ds.count == 0) throw PreconditionError("dataset is empty");
  const int64_t n = limit < 0 ? ds.count : std::min(limit, ds.count);
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return make_batch(ds, idx, 0, n);
}

ImageBatch uniform_noise_augment(const ImageBatch& batch, double eps, Rng& rng) {
  if (eps < 0.0) throw PreconditionError("uniform-noise: eps must be >= 0");
  if (eps == 0.0) return batch;
  const auto& src = batch.images.values();
  std::vector<double> out(src.size());
  for (size_t i = 0; i < src.size(); ++i) {
    out[i] = std::clamp(src[i] + rng.uniform(-eps, eps), 0.0, 1.0);
  }
  ImageBatch noised;
  noised.images = Tensor(batch.images.shape(), std::move(out));
  noised.labels = batch.labels;
  return noised;
}

int label_of(const ImageBatch& batch, int64_t i) {
  const int64_t k = batch.labels.shape()[1];
  const auto& v = batch.labels.values();
  for (int64_t j = 0; j < k; ++j) {
    if (v[static_cast<size_t>(i * k + j)] == 1.0) return static_cast<int>(j);
  }
  throw PreconditionError("label_of: row " + std::to_string(i) + " is not one-hot");
}

}  // namespace jarn::data
