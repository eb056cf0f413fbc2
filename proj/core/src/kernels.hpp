#pragma once

#include <cstdint>
#include <vector>

#include "jarn/tensor.hpp"

// Raw numeric kernels behind the recorded ops. All are deterministic,
// single-threaded, and operate on plain row-major buffers.
namespace jarn::kernels {

struct ConvDims {
  int64_t n, h, w, cin;      // input
  int64_t kh, kw, cout;      // kernel
  int64_t stride, pad;
  int64_t oh, ow;            // output
};

// Validates and solves the output geometry: o = floor((s + 2p - k)/stride) + 1.
ConvDims conv_dims(const Shape& x, const Shape& w, int64_t stride, int64_t pad);
int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t pad);

void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y);
void conv2d_input_grad(const ConvDims& d, const double* gy, const double* w, double* gx);
void conv2d_weight_grad(const ConvDims& d, const double* x, const double* gy, double* gw);

void matmul(const double* a, int64_t m, int64_t k, const double* b, int64_t n, double* out);
void transpose(const double* a, int64_t m, int64_t n, double* out);

struct PoolDims {
  int64_t n, h, w, c;
  int64_t window, stride;
  int64_t oh, ow;
};
PoolDims pool_dims(const Shape& x, int64_t window, int64_t stride);
// Forward max pooling; records the flat input index of each selected maximum.
void max_pool2d(const PoolDims& d, const double* x, double* y, int32_t* argmax);
void pool_scatter(const double* g, int64_t pooled_count, const int32_t* argmax, double* out);
void pool_gather(const double* x, int64_t pooled_count, const int32_t* argmax, double* out);

void pad2d(const Shape& xs, const double* x, int64_t top, int64_t bottom, int64_t left,
           int64_t right, double* y);
void crop2d(const Shape& xs, const double* x, int64_t top, int64_t bottom, int64_t left,
            int64_t right, double* y);

}  // namespace jarn::kernels
