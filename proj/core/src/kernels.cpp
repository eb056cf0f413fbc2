#include "kernels.hpp"

#include <Eigen/Core>
#include <cstring>
#include <sstream>

#include "jarn/errors.hpp"

namespace jarn::kernels {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

ConvDims conv_dims(const Shape& x, const Shape& w, int64_t stride, int64_t pad) {
  if (x.size() != 4 || w.size() != 4) {
    throw ShapeError("conv2d: expected NHWC input and [KH,KW,Cin,Cout] kernel, got " +
                     shape_str(x) + " and " + shape_str(w));
  }
  ConvDims d;
  d.n = x[0];
  d.h = x[1];
  d.w = x[2];
  d.cin = x[3];
  d.kh = w[0];
  d.kw = w[1];
  d.cout = w[3];
  d.stride = stride;
  d.pad = pad;
  if (w[2] != d.cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(w[2]) + " input channels, input has " +
                     std::to_string(d.cin) + " (input " + shape_str(x) + ", kernel " + shape_str(w) + ")");
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  d.oh = conv_out_extent(d.h, d.kh, stride, pad);
  d.ow = conv_out_extent(d.w, d.kw, stride, pad);
  if (d.oh < 1 || d.ow < 1) {
    throw ShapeError("conv2d: kernel " + shape_str(w) + " does not fit input " + shape_str(x));
  }
  return d;
}

// cols layout: [N*OH*OW, KH*KW*Cin]; kernel axes fastest-varying last (kh, kw, ci).
static void im2col(const ConvDims& d, const double* x, double* cols) {
  const int64_t patch = d.kh * d.kw * d.cin;
  const int64_t row_stride_in = d.w * d.cin;
  for (int64_t n = 0; n < d.n; ++n) {
    const double* xn = x + n * d.h * row_stride_in;
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        double* dst = cols + ((n * d.oh + oh) * d.ow + ow) * patch;
        for (int64_t kh = 0; kh < d.kh; ++kh) {
          const int64_t ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.h) {
            std::memset(dst, 0, sizeof(double) * d.kw * d.cin);
            dst += d.kw * d.cin;
            continue;
          }
          const int64_t iw0 = ow * d.stride - d.pad;
          for (int64_t kw = 0; kw < d.kw; ++kw) {
            const int64_t iw = iw0 + kw;
            if (iw < 0 || iw >= d.w) {
              std::memset(dst, 0, sizeof(double) * d.cin);
            } else {
              std::memcpy(dst, xn + ih * row_stride_in + iw * d.cin, sizeof(double) * d.cin);
            }
            dst += d.cin;
          }
        }
      }
    }
  }
}

// Scatter-add of a cols buffer back into input layout; inverse of im2col.
static void col2im(const ConvDims& d, const double* cols, double* x) {
  const int64_t patch = d.kh * d.kw * d.cin;
  const int64_t row_stride_in = d.w * d.cin;
  std::memset(x, 0, sizeof(double) * d.n * d.h * d.w * d.cin);
  for (int64_t n = 0; n < d.n; ++n) {
    double* xn = x + n * d.h * row_stride_in;
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        const double* src = cols + ((n * d.oh + oh) * d.ow + ow) * patch;
        for (int64_t kh = 0; kh < d.kh; ++kh) {
          const int64_t ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.h) {
            src += d.kw * d.cin;
            continue;
          }
          const int64_t iw0 = ow * d.stride - d.pad;
          for (int64_t kw = 0; kw < d.kw; ++kw) {
            const int64_t iw = iw0 + kw;
            if (iw >= 0 && iw < d.w) {
              double* dst = xn + ih * row_stride_in + iw * d.cin;
              for (int64_t ci = 0; ci < d.cin; ++ci) dst[ci] += src[ci];
            }
            src += d.cin;
          }
        }
      }
    }
  }
}

void conv2d_forward(const ConvDims& d, const double* x, const double* w, double* y) {
  const int64_t rows = d.n * d.oh * d.ow;
  const int64_t patch = d.kh * d.kw * d.cin;
  std::vector<double> cols(static_cast<size_t>(rows * patch));
  im2col(d, x, cols.data());
  MapCM c(cols.data(), rows, patch);
  MapCM wm(w, patch, d.cout);
  MapM ym(y, rows, d.cout);
  ym.noalias() = c * wm;
}

void conv2d_input_grad(const ConvDims& d, const double* gy, const double* w, double* gx) {
  const int64_t rows = d.n * d.oh * d.ow;
  const int64_t patch = d.kh * d.kw * d.cin;
  std::vector<double> gcols(static_cast<size_t>(rows * patch));
  MapCM gym(gy, rows, d.cout);
  MapCM wm(w, patch, d.cout);
  MapM gc(gcols.data(), rows, patch);
  gc.noalias() = gym * wm.transpose();
  col2im(d, gcols.data(), gx);
}

void conv2d_weight_grad(const ConvDims& d, const double* x, const double* gy, double* gw) {
  const int64_t rows = d.n * d.oh * d.ow;
  const int64_t patch = d.kh * d.kw * d.cin;
  std::vector<double> cols(static_cast<size_t>(rows * patch));
  im2col(d, x, cols.data());
  MapCM c(cols.data(), rows, patch);
  MapCM gym(gy, rows, d.cout);
  MapM gwm(gw, patch, d.cout);
  gwm.noalias() = c.transpose() * gym;
}

void matmul(const double* a, int64_t m, int64_t k, const double* b, int64_t n, double* out) {
  MapCM am(a, m, k);
  MapCM bm(b, k, n);
  MapM om(out, m, n);
  om.noalias() = am * bm;
}

void transpose(const double* a, int64_t m, int64_t n, double* out) {
  MapCM am(a, m, n);
  MapM om(out, n, m);
  om = am.transpose();
}

PoolDims pool_dims(const Shape& x, int64_t window, int64_t stride) {
  if (x.size() != 4) throw ShapeError("max-pool: expected NHWC input, got " + shape_str(x));
  if (window < 1 || stride < 1) throw ShapeError("max-pool: window and stride must be >= 1");
  PoolDims d;
  d.n = x[0];
  d.h = x[1];
  d.w = x[2];
  d.c = x[3];
  d.window = window;
  d.stride = stride;
  d.oh = (d.h - window) / stride + 1;
  d.ow = (d.w - window) / stride + 1;
  if (d.oh < 1 || d.ow < 1) {
    throw ShapeError("max-pool: window " + std::to_string(window) + " does not fit input " +
                     shape_str(x));
  }
  return d;
}

void max_pool2d(const PoolDims& d, const double* x, double* y, int32_t* argmax) {
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t oh = 0; oh < d.oh; ++oh) {
      for (int64_t ow = 0; ow < d.ow; ++ow) {
        for (int64_t c = 0; c < d.c; ++c) {
          double best = -1e308;
          int64_t best_idx = -1;
          for (int64_t kh = 0; kh < d.window; ++kh) {
            for (int64_t kw = 0; kw < d.window; ++kw) {
              const int64_t ih = oh * d.stride + kh;
              const int64_t iw = ow * d.stride + kw;
              const int64_t idx = ((n * d.h + ih) * d.w + iw) * d.c + c;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          const int64_t o = ((n * d.oh + oh) * d.ow + ow) * d.c + c;
          y[o] = best;
          argmax[o] = static_cast<int32_t>(best_idx);
        }
      }
    }
  }
}

void pool_scatter(const double* g, int64_t pooled_count, const int32_t* argmax, double* out) {
  for (int64_t i = 0; i < pooled_count; ++i) out[argmax[i]] += g[i];
}

void pool_gather(const double* x, int64_t pooled_count, const int32_t* argmax, double* out) {
  for (int64_t i = 0; i < pooled_count; ++i) out[i] = x[argmax[i]];
}

void pad2d(const Shape& xs, const double* x, int64_t top, int64_t bottom, int64_t left,
           int64_t right, double* y) {
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const int64_t ph = h + top + bottom, pw = w + left + right;
  std::memset(y, 0, sizeof(double) * n * ph * pw * c);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t r = 0; r < h; ++r) {
      std::memcpy(y + ((i * ph + r + top) * pw + left) * c, x + (i * h + r) * w * c,
                  sizeof(double) * w * c);
    }
  }
}

void crop2d(const Shape& xs, const double* x, int64_t top, int64_t bottom, int64_t left,
            int64_t right, double* y) {
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const int64_t ch = h - top - bottom, cw = w - left - right;
  (void)right;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t r = 0; r < ch; ++r) {
      std::memcpy(y + (i * ch + r) * cw * c, x + ((i * h + r + top) * w + left) * c,
                  sizeof(double) * cw * c);
    }
  }
}

}  // namespace jarn::kernels
