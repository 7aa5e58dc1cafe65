#pragma once

#include <cmath>
#include <cstdint>

namespace evflow {

// Dense kernels shared by the recording tape and the plain inference path,
// so both produce bit-identical forward values.

// y = W x + b, W row-major (rows x cols).
template <typename T>
inline void affine(const T* __restrict w, const T* __restrict x, const T* __restrict b,
                   T* __restrict y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const T* wr = w + static_cast<std::int64_t>(r) * cols;
    T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      acc0 += wr[c] * x[c];
      acc1 += wr[c + 1] * x[c + 1];
      acc2 += wr[c + 2] * x[c + 2];
      acc3 += wr[c + 3] * x[c + 3];
    }
    T acc = ((acc0 + acc1) + (acc2 + acc3));
    for (; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc + b[r];
  }
}

// y = W x + U h + b.
template <typename T>
inline void affine2(const T* w, const T* x, int xcols, const T* u, const T* h, int hcols,
                    const T* b, T* y, int rows) {
  for (int r = 0; r < rows; ++r) {
    const T* wr = w + static_cast<std::int64_t>(r) * xcols;
    T acc = b[r];
    for (int c = 0; c < xcols; ++c) acc += wr[c] * x[c];
    const T* ur = u + static_cast<std::int64_t>(r) * hcols;
    T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    int c = 0;
    for (; c + 4 <= hcols; c += 4) {
      a0 += ur[c] * h[c];
      a1 += ur[c + 1] * h[c + 1];
      a2 += ur[c + 2] * h[c + 2];
      a3 += ur[c + 3] * h[c + 3];
    }
    acc += ((a0 + a1) + (a2 + a3));
    for (; c < hcols; ++c) acc += ur[c] * h[c];
    y[r] = acc;
  }
}

// gx += W^T gy;  gW += gy x^T;  gb += gy.
template <typename T>
inline void affine_backward(const T* w, const T* x, const T* gy, T* gw, T* gx, T* gb,
                            int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const T g = gy[r];
    const T* wr = w + static_cast<std::int64_t>(r) * cols;
    T* gwr = gw + static_cast<std::int64_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      gwr[c] += g * x[c];
      gx[c] += wr[c] * g;
    }
    gb[r] += g;
  }
}

template <typename T>
inline T sigmoid_scalar(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
inline void sigmoid_vec(const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = sigmoid_scalar(x[i]);
}

template <typename T>
inline void tanh_vec(const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
inline void relu_vec(const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// Numerically shifted softmax; outputs sum to 1 up to rounding.
template <typename T>
inline void softmax_vec(const T* x, T* y, int n) {
  T mx = x[0];
  for (int i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  T sum = 0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  for (int i = 0; i < n; ++i) y[i] /= sum;
}

// Valid-mode 2D convolution, stride 1, square kernel.
// x: (cin, h, w), w: (cout, cin, ks, ks), b: (cout), y: (cout, oh, ow).
template <typename T>
inline void conv2d(const T* x, const T* w, const T* b, T* y, int cin, int h, int wd,
                   int cout, int ks) {
  const int oh = h - ks + 1;
  const int ow = wd - ks + 1;
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = b[oc];
        for (int ic = 0; ic < cin; ++ic) {
          const T* xp = x + (static_cast<std::int64_t>(ic) * h + oy) * wd + ox;
          const T* wp = w + ((static_cast<std::int64_t>(oc) * cin + ic) * ks) * ks;
          for (int ky = 0; ky < ks; ++ky)
            for (int kx = 0; kx < ks; ++kx) acc += xp[ky * wd + kx] * wp[ky * ks + kx];
        }
        y[(static_cast<std::int64_t>(oc) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

// Global average pool: y[c] = mean over spatial positions of x[c, :, :].
template <typename T>
inline void avgpool_all(const T* x, T* y, int c, int h, int w) {
  const T inv = T(1) / static_cast<T>(h * w);
  for (int ch = 0; ch < c; ++ch) {
    T acc = 0;
    const T* xp = x + static_cast<std::int64_t>(ch) * h * w;
    for (int i = 0; i < h * w; ++i) acc += xp[i];
    y[ch] = acc * inv;
  }
}

}  // namespace evflow
