#pragma once

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spes::kernels {

// Every kernel computes each output element with a single serial
// accumulation, so the OpenMP variants are bit-identical to the serial
// reference for any thread count: threads only split independent outputs.
// Accumulation is done in double regardless of the storage type.

struct Conv1dDims {
  int cin = 0, cout = 0, k = 0;
  int t_in = 0, t_out = 0;
  int stride = 1, pad = 0;
};

inline int conv1d_out_size(int t_in, int k, int stride, int pad) {
  return (t_in + 2 * pad - k) / stride + 1;
}

// Scoped suppression of kernel-level OpenMP. Used by worker pools and by the
// batch-parallel training loop so nested regions never oversubscribe.
int& serial_depth();

struct SerialScope {
  SerialScope() { ++serial_depth(); }
  ~SerialScope() { --serial_depth(); }
  SerialScope(const SerialScope&) = delete;
  SerialScope& operator=(const SerialScope&) = delete;
};

inline bool parallel_allowed() {
#ifdef _OPENMP
  return serial_depth() == 0 && !omp_in_parallel();
#else
  return false;
#endif
}

// ---------------------------------------------------------------------------
// serial reference implementations
// ---------------------------------------------------------------------------
namespace serial {

template <typename T>
void conv1d_fwd(const T* x, const T* w, const T* b, T* y, const Conv1dDims& d) {
  for (int oc = 0; oc < d.cout; ++oc) {
    const T* wc = w + size_t(oc) * d.cin * d.k;
    for (int ot = 0; ot < d.t_out; ++ot) {
      double acc = b ? double(b[oc]) : 0.0;
      int base = ot * d.stride - d.pad;
      for (int ic = 0; ic < d.cin; ++ic) {
        const T* xr = x + size_t(ic) * d.t_in;
        const T* wr = wc + size_t(ic) * d.k;
        for (int kk = 0; kk < d.k; ++kk) {
          int it = base + kk;
          if (it >= 0 && it < d.t_in) acc += double(wr[kk]) * double(xr[it]);
        }
      }
      y[size_t(oc) * d.t_out + ot] = T(acc);
    }
  }
}

// dx += conv-transpose(dy, w)
template <typename T>
void conv1d_bwd_input(const T* dy, const T* w, T* dx, const Conv1dDims& d) {
  for (int ic = 0; ic < d.cin; ++ic) {
    for (int it = 0; it < d.t_in; ++it) {
      double acc = 0.0;
      for (int oc = 0; oc < d.cout; ++oc) {
        const T* wr = w + (size_t(oc) * d.cin + ic) * d.k;
        const T* dyr = dy + size_t(oc) * d.t_out;
        for (int kk = 0; kk < d.k; ++kk) {
          int num = it + d.pad - kk;
          if (num < 0 || num % d.stride != 0) continue;
          int ot = num / d.stride;
          if (ot < d.t_out) acc += double(wr[kk]) * double(dyr[ot]);
        }
      }
      dx[size_t(ic) * d.t_in + it] += T(acc);
    }
  }
}

// dw += x (*) dy ; db += rowsum(dy)
template <typename T>
void conv1d_bwd_params(const T* dy, const T* x, T* dw, T* db, const Conv1dDims& d) {
  for (int oc = 0; oc < d.cout; ++oc) {
    const T* dyr = dy + size_t(oc) * d.t_out;
    for (int ic = 0; ic < d.cin; ++ic) {
      const T* xr = x + size_t(ic) * d.t_in;
      T* wr = dw + (size_t(oc) * d.cin + ic) * d.k;
      for (int kk = 0; kk < d.k; ++kk) {
        double acc = 0.0;
        for (int ot = 0; ot < d.t_out; ++ot) {
          int it = ot * d.stride - d.pad + kk;
          if (it >= 0 && it < d.t_in) acc += double(dyr[ot]) * double(xr[it]);
        }
        wr[kk] += T(acc);
      }
    }
    if (db) {
      double acc = 0.0;
      for (int ot = 0; ot < d.t_out; ++ot) acc += double(dyr[ot]);
      db[oc] += T(acc);
    }
  }
}

// C[m,n] (+)= A[m,k] * B[k,n]
template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += double(a[size_t(i) * k + p]) * double(b[size_t(p) * n + j]);
      T* out = &c[size_t(i) * n + j];
      *out = accumulate ? T(double(*out) + acc) : T(acc);
    }
  }
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += double(a[size_t(i) * k + p]) * double(b[size_t(j) * k + p]);
      T* out = &c[size_t(i) * n + j];
      *out = accumulate ? T(double(*out) + acc) : T(acc);
    }
  }
}

// C[k,n] (+)= A[m,k]^T * B[m,n]
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < m; ++p) acc += double(a[size_t(p) * k + i]) * double(b[size_t(p) * n + j]);
      T* out = &c[size_t(i) * n + j];
      *out = accumulate ? T(double(*out) + acc) : T(acc);
    }
  }
}

template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const T* xr = x + size_t(i) * n;
    T* yr = y + size_t(i) * n;
    double mx = double(xr[0]);
    for (int j = 1; j < n; ++j) mx = std::max(mx, double(xr[j]));
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(double(xr[j]) - mx);
      yr[j] = T(e);
      sum += e;
    }
    for (int j = 0; j < n; ++j) yr[j] = T(double(yr[j]) / sum);
  }
}

// dx_i += y_i * (dy_i - sum_j dy_j y_j), per row
template <typename T>
void softmax_rows_bwd(const T* y, const T* dy, T* dx, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const T* yr = y + size_t(i) * n;
    const T* dyr = dy + size_t(i) * n;
    T* dxr = dx + size_t(i) * n;
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += double(dyr[j]) * double(yr[j]);
    for (int j = 0; j < n; ++j)
      dxr[j] += T(double(yr[j]) * (double(dyr[j]) - dot));
  }
}

// per-row normalisation; saves mean and reciprocal std for the backward pass
template <typename T>
void layer_norm_fwd(const T* x, const T* gamma, const T* beta, T* y,
                    double* mean, double* rstd, int m, int n, double eps) {
  for (int i = 0; i < m; ++i) {
    const T* xr = x + size_t(i) * n;
    T* yr = y + size_t(i) * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += double(xr[j]);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double dv = double(xr[j]) - mu;
      var += dv * dv;
    }
    var /= n;
    double rs = 1.0 / std::sqrt(var + eps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < n; ++j)
      yr[j] = T((double(xr[j]) - mu) * rs * double(gamma[j]) + double(beta[j]));
  }
}

template <typename T>
void layer_norm_bwd(const T* x, const T* gamma, const T* dy,
                    const double* mean, const double* rstd,
                    T* dx, T* dgamma, T* dbeta, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const T* xr = x + size_t(i) * n;
    const T* dyr = dy + size_t(i) * n;
    T* dxr = dx + size_t(i) * n;
    double mu = mean[i], rs = rstd[i];
    double sum_g = 0.0, sum_gx = 0.0;
    for (int j = 0; j < n; ++j) {
      double g = double(dyr[j]) * double(gamma[j]);
      double xh = (double(xr[j]) - mu) * rs;
      sum_g += g;
      sum_gx += g * xh;
    }
    for (int j = 0; j < n; ++j) {
      double g = double(dyr[j]) * double(gamma[j]);
      double xh = (double(xr[j]) - mu) * rs;
      dxr[j] += T(rs * (g - (sum_g + xh * sum_gx) / n));
    }
    if (dgamma) {
      for (int j = 0; j < n; ++j) {
        double xh = (double(xr[j]) - mu) * rs;
        dgamma[j] += T(double(dyr[j]) * xh);
        dbeta[j] += T(double(dyr[j]));
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// dispatching variants: OpenMP over independent outputs when the work is
// large enough, otherwise the serial reference
// ---------------------------------------------------------------------------

template <typename T>
void conv1d_fwd(const T* x, const T* w, const T* b, T* y, const Conv1dDims& d) {
  long work = long(d.cout) * d.t_out * d.cin * d.k;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::conv1d_fwd(x, w, b, y, d);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.cout; ++oc) {
    const T* wc = w + size_t(oc) * d.cin * d.k;
    for (int ot = 0; ot < d.t_out; ++ot) {
      double acc = b ? double(b[oc]) : 0.0;
      int base = ot * d.stride - d.pad;
      for (int ic = 0; ic < d.cin; ++ic) {
        const T* xr = x + size_t(ic) * d.t_in;
        const T* wr = wc + size_t(ic) * d.k;
        for (int kk = 0; kk < d.k; ++kk) {
          int it = base + kk;
          if (it >= 0 && it < d.t_in) acc += double(wr[kk]) * double(xr[it]);
        }
      }
      y[size_t(oc) * d.t_out + ot] = T(acc);
    }
  }
#endif
}

template <typename T>
void conv1d_bwd_input(const T* dy, const T* w, T* dx, const Conv1dDims& d) {
  long work = long(d.cin) * d.t_in * d.cout * d.k;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::conv1d_bwd_input(dy, w, dx, d);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < d.cin; ++ic) {
    for (int it = 0; it < d.t_in; ++it) {
      double acc = 0.0;
      for (int oc = 0; oc < d.cout; ++oc) {
        const T* wr = w + (size_t(oc) * d.cin + ic) * d.k;
        const T* dyr = dy + size_t(oc) * d.t_out;
        for (int kk = 0; kk < d.k; ++kk) {
          int num = it + d.pad - kk;
          if (num < 0 || num % d.stride != 0) continue;
          int ot = num / d.stride;
          if (ot < d.t_out) acc += double(wr[kk]) * double(dyr[ot]);
        }
      }
      dx[size_t(ic) * d.t_in + it] += T(acc);
    }
  }
#endif
}

template <typename T>
void conv1d_bwd_params(const T* dy, const T* x, T* dw, T* db, const Conv1dDims& d) {
  long work = long(d.cout) * d.cin * d.k * d.t_out;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::conv1d_bwd_params(dy, x, dw, db, d);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.cout; ++oc) {
    const T* dyr = dy + size_t(oc) * d.t_out;
    for (int ic = 0; ic < d.cin; ++ic) {
      const T* xr = x + size_t(ic) * d.t_in;
      T* wr = dw + (size_t(oc) * d.cin + ic) * d.k;
      for (int kk = 0; kk < d.k; ++kk) {
        double acc = 0.0;
        for (int ot = 0; ot < d.t_out; ++ot) {
          int it = ot * d.stride - d.pad + kk;
          if (it >= 0 && it < d.t_in) acc += double(dyr[ot]) * double(xr[it]);
        }
        wr[kk] += T(acc);
      }
    }
    if (db) {
      double acc = 0.0;
      for (int ot = 0; ot < d.t_out; ++ot) acc += double(dyr[ot]);
      db[oc] += T(acc);
    }
  }
#endif
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  long work = long(m) * n * k;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::matmul_nn(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    serial::matmul_nn(a + size_t(i) * k, b, c + size_t(i) * n, 1, k, n, accumulate);
#endif
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  long work = long(m) * n * k;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::matmul_nt(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    serial::matmul_nt(a + size_t(i) * k, b, c + size_t(i) * n, 1, k, n, accumulate);
#endif
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  long work = long(m) * n * k;
  if (!parallel_allowed() || work < (1 << 15)) {
    serial::matmul_tn(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < m; ++p) acc += double(a[size_t(p) * k + i]) * double(b[size_t(p) * n + j]);
      T* out = &c[size_t(i) * n + j];
      *out = accumulate ? T(double(*out) + acc) : T(acc);
    }
  }
#endif
}

template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
  if (!parallel_allowed() || long(m) * n < (1 << 15)) {
    serial::softmax_rows(x, y, m, n);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    serial::softmax_rows(x + size_t(i) * n, y + size_t(i) * n, 1, n);
#endif
}

template <typename T>
void softmax_rows_bwd(const T* y, const T* dy, T* dx, int m, int n) {
  serial::softmax_rows_bwd(y, dy, dx, m, n);
}

template <typename T>
void layer_norm_fwd(const T* x, const T* gamma, const T* beta, T* y,
                    double* mean, double* rstd, int m, int n, double eps) {
  serial::layer_norm_fwd(x, gamma, beta, y, mean, rstd, m, n, eps);
}

template <typename T>
void layer_norm_bwd(const T* x, const T* gamma, const T* dy,
                    const double* mean, const double* rstd,
                    T* dx, T* dgamma, T* dbeta, int m, int n) {
  serial::layer_norm_bwd(x, gamma, dy, mean, rstd, dx, dgamma, dbeta, m, n);
}

}  // namespace spes::kernels
