#include "lrva/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lrva {
namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool wants_grad(const TensorImpl& impl) { return impl.requires_grad || impl.on_tape; }

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor* t : inputs) {
    if (grad_tracked(*t)) return true;
  }
  return false;
}

void record(const char* op, const Tensor& out, std::function<void()> bw) {
  Tape::current()->record(op, out.impl(), std::move(bw));
}

void axpy(std::vector<double>& dst, const std::vector<double>& src, double a = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out = a.vec();
  axpy(out, b.vec());
  Tensor y = Tensor::from_data(a.shape(), std::move(out));
  check_finite(y, "add");
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    record("add", y, [ai, bi, yi] {
      if (wants_grad(*ai)) axpy(ensure_grad(*ai), yi->grad);
      if (wants_grad(*bi)) axpy(ensure_grad(*bi), yi->grad);
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out = a.vec();
  axpy(out, b.vec(), -1.0);
  Tensor y = Tensor::from_data(a.shape(), std::move(out));
  check_finite(y, "sub");
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    record("sub", y, [ai, bi, yi] {
      if (wants_grad(*ai)) axpy(ensure_grad(*ai), yi->grad);
      if (wants_grad(*bi)) axpy(ensure_grad(*bi), yi->grad, -1.0);
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out = a.vec();
  const auto& bv = b.vec();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Tensor y = Tensor::from_data(a.shape(), std::move(out));
  check_finite(y, "mul");
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    record("mul", y, [ai, bi, yi] {
      const auto& g = yi->grad;
      if (wants_grad(*ai)) {
        auto& ga = ensure_grad(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
      }
      if (wants_grad(*bi)) {
        auto& gb = ensure_grad(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
      }
    });
  }
  return y;
}

Tensor scalar_mul(const Tensor& x, double c) {
  std::vector<double> out = x.vec();
  for (double& v : out) v *= c;
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "scalar_mul");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("scalar_mul", y, [xi, yi, c] {
      if (wants_grad(*xi)) axpy(ensure_grad(*xi), yi->grad, c);
    });
  }
  return y;
}

Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s) {
  require(s.numel() == 1, "mul_scalar_tensor: scale must have one element");
  const double c = s.vec()[0];
  std::vector<double> out = x.vec();
  for (double& v : out) v *= c;
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "mul_scalar_tensor");
  if (recording({&x, &s})) {
    auto xi = x.impl(), si = s.impl(), yi = y.impl();
    record("mul_scalar_tensor", y, [xi, si, yi, c] {
      const auto& g = yi->grad;
      if (wants_grad(*xi)) axpy(ensure_grad(*xi), g, c);
      if (wants_grad(*si)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xi->data[i];
        ensure_grad(*si)[0] += acc;
      }
    });
  }
  return y;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() >= 1, "add_bias: input must have rank >= 1");
  const int n = x.shape().back();
  require(bias.rank() == 1 && bias.numel() == n,
          "add_bias: bias length must equal last extent " + std::to_string(n));
  std::vector<double> out = x.vec();
  const auto& bv = bias.vec();
  const std::size_t rows = out.size() / static_cast<std::size_t>(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < n; ++j) out[r * n + j] += bv[static_cast<std::size_t>(j)];
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "add_bias");
  if (recording({&x, &bias})) {
    auto xi = x.impl(), bi = bias.impl(), yi = y.impl();
    record("add_bias", y, [xi, bi, yi, n, rows] {
      const auto& g = yi->grad;
      if (wants_grad(*xi)) axpy(ensure_grad(*xi), g);
      if (wants_grad(*bi)) {
        auto& gb = ensure_grad(*bi);
        for (std::size_t r = 0; r < rows; ++r) {
          for (int j = 0; j < n; ++j) gb[static_cast<std::size_t>(j)] += g[r * n + j];
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: both inputs must be rank 2");
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  require(b.dim(0) == K, "matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  std::vector<double> out(static_cast<std::size_t>(M) * N, 0.0);
  const double* A = a.data();
  const double* B = b.data();
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < K; ++k) {
      const double aik = A[i * K + k];
      const double* brow = B + k * N;
      double* orow = out.data() + i * N;
      for (int j = 0; j < N; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor y = Tensor::from_data({M, N}, std::move(out));
  check_finite(y, "matmul");
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    record("matmul", y, [ai, bi, yi, M, K, N] {
      const double* g = yi->grad.data();
      if (wants_grad(*ai)) {
        auto& ga = ensure_grad(*ai);
        for (int i = 0; i < M; ++i) {
          for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            const double* grow = g + i * N;
            const double* brow = bi->data.data() + k * N;
            for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
            ga[static_cast<std::size_t>(i) * K + k] += acc;
          }
        }
      }
      if (wants_grad(*bi)) {
        auto& gb = ensure_grad(*bi);
        for (int i = 0; i < M; ++i) {
          const double* grow = g + i * N;
          for (int k = 0; k < K; ++k) {
            const double aik = ai->data[static_cast<std::size_t>(i) * K + k];
            double* gbrow = gb.data() + k * N;
            for (int j = 0; j < N; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return y;
}

Tensor transpose(const Tensor& x) {
  require(x.rank() == 2, "transpose: input must be rank 2");
  const int M = x.dim(0), N = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(M) * N);
  const double* X = x.data();
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) out[static_cast<std::size_t>(j) * M + i] = X[i * N + j];
  }
  Tensor y = Tensor::from_data({N, M}, std::move(out));
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("transpose", y, [xi, yi, M, N] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) gx[static_cast<std::size_t>(i) * N + j] += g[static_cast<std::size_t>(j) * M + i];
      }
    });
  }
  return y;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.numel() == b.numel(), "dot: operand sizes differ");
  double acc = 0.0;
  const auto& av = a.vec();
  const auto& bv = b.vec();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Tensor y = Tensor::scalar(acc);
  check_finite(y, "dot");
  if (recording({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    record("dot", y, [ai, bi, yi] {
      const double g = yi->grad[0];
      if (wants_grad(*ai)) axpy(ensure_grad(*ai), bi->data, g);
      if (wants_grad(*bi)) axpy(ensure_grad(*bi), ai->data, g);
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Convolution / pooling

static Tensor conv_core(const char* op, const Tensor& input, const Tensor& kernel, int kr, int kc,
                        int u, int stride) {
  require(input.rank() == 3, std::string(op) + ": input must be [C,H,W]");
  require(kernel.rank() == 4, std::string(op) + ": kernel must be [C_out,C_in,u,u]");
  const int Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int Cout = kernel.dim(0), qr = kernel.dim(2), qc = kernel.dim(3);
  require(kernel.dim(1) == Cin, std::string(op) + ": kernel channel count mismatch");
  require(stride >= 1, std::string(op) + ": stride must be >= 1");
  require(u >= 1 && kr >= 0 && kc >= 0 && kr + u <= qr && kc + u <= qc,
          std::string(op) + ": window outside kernel bounds");
  require(u <= H && u <= W, std::string(op) + ": kernel larger than input");
  const int Ho = (H - u) / stride + 1;
  const int Wo = (W - u) / stride + 1;

  std::vector<double> out(static_cast<std::size_t>(Cout) * Ho * Wo, 0.0);
  const double* in = input.data();
  const double* K = kernel.data();
  for (int o = 0; o < Cout; ++o) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (int c = 0; c < Cin; ++c) {
          for (int i = 0; i < u; ++i) {
            const double* irow = in + (static_cast<std::size_t>(c) * H + oy * stride + i) * W + ox * stride;
            const double* krow = K + ((static_cast<std::size_t>(o) * Cin + c) * qr + kr + i) * qc + kc;
            for (int j = 0; j < u; ++j) acc += irow[j] * krow[j];
          }
        }
        out[(static_cast<std::size_t>(o) * Ho + oy) * Wo + ox] = acc;
      }
    }
  }
  Tensor y = Tensor::from_data({Cout, Ho, Wo}, std::move(out));
  check_finite(y, op);
  if (recording({&input, &kernel})) {
    auto ii = input.impl(), ki = kernel.impl(), yi = y.impl();
    record(op, y, [ii, ki, yi, Cin, H, W, Cout, qr, qc, kr, kc, u, stride, Ho, Wo] {
      const double* g = yi->grad.data();
      const bool want_in = wants_grad(*ii);
      const bool want_k = wants_grad(*ki);
      if (!want_in && !want_k) return;
      double* gin = want_in ? ensure_grad(*ii).data() : nullptr;
      double* gk = want_k ? ensure_grad(*ki).data() : nullptr;
      for (int o = 0; o < Cout; ++o) {
        for (int oy = 0; oy < Ho; ++oy) {
          for (int ox = 0; ox < Wo; ++ox) {
            const double gv = g[(static_cast<std::size_t>(o) * Ho + oy) * Wo + ox];
            if (gv == 0.0) continue;
            for (int c = 0; c < Cin; ++c) {
              for (int i = 0; i < u; ++i) {
                const std::size_t ibase =
                    (static_cast<std::size_t>(c) * H + oy * stride + i) * W + ox * stride;
                const std::size_t kbase =
                    ((static_cast<std::size_t>(o) * Cin + c) * qr + kr + i) * qc + kc;
                for (int j = 0; j < u; ++j) {
                  if (gin) gin[ibase + j] += gv * ki->data[kbase + j];
                  if (gk) gk[kbase + j] += gv * ii->data[ibase + j];
                }
              }
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride) {
  require(kernel.rank() == 4 && kernel.dim(2) == kernel.dim(3),
          "conv2d: kernel must be square [C_out,C_in,u,u]");
  return conv_core("conv2d", input, kernel, 0, 0, kernel.dim(2), stride);
}

Tensor conv2d_window(const Tensor& input, const Tensor& kernel, int kr, int kc, int u, int stride) {
  return conv_core("conv2d_window", input, kernel, kr, kc, u, stride);
}

Tensor max_pool2d(const Tensor& x, int k, int stride) {
  require(x.rank() == 3, "max_pool2d: input must be [C,H,W]");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  require(k >= 1 && stride >= 1, "max_pool2d: k and stride must be >= 1");
  require(k <= H && k <= W, "max_pool2d: window larger than input");
  const int Ho = (H - k) / stride + 1;
  const int Wo = (W - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(C) * Ho * Wo);
  std::vector<std::int64_t> argmax(out.size());
  const double* in = x.data();
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        std::int64_t best_idx = -1;
        double best = 0.0;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const std::int64_t idx =
                (static_cast<std::int64_t>(c) * H + oy * stride + i) * W + ox * stride + j;
            const double v = in[idx];
            if (best_idx < 0 || v > best) {  // strict >: ties keep the first visit
              best = v;
              best_idx = idx;
            }
          }
        }
        const std::size_t oidx = (static_cast<std::size_t>(c) * Ho + oy) * Wo + ox;
        out[oidx] = best;
        argmax[oidx] = best_idx;
      }
    }
  }
  Tensor y = Tensor::from_data({C, Ho, Wo}, std::move(out));
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("max_pool2d", y, [xi, yi, argmax = std::move(argmax)] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[static_cast<std::size_t>(argmax[i])] += g[i];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Nonlinearities / normalization

Tensor softmax(const Tensor& x, int axis) {
  require(axis >= 0 && axis < x.rank(), "softmax: axis out of range");
  const auto& shape = x.shape();
  const int n = shape[static_cast<std::size_t>(axis)];
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<std::size_t>(i)];

  std::vector<double> out(x.vec().size());
  const double* in = x.data();
  for (std::int64_t a = 0; a < outer; ++a) {
    for (std::int64_t b = 0; b < inner; ++b) {
      const std::int64_t base = a * n * inner + b;
      double mx = in[base];
      for (int t = 1; t < n; ++t) mx = std::max(mx, in[base + t * inner]);
      double z = 0.0;
      for (int t = 0; t < n; ++t) {
        const double e = std::exp(in[base + t * inner] - mx);
        out[static_cast<std::size_t>(base + t * inner)] = e;
        z += e;
      }
      for (int t = 0; t < n; ++t) out[static_cast<std::size_t>(base + t * inner)] /= z;
    }
  }
  Tensor y = Tensor::from_data(shape, std::move(out));
  check_finite(y, "softmax");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("softmax", y, [xi, yi, outer, inner, n] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      const auto& yv = yi->data;
      for (std::int64_t a = 0; a < outer; ++a) {
        for (std::int64_t b = 0; b < inner; ++b) {
          const std::int64_t base = a * n * inner + b;
          double s = 0.0;
          for (int t = 0; t < n; ++t) {
            const std::size_t idx = static_cast<std::size_t>(base + t * inner);
            s += g[idx] * yv[idx];
          }
          for (int t = 0; t < n; ++t) {
            const std::size_t idx = static_cast<std::size_t>(base + t * inner);
            gx[idx] += yv[idx] * (g[idx] - s);
          }
        }
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x.rank() >= 1, "layer_norm: input must have rank >= 1");
  const int n = x.shape().back();
  require(gain.numel() == n && bias.numel() == n,
          "layer_norm: gain/bias length must equal last extent " + std::to_string(n));
  const std::size_t rows = x.vec().size() / static_cast<std::size_t>(n);

  std::vector<double> out(x.vec().size());
  std::vector<double> xhat(x.vec().size());
  std::vector<double> inv_std(rows);
  const double* in = x.data();
  const double* gv = gain.data();
  const double* bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in + r * n;
    double mu = 0.0;
    for (int t = 0; t < n; ++t) mu += row[t];
    mu /= n;
    double var = 0.0;
    for (int t = 0; t < n; ++t) {
      const double d = row[t] - mu;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (int t = 0; t < n; ++t) {
      const double xh = (row[t] - mu) * inv;
      xhat[r * n + t] = xh;
      out[r * n + t] = gv[t] * xh + bv[t];
    }
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "layer_norm");
  if (recording({&x, &gain, &bias})) {
    auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), yi = y.impl();
    record("layer_norm", y,
           [xi, gi, bi, yi, n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
             const auto& g = yi->grad;
             const bool want_x = wants_grad(*xi);
             const bool want_g = wants_grad(*gi);
             const bool want_b = wants_grad(*bi);
             double* gx = want_x ? ensure_grad(*xi).data() : nullptr;
             double* gg = want_g ? ensure_grad(*gi).data() : nullptr;
             double* gb = want_b ? ensure_grad(*bi).data() : nullptr;
             for (std::size_t r = 0; r < rows; ++r) {
               const double* grow = g.data() + r * n;
               const double* xh = xhat.data() + r * n;
               if (want_g || want_b) {
                 for (int t = 0; t < n; ++t) {
                   if (gg) gg[t] += grow[t] * xh[t];
                   if (gb) gb[t] += grow[t];
                 }
               }
               if (want_x) {
                 double m1 = 0.0, m2 = 0.0;
                 for (int t = 0; t < n; ++t) {
                   const double gd = grow[t] * gi->data[static_cast<std::size_t>(t)];
                   m1 += gd;
                   m2 += gd * xh[t];
                 }
                 m1 /= n;
                 m2 /= n;
                 const double inv = inv_std[r];
                 for (int t = 0; t < n; ++t) {
                   const double gd = grow[t] * gi->data[static_cast<std::size_t>(t)];
                   gx[r * n + t] += inv * (gd - m1 - xh[t] * m2);
                 }
               }
             }
           });
  }
  return y;
}

Tensor gelu(const Tensor& x) {
  // Exact form x * Phi(x); smooth everywhere, which keeps finite differences
  // well behaved in the gradient checker.
  static constexpr double kInvSqrt2 = 0.7071067811865475244;
  static constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  std::vector<double> out(x.vec().size());
  const double* in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = in[i] * 0.5 * std::erfc(-in[i] * kInvSqrt2);
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "gelu");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("gelu", y, [xi, yi] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = xi->data[i];
        const double phi = 0.5 * std::erfc(-v * kInvSqrt2);
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += g[i] * (phi + v * pdf);
      }
    });
  }
  return y;
}

Tensor l2_normalize_rows(const Tensor& x) {
  require(x.rank() == 1 || x.rank() == 2, "l2_normalize_rows: input must be rank 1 or 2");
  const int n = x.shape().back();
  const std::size_t rows = x.vec().size() / static_cast<std::size_t>(n);
  std::vector<double> out(x.vec().size());
  std::vector<double> norms(rows);
  const double* in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int t = 0; t < n; ++t) s += in[r * n + t] * in[r * n + t];
    const double norm = std::max(std::sqrt(s), 1e-12);  // zero rows stay zero
    norms[r] = norm;
    for (int t = 0; t < n; ++t) out[r * n + t] = in[r * n + t] / norm;
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  check_finite(y, "l2_normalize_rows");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("l2_normalize_rows", y, [xi, yi, n, rows, norms = std::move(norms)] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      const auto& yv = yi->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double dotgy = 0.0;
        for (int t = 0; t < n; ++t) dotgy += g[r * n + t] * yv[r * n + t];
        for (int t = 0; t < n; ++t) {
          gx[r * n + t] += (g[r * n + t] - yv[r * n + t] * dotgy) / norms[r];
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reductions / shape

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.vec()) acc += v;
  Tensor y = Tensor::scalar(acc);
  check_finite(y, "sum");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("sum", y, [xi, yi] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const double g = yi->grad[0];
      for (double& v : gx) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.vec()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  Tensor y = Tensor::scalar(acc * inv_n);
  check_finite(y, "mean");
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("mean", y, [xi, yi, inv_n] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const double g = yi->grad[0] * inv_n;
      for (double& v : gx) v += g;
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel_of(shape) == x.numel(),
          "reshape: element count mismatch, " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor y = Tensor::from_data(std::move(shape), x.vec());
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("reshape", y, [xi, yi] {
      if (wants_grad(*xi)) axpy(ensure_grad(*xi), yi->grad);
    });
  }
  return y;
}

Tensor slice_rows(const Tensor& x, int row_begin, int row_end) {
  require(x.rank() == 2, "slice_rows: input must be rank 2");
  const int M = x.dim(0), N = x.dim(1);
  require(0 <= row_begin && row_begin < row_end && row_end <= M, "slice_rows: bad row range");
  const int R = row_end - row_begin;
  std::vector<double> out(static_cast<std::size_t>(R) * N);
  std::copy_n(x.data() + static_cast<std::size_t>(row_begin) * N, out.size(), out.begin());
  Tensor y = Tensor::from_data({R, N}, std::move(out));
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("slice_rows", y, [xi, yi, row_begin, N] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[static_cast<std::size_t>(row_begin) * N + i] += g[i];
      }
    });
  }
  return y;
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
  require(x.rank() == 2, "slice_cols: input must be rank 2");
  const int M = x.dim(0), N = x.dim(1);
  require(0 <= col_begin && col_begin < col_end && col_end <= N, "slice_cols: bad column range");
  const int C = col_end - col_begin;
  std::vector<double> out(static_cast<std::size_t>(M) * C);
  const double* in = x.data();
  for (int i = 0; i < M; ++i) {
    std::copy_n(in + static_cast<std::size_t>(i) * N + col_begin, C,
                out.begin() + static_cast<std::size_t>(i) * C);
  }
  Tensor y = Tensor::from_data({M, C}, std::move(out));
  if (recording({&x})) {
    auto xi = x.impl(), yi = y.impl();
    record("slice_cols", y, [xi, yi, col_begin, M, N, C] {
      if (!wants_grad(*xi)) return;
      auto& gx = ensure_grad(*xi);
      const auto& g = yi->grad;
      for (int i = 0; i < M; ++i) {
        for (int j = 0; j < C; ++j) {
          gx[static_cast<std::size_t>(i) * N + col_begin + j] += g[static_cast<std::size_t>(i) * C + j];
        }
      }
    });
  }
  return y;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const int N = parts.front().dim(1);
  int M = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == 2 && p.dim(1) == N, "concat_rows: column extents differ");
    M += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(M) * N);
  for (const Tensor& p : parts) out.insert(out.end(), p.vec().begin(), p.vec().end());
  Tensor y = Tensor::from_data({M, N}, std::move(out));

  bool track = false;
  if (Tape::current()) {
    for (const Tensor& p : parts) track = track || grad_tracked(p);
  }
  if (track) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    auto yi = y.impl();
    record("concat_rows", y, [impls = std::move(impls), yi] {
      std::size_t offset = 0;
      for (const auto& pi : impls) {
        const std::size_t count = pi->data.size();
        if (wants_grad(*pi)) {
          auto& gp = ensure_grad(*pi);
          for (std::size_t i = 0; i < count; ++i) gp[i] += yi->grad[offset + i];
        }
        offset += count;
      }
    });
  }
  return y;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int M = parts.front().dim(0);
  int N = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == 2 && p.dim(0) == M, "concat_cols: row extents differ");
    N += p.dim(1);
  }
  std::vector<double> out(static_cast<std::size_t>(M) * N);
  int col = 0;
  for (const Tensor& p : parts) {
    const int C = p.dim(1);
    for (int i = 0; i < M; ++i) {
      std::copy_n(p.data() + static_cast<std::size_t>(i) * C, C,
                  out.begin() + static_cast<std::size_t>(i) * N + col);
    }
    col += C;
  }
  Tensor y = Tensor::from_data({M, N}, std::move(out));

  bool track = false;
  if (Tape::current()) {
    for (const Tensor& p : parts) track = track || grad_tracked(p);
  }
  if (track) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    auto yi = y.impl();
    record("concat_cols", y, [impls = std::move(impls), yi, M, N] {
      int col = 0;
      for (const auto& pi : impls) {
        const int C = static_cast<int>(pi->data.size()) / M;
        if (wants_grad(*pi)) {
          auto& gp = ensure_grad(*pi);
          for (int i = 0; i < M; ++i) {
            for (int j = 0; j < C; ++j) {
              gp[static_cast<std::size_t>(i) * C + j] +=
                  yi->grad[static_cast<std::size_t>(i) * N + col + j];
            }
          }
        }
        col += C;
      }
    });
  }
  return y;
}

Tensor tokens_from_feature_map(const Tensor& fm) {
  require(fm.rank() == 3, "tokens_from_feature_map: input must be [C,H,W]");
  const int C = fm.dim(0), H = fm.dim(1), W = fm.dim(2);
  std::vector<double> out(static_cast<std::size_t>(H) * W * C);
  const double* in = fm.data();
  for (int c = 0; c < C; ++c) {
    for (int p = 0; p < H * W; ++p) {
      out[static_cast<std::size_t>(p) * C + c] = in[static_cast<std::size_t>(c) * H * W + p];
    }
  }
  Tensor y = Tensor::from_data({H * W, C}, std::move(out));
  if (recording({&fm})) {
    auto fi = fm.impl(), yi = y.impl();
    record("tokens_from_feature_map", y, [fi, yi, C, HW = H * W] {
      if (!wants_grad(*fi)) return;
      auto& gx = ensure_grad(*fi);
      const auto& g = yi->grad;
      for (int c = 0; c < C; ++c) {
        for (int p = 0; p < HW; ++p) {
          gx[static_cast<std::size_t>(c) * HW + p] += g[static_cast<std::size_t>(p) * C + c];
        }
      }
    });
  }
  return y;
}

Tensor weighted_sum(std::span<const Tensor> xs, const Tensor& coeffs) {
  require(!xs.empty(), "weighted_sum: no inputs");
  require(coeffs.rank() == 1 && coeffs.numel() == static_cast<std::int64_t>(xs.size()),
          "weighted_sum: coefficient count must equal input count");
  const Shape& shape = xs.front().shape();
  for (const Tensor& x : xs) {
    require(x.shape() == shape, "weighted_sum: input shapes differ");
  }
  const auto& cv = coeffs.vec();
  std::vector<double> out(xs.front().vec().size(), 0.0);
  for (std::size_t t = 0; t < xs.size(); ++t) axpy(out, xs[t].vec(), cv[t]);
  Tensor y = Tensor::from_data(shape, std::move(out));
  check_finite(y, "weighted_sum");

  bool track = grad_tracked(coeffs);
  if (Tape::current()) {
    for (const Tensor& x : xs) track = track || grad_tracked(x);
  }
  if (Tape::current() && track) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(xs.size());
    for (const Tensor& x : xs) impls.push_back(x.impl());
    auto ci = coeffs.impl(), yi = y.impl();
    record("weighted_sum", y, [impls = std::move(impls), ci, yi] {
      const auto& g = yi->grad;
      for (std::size_t t = 0; t < impls.size(); ++t) {
        const auto& xi = impls[t];
        if (wants_grad(*xi)) axpy(ensure_grad(*xi), g, ci->data[t]);
        if (wants_grad(*ci)) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xi->data[i];
          ensure_grad(*ci)[t] += acc;
        }
      }
    });
  }
  return y;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.rank() == 2, "cross_entropy: logits must be [N,C]");
  const int N = logits.dim(0), C = logits.dim(1);
  require(static_cast<int>(labels.size()) == N, "cross_entropy: label count mismatch");
  for (int y : labels) {
    require(y >= 0 && y < C, "cross_entropy: label " + std::to_string(y) + " out of range");
  }
  std::vector<double> probs(logits.vec().size());
  const double* in = logits.data();
  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * C;
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) {
      const double e = std::exp(row[c] - mx);
      probs[static_cast<std::size_t>(i) * C + c] = e;
      z += e;
    }
    for (int c = 0; c < C; ++c) probs[static_cast<std::size_t>(i) * C + c] /= z;
    loss += mx + std::log(z) - row[labels[static_cast<std::size_t>(i)]];
  }
  Tensor y = Tensor::scalar(loss / N);
  check_finite(y, "cross_entropy");
  if (recording({&logits})) {
    auto li = logits.impl(), yi = y.impl();
    record("cross_entropy", y, [li, yi, labels, N, C, probs = std::move(probs)] {
      if (!wants_grad(*li)) return;
      auto& gl = ensure_grad(*li);
      const double g = yi->grad[0] / N;
      for (int i = 0; i < N; ++i) {
        for (int c = 0; c < C; ++c) {
          const std::size_t idx = static_cast<std::size_t>(i) * C + c;
          gl[idx] += g * (probs[idx] - (c == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
        }
      }
    });
  }
  return y;
}

Tensor global_to_token_attention(const Tensor& global_map, int h) {
  require(h >= 1, "global_to_token_attention: h must be >= 1");
  require(global_map.rank() == 2 && global_map.dim(0) == 2 * h && global_map.dim(1) == 2 * h,
          "global_to_token_attention: map must be [2h,2h] for h=" + std::to_string(h));
  const int n = h * h;
  const int G = 2 * h;
  std::vector<std::int64_t> src(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < h; ++j) {
      const int token = i * h + j;
      const int top = h - i, left = h - j;  // window top-left in the global map
      for (int a = 0; a < h; ++a) {
        for (int b = 0; b < h; ++b) {
          src[static_cast<std::size_t>(token) * n + a * h + b] =
              static_cast<std::int64_t>(top + a) * G + (left + b);
        }
      }
    }
  }
  std::vector<double> out(src.size());
  const double* in = global_map.data();
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = in[src[i]];
  Tensor y = Tensor::from_data({n, n}, std::move(out));
  if (recording({&global_map})) {
    auto mi = global_map.impl(), yi = y.impl();
    record("global_to_token_attention", y, [mi, yi, src = std::move(src)] {
      if (!wants_grad(*mi)) return;
      auto& gm = ensure_grad(*mi);
      const auto& g = yi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gm[static_cast<std::size_t>(src[i])] += g[i];
    });
  }
  return y;
}

}  // namespace lrva
