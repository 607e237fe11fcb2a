#include "pslab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pslab::ops {

namespace {

// ---- small dense kernels ------------------------------------------------
// Layouts are row-major. These are the hot loops of the library; they are
// written so the innermost loop runs over contiguous memory and
// auto-vectorizes.

// C[M,N] += A[M,K] * B[K,N]
void matmul_acc(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c) {
  for (int m = 0; m < m_dim; ++m) {
    double* crow = c + static_cast<std::int64_t>(m) * n_dim;
    const double* arow = a + static_cast<std::int64_t>(m) * k_dim;
    for (int k = 0; k < k_dim; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::int64_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// C[M,K] += A[M,N] * BT[N,K] with BT already transposed. The broadcast
// form keeps the inner loop free of reduction dependencies so it
// vectorizes; a plain row-dot variant runs several times slower here.
void matmul_abt_via_t(int m_dim, int k_dim, int n_dim, const double* a, const double* bt,
                      double* c) {
  for (int m = 0; m < m_dim; ++m) {
    const double* arow = a + static_cast<std::int64_t>(m) * n_dim;
    double* crow = c + static_cast<std::int64_t>(m) * k_dim;
    for (int n = 0; n < n_dim; ++n) {
      const double av = arow[n];
      if (av == 0.0) continue;
      const double* btrow = bt + static_cast<std::int64_t>(n) * k_dim;
      for (int k = 0; k < k_dim; ++k) crow[k] += av * btrow[k];
    }
  }
}

void transpose(int rows, int cols, const double* in, double* out) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[static_cast<std::int64_t>(c) * rows + r] =
        in[static_cast<std::int64_t>(r) * cols + c];
}

// C[K,N] += A[M,K]^T * B[M,N]  (i.e. C[k,n] += sum_m A[m,k] B[m,n])
void matmul_atb_acc(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c) {
  for (int m = 0; m < m_dim; ++m) {
    const double* arow = a + static_cast<std::int64_t>(m) * k_dim;
    const double* brow = b + static_cast<std::int64_t>(m) * n_dim;
    for (int k = 0; k < k_dim; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::int64_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

struct ConvDims {
  bool batched = false;
  int n = 1, ci = 0, h = 0, w = 0;
  int co = 0, k = 0, stride = 1, pad = 0;
  int ho = 0, wo = 0;
  std::int64_t in_size() const { return static_cast<std::int64_t>(ci) * h * w; }
  std::int64_t out_size() const { return static_cast<std::int64_t>(co) * ho * wo; }
  std::int64_t patch() const { return static_cast<std::int64_t>(ci) * k * k; }
  std::int64_t spatial_out() const { return static_cast<std::int64_t>(ho) * wo; }
};

ConvDims conv_dims(const char* op, const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                   int padding) {
  ConvDims d;
  PSLAB_CHECK_SHAPE(x.rank() == 3 || x.rank() == 4,
                    op << ": input must be [C,H,W] or [N,C,H,W], got " << shape_str(x.shape()));
  d.batched = x.rank() == 4;
  int off = d.batched ? 1 : 0;
  if (d.batched) d.n = x.dim(0);
  d.ci = x.dim(off);
  d.h = x.dim(off + 1);
  d.w = x.dim(off + 2);
  PSLAB_CHECK_SHAPE(w.rank() == 4 && w.dim(2) == w.dim(3),
                    op << ": weight must be [Co,Ci,k,k], got " << shape_str(w.shape()));
  d.co = w.dim(0);
  d.k = w.dim(2);
  PSLAB_CHECK_SHAPE(w.dim(1) == d.ci, op << ": weight expects " << w.dim(1) << " input channels, input has "
                                         << d.ci);
  PSLAB_CHECK_SHAPE(d.k % 2 == 1, op << ": kernel size must be odd, got " << d.k);
  PSLAB_CHECK_SHAPE(b.rank() == 1 && b.dim(0) == d.co,
                    op << ": bias must be [" << d.co << "], got " << shape_str(b.shape()));
  PSLAB_CHECK_SHAPE(stride >= 1 && padding >= 0, op << ": bad stride/padding");
  d.stride = stride;
  d.pad = padding;
  d.ho = (d.h + 2 * padding - d.k) / stride + 1;
  d.wo = (d.w + 2 * padding - d.k) / stride + 1;
  PSLAB_CHECK_SHAPE(d.h + 2 * padding >= d.k && d.w + 2 * padding >= d.k && d.ho >= 1 && d.wo >= 1,
                    op << ": non-positive output size for input " << shape_str(x.shape()));
  return d;
}

// col[(ci*k+ky)*k+kx][oy*wo+ox] = x[ci][oy*s-p+ky][ox*s-p+kx], zero outside.
void im2col(const double* x, const ConvDims& d, double* col) {
  const std::int64_t hw = d.spatial_out();
  for (int ci = 0; ci < d.ci; ++ci) {
    const double* xc = x + static_cast<std::int64_t>(ci) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        double* row = col + ((static_cast<std::int64_t>(ci) * d.k + ky) * d.k + kx) * hw;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          double* out = row + static_cast<std::int64_t>(oy) * d.wo;
          if (iy < 0 || iy >= d.h) {
            std::fill(out, out + d.wo, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::int64_t>(iy) * d.w;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            out[ox] = (ix >= 0 && ix < d.w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Patch matrix in transposed layout: colT[oy*wo+ox][(ci*k+ky)*k+kx].
void im2col_t(const double* x, const ConvDims& d, double* colt) {
  const std::int64_t patch = d.patch();
  for (int oy = 0; oy < d.ho; ++oy)
    for (int ox = 0; ox < d.wo; ++ox) {
      double* row = colt + (static_cast<std::int64_t>(oy) * d.wo + ox) * patch;
      std::int64_t idx = 0;
      for (int ci = 0; ci < d.ci; ++ci) {
        const double* xc = x + static_cast<std::int64_t>(ci) * d.h * d.w;
        for (int ky = 0; ky < d.k; ++ky) {
          const int iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) {
            for (int kx = 0; kx < d.k; ++kx) row[idx++] = 0.0;
            continue;
          }
          const double* xrow = xc + static_cast<std::int64_t>(iy) * d.w;
          for (int kx = 0; kx < d.k; ++kx) {
            const int ix = ox * d.stride - d.pad + kx;
            row[idx++] = (ix >= 0 && ix < d.w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
}

// Scatter-add of the col-layout gradient back to input layout.
void col2im_acc(const double* col, const ConvDims& d, double* gx) {
  const std::int64_t hw = d.spatial_out();
  for (int ci = 0; ci < d.ci; ++ci) {
    double* gc = gx + static_cast<std::int64_t>(ci) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const double* row = col + ((static_cast<std::int64_t>(ci) * d.k + ky) * d.k + kx) * hw;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          const double* in = row + static_cast<std::int64_t>(oy) * d.wo;
          double* grow = gc + static_cast<std::int64_t>(iy) * d.w;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) grow[ix] += in[ox];
          }
        }
      }
    }
  }
}

// Gather per-channel center values of each output window (zero when the
// center falls into the padding).
void gather_centers(const double* x, const ConvDims& d, double* xc) {
  const int c0 = (d.k - 1) / 2 - d.pad;
  for (int ci = 0; ci < d.ci; ++ci) {
    const double* xin = x + static_cast<std::int64_t>(ci) * d.h * d.w;
    double* out = xc + static_cast<std::int64_t>(ci) * d.spatial_out();
    for (int oy = 0; oy < d.ho; ++oy) {
      const int iy = oy * d.stride + c0;
      for (int ox = 0; ox < d.wo; ++ox) {
        const int ix = ox * d.stride + c0;
        out[static_cast<std::int64_t>(oy) * d.wo + ox] =
            (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                ? xin[static_cast<std::int64_t>(iy) * d.w + ix]
                : 0.0;
      }
    }
  }
}

void scatter_centers_acc(const double* gxc, const ConvDims& d, double* gx) {
  const int c0 = (d.k - 1) / 2 - d.pad;
  for (int ci = 0; ci < d.ci; ++ci) {
    const double* in = gxc + static_cast<std::int64_t>(ci) * d.spatial_out();
    double* gout = gx + static_cast<std::int64_t>(ci) * d.h * d.w;
    for (int oy = 0; oy < d.ho; ++oy) {
      const int iy = oy * d.stride + c0;
      if (iy < 0 || iy >= d.h) continue;
      for (int ox = 0; ox < d.wo; ++ox) {
        const int ix = ox * d.stride + c0;
        if (ix >= 0 && ix < d.w)
          gout[static_cast<std::int64_t>(iy) * d.w + ix] += in[static_cast<std::int64_t>(oy) * d.wo + ox];
      }
    }
  }
}

Tensor conv_forward(const Tensor& xv, const Tensor& wv, const Tensor& bv, const ConvDims& d,
                    double theta) {
  Shape out_shape = d.batched ? Shape{d.n, d.co, d.ho, d.wo} : Shape{d.co, d.ho, d.wo};
  Tensor y(out_shape);
  const std::int64_t hw = d.spatial_out();
  const std::int64_t patch = d.patch();
  std::vector<double> col(static_cast<size_t>(patch * hw));
  std::vector<double> xc;
  std::vector<double> wsum_scaled;
  if (theta != 0.0) {
    xc.resize(static_cast<size_t>(d.ci) * hw);
    wsum_scaled.assign(static_cast<size_t>(d.co) * d.ci, 0.0);
    for (int co = 0; co < d.co; ++co)
      for (int ci = 0; ci < d.ci; ++ci) {
        double s = 0.0;
        const double* taps = wv.data() + ((static_cast<std::int64_t>(co) * d.ci + ci) * d.k * d.k);
        for (int t = 0; t < d.k * d.k; ++t) s += taps[t];
        wsum_scaled[static_cast<size_t>(co) * d.ci + ci] = -theta * s;
      }
  }
  for (int n = 0; n < d.n; ++n) {
    const double* xn = xv.data() + n * d.in_size();
    double* yn = y.data() + n * d.out_size();
    im2col(xn, d, col.data());
    for (int co = 0; co < d.co; ++co)
      std::fill(yn + co * hw, yn + (co + 1) * hw, bv[co]);
    matmul_acc(d.co, static_cast<int>(patch), static_cast<int>(hw), wv.data(), col.data(), yn);
    if (theta != 0.0) {
      gather_centers(xn, d, xc.data());
      matmul_acc(d.co, d.ci, static_cast<int>(hw), wsum_scaled.data(), xc.data(), yn);
    }
  }
  return y;
}

Var conv_node(const char* name, Graph& g, Var x, Var w, Var b, int stride, int padding,
              double theta) {
  const ConvDims d = conv_dims(name, g.value(x), g.value(w), g.value(b), stride, padding);
  Tensor y = conv_forward(g.value(x), g.value(w), g.value(b), d, theta);
  auto backward = [x, w, b, d, theta](Graph& g, int self) {
    const std::vector<double>& gy = g.grad_buf(self);
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    const bool need_x = g.needs_grad(x);
    const bool need_w = g.needs_grad(w);
    const bool need_b = g.needs_grad(b);
    const std::int64_t hw = d.spatial_out();
    const std::int64_t patch = d.patch();

    std::vector<double> colt, gcol, xc, xct, gxc, wsum, sbuf;
    if (need_w) colt.resize(static_cast<size_t>(patch * hw));
    if (need_x) gcol.resize(static_cast<size_t>(patch * hw));
    if (theta != 0.0) {
      xc.resize(static_cast<size_t>(d.ci) * hw);
      if (need_x) {
        gxc.resize(static_cast<size_t>(d.ci) * hw);
        wsum.assign(static_cast<size_t>(d.co) * d.ci, 0.0);
        for (int co = 0; co < d.co; ++co)
          for (int ci = 0; ci < d.ci; ++ci) {
            double s = 0.0;
            const double* taps = wv.data() + ((static_cast<std::int64_t>(co) * d.ci + ci) * d.k * d.k);
            for (int t = 0; t < d.k * d.k; ++t) s += taps[t];
            wsum[static_cast<size_t>(co) * d.ci + ci] = s;
          }
      }
      if (need_w) {
        xct.resize(static_cast<size_t>(d.ci) * hw);
        sbuf.assign(static_cast<size_t>(d.co) * d.ci, 0.0);
      }
    }

    double* gw = need_w ? g.grad_buf(w.index).data() : nullptr;
    double* gb = need_b ? g.grad_buf(b.index).data() : nullptr;
    double* gx = need_x ? g.grad_buf(x.index).data() : nullptr;

    for (int n = 0; n < d.n; ++n) {
      const double* xn = xv.data() + n * d.in_size();
      const double* gyn = gy.data() + n * d.out_size();
      if (need_b) {
        for (int co = 0; co < d.co; ++co) {
          double acc = 0.0;
          const double* row = gyn + co * hw;
          for (std::int64_t i = 0; i < hw; ++i) acc += row[i];
          gb[co] += acc;
        }
      }
      if (need_w) {
        im2col_t(xn, d, colt.data());
        matmul_abt_via_t(d.co, static_cast<int>(patch), static_cast<int>(hw), gyn, colt.data(),
                         gw);
      }
      if (need_x) {
        std::fill(gcol.begin(), gcol.end(), 0.0);
        matmul_atb_acc(d.co, static_cast<int>(patch), static_cast<int>(hw), wv.data(), gyn,
                       gcol.data());
        col2im_acc(gcol.data(), d, gx + n * d.in_size());
      }
      if (theta != 0.0 && (need_w || need_x)) {
        gather_centers(xn, d, xc.data());
        if (need_w) {
          transpose(d.ci, static_cast<int>(hw), xc.data(), xct.data());
          matmul_abt_via_t(d.co, d.ci, static_cast<int>(hw), gyn, xct.data(), sbuf.data());
        }
        if (need_x) {
          std::fill(gxc.begin(), gxc.end(), 0.0);
          matmul_atb_acc(d.co, d.ci, static_cast<int>(hw), wsum.data(), gyn, gxc.data());
          for (double& v : gxc) v = -theta * v;
          scatter_centers_acc(gxc.data(), d, gx + n * d.in_size());
        }
      }
    }
    if (theta != 0.0 && need_w) {
      // d y / d w[co,ci,ky,kx] includes -theta * x_center for every tap.
      for (int co = 0; co < d.co; ++co)
        for (int ci = 0; ci < d.ci; ++ci) {
          const double s = -theta * sbuf[static_cast<size_t>(co) * d.ci + ci];
          double* taps = gw + ((static_cast<std::int64_t>(co) * d.ci + ci) * d.k * d.k);
          for (int t = 0; t < d.k * d.k; ++t) taps[t] += s;
        }
    }
  };
  return g.make_node(name, {x, w, b}, std::move(y), std::move(backward));
}

void accumulate_into(Graph& g, Var target, const double* src, std::int64_t count) {
  if (!g.needs_grad(target)) return;
  auto& dst = g.grad_buf(target.index);
  PSLAB_CHECK(static_cast<std::int64_t>(dst.size()) == count, "gradient size mismatch");
  for (std::int64_t i = 0; i < count; ++i) dst[i] += src[i];
}

double stable_sigmoid(double v) {
  if (v >= 0.0) {
    const double e = std::exp(-v);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  PSLAB_CHECK_SHAPE(av.same_shape(bv), "add: shape mismatch " << shape_str(av.shape()) << " vs "
                                                              << shape_str(bv.shape()));
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
  return g.make_node("add", {a, b}, std::move(y), [a, b](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    accumulate_into(g, a, gy.data(), static_cast<std::int64_t>(gy.size()));
    accumulate_into(g, b, gy.data(), static_cast<std::int64_t>(gy.size()));
  });
}

Var sub(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  PSLAB_CHECK_SHAPE(av.same_shape(bv), "sub: shape mismatch");
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] - bv[i];
  return g.make_node("sub", {a, b}, std::move(y), [a, b](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    accumulate_into(g, a, gy.data(), static_cast<std::int64_t>(gy.size()));
    if (g.needs_grad(b)) {
      auto& gb = g.grad_buf(b.index);
      for (size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  PSLAB_CHECK_SHAPE(av.same_shape(bv), "mul: shape mismatch");
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] * bv[i];
  return g.make_node("mul", {a, b}, std::move(y), [a, b](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.needs_grad(a)) {
      auto& ga = g.grad_buf(a.index);
      for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[static_cast<std::int64_t>(i)];
    }
    if (g.needs_grad(b)) {
      auto& gb = g.grad_buf(b.index);
      for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[static_cast<std::int64_t>(i)];
    }
  });
}

Var scale(Graph& g, Var a, double s) {
  const Tensor& av = g.value(a);
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] * s;
  return g.make_node("scale", {a}, std::move(y), [a, s](Graph& g, int self) {
    if (!g.needs_grad(a)) return;
    const auto& gy = g.grad_buf(self);
    auto& ga = g.grad_buf(a.index);
    for (size_t i = 0; i < gy.size(); ++i) ga[i] += s * gy[i];
  });
}

Var add_scalar(Graph& g, Var a, double c) {
  const Tensor& av = g.value(a);
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] + c;
  return g.make_node("add_scalar", {a}, std::move(y), [a](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    accumulate_into(g, a, gy.data(), static_cast<std::int64_t>(gy.size()));
  });
}

Var relu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return g.make_node("relu", {x}, std::move(y), [x](Graph& g, int self) {
    if (!g.needs_grad(x)) return;
    const auto& gy = g.grad_buf(self);
    const Tensor& xv = g.value(x);
    auto& gx = g.grad_buf(x.index);
    for (size_t i = 0; i < gy.size(); ++i)
      if (xv[static_cast<std::int64_t>(i)] > 0.0) gx[i] += gy[i];
  });
}

Var sigmoid(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = stable_sigmoid(xv[i]);
  Var out = g.make_node("sigmoid", {x}, std::move(y), [x](Graph& g, int self) {
    if (!g.needs_grad(x)) return;
    const auto& gy = g.grad_buf(self);
    const Tensor& yv = g.value(Var{self});
    auto& gx = g.grad_buf(x.index);
    for (size_t i = 0; i < gy.size(); ++i) {
      const double s = yv[static_cast<std::int64_t>(i)];
      gx[i] += gy[i] * s * (1.0 - s);
    }
  });
  return out;
}

Var sum(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double acc = 0.0;
  for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  return g.make_node("sum", {x}, Tensor({1}, {acc}), [x](Graph& g, int self) {
    if (!g.needs_grad(x)) return;
    const double gy = g.grad_buf(self)[0];
    auto& gx = g.grad_buf(x.index);
    for (double& v : gx) v += gy;
  });
}

Var mean(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double acc = 0.0;
  for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  const double inv = 1.0 / static_cast<double>(xv.numel());
  return g.make_node("mean", {x}, Tensor({1}, {acc * inv}), [x, inv](Graph& g, int self) {
    if (!g.needs_grad(x)) return;
    const double gy = g.grad_buf(self)[0] * inv;
    auto& gx = g.grad_buf(x.index);
    for (double& v : gx) v += gy;
  });
}

namespace {
Var reshape_copy(Graph& g, Var x, Shape shape, const char* name) {
  const Tensor& xv = g.value(x);
  PSLAB_CHECK_SHAPE(shape_numel(shape) == xv.numel(), name << ": element count mismatch");
  Tensor y(std::move(shape), xv.values());
  return g.make_node(name, {x}, std::move(y), [x](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    accumulate_into(g, x, gy.data(), static_cast<std::int64_t>(gy.size()));
  });
}
}  // namespace

Var flatten(Graph& g, Var x) {
  return reshape_copy(g, x, Shape{static_cast<int>(g.value(x).numel())}, "flatten");
}

Var flatten_batch(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  PSLAB_CHECK_SHAPE(xv.rank() >= 2, "flatten_batch: rank must be >= 2");
  const int n = xv.dim(0);
  return reshape_copy(g, x, Shape{n, static_cast<int>(xv.numel() / n)}, "flatten_batch");
}

Var reshape(Graph& g, Var x, Shape shape) { return reshape_copy(g, x, std::move(shape), "reshape"); }

Var concat(Graph& g, const std::vector<Var>& parts) {
  PSLAB_CHECK_SHAPE(!parts.empty(), "concat: no inputs");
  const int rank = g.value(parts[0]).rank();
  PSLAB_CHECK_SHAPE(rank == 1 || rank == 2, "concat: parts must be rank 1 or 2");
  int lead = rank == 2 ? g.value(parts[0]).dim(0) : 1;
  int total = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    PSLAB_CHECK_SHAPE(t.rank() == rank, "concat: mixed ranks");
    PSLAB_CHECK_SHAPE(rank == 1 || t.dim(0) == lead, "concat: leading dimension mismatch");
    total += t.dim(rank - 1);
  }
  Shape out_shape = rank == 2 ? Shape{lead, total} : Shape{total};
  Tensor y(out_shape);
  std::vector<int> offsets;
  int off = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    const int d = t.dim(rank - 1);
    offsets.push_back(off);
    for (int n = 0; n < lead; ++n)
      std::memcpy(y.data() + static_cast<std::int64_t>(n) * total + off,
                  t.data() + static_cast<std::int64_t>(n) * d, static_cast<size_t>(d) * 8);
    off += d;
  }
  auto backward = [parts, offsets, total, lead](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    for (size_t i = 0; i < parts.size(); ++i) {
      if (!g.needs_grad(parts[i])) continue;
      const Tensor& t = g.value(parts[i]);
      const int d = t.dim(t.rank() - 1);
      auto& gp = g.grad_buf(parts[i].index);
      for (int n = 0; n < lead; ++n)
        for (int j = 0; j < d; ++j)
          gp[static_cast<size_t>(n) * d + j] +=
              gy[static_cast<size_t>(n) * total + offsets[i] + j];
    }
  };
  return g.make_node("concat", parts, std::move(y), std::move(backward));
}

Var linear(Graph& g, Var x, Var w, Var b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(b);
  PSLAB_CHECK_SHAPE(xv.rank() == 1 || xv.rank() == 2,
                    "linear: input must be [D] or [N,D], got " << shape_str(xv.shape()));
  const bool batched = xv.rank() == 2;
  const int n = batched ? xv.dim(0) : 1;
  const int d = xv.dim(batched ? 1 : 0);
  PSLAB_CHECK_SHAPE(wv.rank() == 2 && wv.dim(1) == d,
                    "linear: weight " << shape_str(wv.shape()) << " incompatible with input dim " << d);
  const int m = wv.dim(0);
  PSLAB_CHECK_SHAPE(bv.rank() == 1 && bv.dim(0) == m, "linear: bias shape mismatch");
  Tensor y(batched ? Shape{n, m} : Shape{m});
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.data() + static_cast<std::int64_t>(i) * d;
    double* yi = y.data() + static_cast<std::int64_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* wj = wv.data() + static_cast<std::int64_t>(j) * d;
      double acc = bv[j];
      for (int t = 0; t < d; ++t) acc += xi[t] * wj[t];
      yi[j] = acc;
    }
  }
  auto backward = [x, w, b, n, d, m](Graph& g, int self) {
    const auto& gy = g.grad_buf(self);
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    if (g.needs_grad(b)) {
      auto& gb = g.grad_buf(b.index);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) gb[static_cast<size_t>(j)] += gy[static_cast<size_t>(i) * m + j];
    }
    if (g.needs_grad(w)) {
      auto& gw = g.grad_buf(w.index);
      matmul_atb_acc(n, m, d, gy.data(), xv.data(), gw.data());
    }
    if (g.needs_grad(x)) {
      auto& gx = g.grad_buf(x.index);
      matmul_acc(n, m, d, gy.data(), wv.data(), gx.data());
    }
  };
  return g.make_node("linear", {x, w, b}, std::move(y), std::move(backward));
}

Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding) {
  return conv_node("conv2d", g, x, w, b, stride, padding, 0.0);
}

Var cdc_conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding, CdcTheta theta) {
  if (theta.value() == 0.0) return conv2d(g, x, w, b, stride, padding);
  return conv_node("cdc_conv2d", g, x, w, b, stride, padding, theta.value());
}

Var avgpool2d(Graph& g, Var x, int kernel, int stride) {
  const Tensor& xv = g.value(x);
  PSLAB_CHECK_SHAPE(xv.rank() == 3 || xv.rank() == 4,
                    "avgpool2d: input must be [C,H,W] or [N,C,H,W]");
  PSLAB_CHECK_SHAPE(kernel >= 1 && kernel == stride,
                    "avgpool2d: kernel (" << kernel << ") must equal stride (" << stride << ")");
  const bool batched = xv.rank() == 4;
  const int n = batched ? xv.dim(0) : 1;
  const int c = xv.dim(batched ? 1 : 0);
  const int h = xv.dim(batched ? 2 : 1);
  const int w = xv.dim(batched ? 3 : 2);
  PSLAB_CHECK_SHAPE(h % stride == 0 && w % stride == 0,
                    "avgpool2d: spatial size " << h << "x" << w << " not divisible by stride " << stride);
  const int ho = h / stride, wo = w / stride;
  Tensor y(batched ? Shape{n, c, ho, wo} : Shape{c, ho, wo});
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* xin = xv.data() + p * h * w;
    double* yout = y.data() + p * ho * wo;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < kernel; ++ky) {
          const double* row = xin + static_cast<std::int64_t>(oy * kernel + ky) * w + ox * kernel;
          for (int kx = 0; kx < kernel; ++kx) acc += row[kx];
        }
        yout[static_cast<std::int64_t>(oy) * wo + ox] = acc * inv;
      }
  }
  auto backward = [x, kernel, planes, h, w, ho, wo, inv](Graph& g, int self) {
    if (!g.needs_grad(x)) return;
    const auto& gy = g.grad_buf(self);
    auto& gx = g.grad_buf(x.index);
    for (std::int64_t p = 0; p < planes; ++p) {
      const double* gin = gy.data() + p * ho * wo;
      double* gout = gx.data() + p * h * w;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const double v = gin[static_cast<std::int64_t>(oy) * wo + ox] * inv;
          for (int ky = 0; ky < kernel; ++ky) {
            double* row = gout + static_cast<std::int64_t>(oy * kernel + ky) * w + ox * kernel;
            for (int kx = 0; kx < kernel; ++kx) row[kx] += v;
          }
        }
    }
  };
  return g.make_node("avgpool2d", {x}, std::move(y), std::move(backward));
}

Var bce(Graph& g, Var pred, Tensor target, Reduction reduction, double eps) {
  PSLAB_CHECK_SHAPE(g.value(pred).same_shape(target),
                    "bce: prediction " << shape_str(g.value(pred).shape()) << " vs target "
                                       << shape_str(target.shape()));
  Var t = g.constant(std::move(target));
  const Tensor& pv = g.value(pred);
  const Tensor& tv = g.value(t);
  const std::int64_t n = pv.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(pv[i], eps, 1.0 - eps);
    acc -= tv[i] * std::log(p) + (1.0 - tv[i]) * std::log1p(-p);
  }
  const double norm = reduction == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
  auto backward = [pred, t, eps, norm](Graph& g, int self) {
    if (!g.needs_grad(pred)) return;
    const double gy = g.grad_buf(self)[0] * norm;
    const Tensor& pv = g.value(pred);
    const Tensor& tv = g.value(t);
    auto& gp = g.grad_buf(pred.index);
    for (size_t i = 0; i < gp.size(); ++i) {
      const double p = pv[static_cast<std::int64_t>(i)];
      if (p < eps || p > 1.0 - eps) continue;  // clamped: locally flat
      gp[i] += gy * (-tv[static_cast<std::int64_t>(i)] / p +
                     (1.0 - tv[static_cast<std::int64_t>(i)]) / (1.0 - p));
    }
  };
  return g.make_node("bce", {pred, t}, Tensor({1}, {acc * norm}), std::move(backward));
}

Var mse(Graph& g, Var pred, Tensor target) {
  PSLAB_CHECK_SHAPE(g.value(pred).same_shape(target),
                    "mse: shape mismatch " << shape_str(g.value(pred).shape()) << " vs "
                                           << shape_str(target.shape()));
  Var t = g.constant(std::move(target));
  const Tensor& pv = g.value(pred);
  const Tensor& tv = g.value(t);
  const std::int64_t n = pv.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(n);
  auto backward = [pred, t, inv](Graph& g, int self) {
    if (!g.needs_grad(pred)) return;
    const double gy = g.grad_buf(self)[0] * 2.0 * inv;
    const Tensor& pv = g.value(pred);
    const Tensor& tv = g.value(t);
    auto& gp = g.grad_buf(pred.index);
    for (size_t i = 0; i < gp.size(); ++i)
      gp[i] += gy * (pv[static_cast<std::int64_t>(i)] - tv[static_cast<std::int64_t>(i)]);
  };
  return g.make_node("mse", {pred, t}, Tensor({1}, {acc * inv}), std::move(backward));
}

namespace {
constexpr int kDirs[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
}

Var cdl(Graph& g, Var pred, Tensor target) {
  PSLAB_CHECK_SHAPE(g.value(pred).same_shape(target), "cdl: shape mismatch");
  PSLAB_CHECK_SHAPE(g.value(pred).rank() >= 2, "cdl: need at least a 2-d map");
  Var t = g.constant(std::move(target));
  const Tensor& pv = g.value(pred);
  const Tensor& tv = g.value(t);
  const int h = pv.dim(pv.rank() - 2);
  const int w = pv.dim(pv.rank() - 1);
  PSLAB_CHECK_SHAPE(h >= 3 && w >= 3, "cdl: map too small (" << h << "x" << w << ")");
  const std::int64_t maps = pv.numel() / (static_cast<std::int64_t>(h) * w);
  const std::int64_t valid = static_cast<std::int64_t>(h - 2) * (w - 2);
  const double inv = 1.0 / static_cast<double>(maps * valid);
  double acc = 0.0;
  for (std::int64_t m = 0; m < maps; ++m) {
    const double* p = pv.data() + m * h * w;
    const double* q = tv.data() + m * h * w;
    for (const auto& dir : kDirs) {
      const int off = dir[0] * w + dir[1];
      for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
          const std::int64_t c = static_cast<std::int64_t>(y) * w + x;
          const double d = (p[c + off] - p[c]) - (q[c + off] - q[c]);
          acc += d * d;
        }
    }
  }
  auto backward = [pred, t, h, w, maps, inv](Graph& g, int self) {
    if (!g.needs_grad(pred)) return;
    const double gy = g.grad_buf(self)[0] * 2.0 * inv;
    const Tensor& pv = g.value(pred);
    const Tensor& tv = g.value(t);
    auto& gp = g.grad_buf(pred.index);
    for (std::int64_t m = 0; m < maps; ++m) {
      const double* p = pv.data() + m * h * w;
      const double* q = tv.data() + m * h * w;
      double* gpm = gp.data() + m * h * w;
      for (const auto& dir : kDirs) {
        const int off = dir[0] * w + dir[1];
        for (int y = 1; y < h - 1; ++y)
          for (int x = 1; x < w - 1; ++x) {
            const std::int64_t c = static_cast<std::int64_t>(y) * w + x;
            const double d = gy * ((p[c + off] - p[c]) - (q[c + off] - q[c]));
            gpm[c + off] += d;
            gpm[c] -= d;
          }
      }
    }
  };
  return g.make_node("cdl", {pred, t}, Tensor({1}, {acc * inv}), std::move(backward));
}

}  // namespace pslab::ops
