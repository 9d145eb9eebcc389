#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "gpte/error.hpp"
#include "gpte/gemm.hpp"
#include "gpte/tape.hpp"

namespace gpte {

namespace {

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape()) {
    throw UsageError(std::string(op) + ": operands belong to different tapes");
  }
}

std::vector<std::size_t> leading_dims(const std::vector<std::size_t>& shape, std::size_t keep_last) {
  return {shape.begin(), shape.end() - static_cast<std::ptrdiff_t>(keep_last)};
}

// gelu(x) with the 0.044715 tanh approximation; writes tanh(u) into aux.
inline double gelu_forward(double x, double& t) {
  constexpr double kRoot2OverPi = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kCubic = 0.044715;
  t = std::tanh(kRoot2OverPi * (x + kCubic * x * x * x));
  return 0.5 * x * (1.0 + t);
}

inline double gelu_backward(double x, double t) {
  constexpr double kRoot2OverPi = 0.7978845608028654;
  constexpr double kCubic = 0.044715;
  const double du = kRoot2OverPi * (1.0 + 3.0 * kCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  require_same_tape(a, b, "matmul");
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || bv.rank() < 2) {
    throw ShapeError("matmul: operands must have rank >= 2: " + shape_str(av.shape()) +
                     " x " + shape_str(bv.shape()));
  }
  const std::size_t a_rows = av.dim(av.rank() - 2), a_cols = av.dim(av.rank() - 1);
  const std::size_t b_rows = bv.dim(bv.rank() - 2), b_cols = bv.dim(bv.rank() - 1);
  const std::size_t m = trans_a ? a_cols : a_rows;
  const std::size_t k = trans_a ? a_rows : a_cols;
  const std::size_t k2 = trans_b ? b_cols : b_rows;
  const std::size_t n = trans_b ? b_rows : b_cols;
  const auto a_batch = leading_dims(av.shape(), 2);
  const auto b_batch = leading_dims(bv.shape(), 2);
  if (k != k2 || a_batch != b_batch) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  const std::size_t batches = shape_size(a_batch);

  std::vector<std::size_t> out_shape = a_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(std::move(out_shape));
  for (std::size_t s = 0; s < batches; ++s) {
    detail::gemm(trans_a, trans_b, m, n, k, av.data() + s * a_rows * a_cols,
                 bv.data() + s * b_rows * b_cols, out.data() + s * m * n, false);
  }
  out.ensure_finite("matmul");

  const int aid = a.id(), bid = b.id();
  return tape.push(std::move(out), {aid, bid},
                   [aid, bid, trans_a, trans_b, m, n, k, a_rows, a_cols, b_rows, b_cols,
                    batches](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    const Tensor& a_val = t.node_value(aid);
    const Tensor& b_val = t.node_value(bid);
    if (Tensor* ga = t.grad_buffer(aid)) {
      for (std::size_t s = 0; s < batches; ++s) {
        const double* gc = grad_out.data() + s * m * n;
        const double* bp = b_val.data() + s * b_rows * b_cols;
        double* gp = ga->data() + s * a_rows * a_cols;
        if (!trans_a) {
          detail::gemm(false, !trans_b, m, k, n, gc, bp, gp, true);
        } else {
          detail::gemm(trans_b, true, k, m, n, bp, gc, gp, true);
        }
      }
    }
    if (Tensor* gb = t.grad_buffer(bid)) {
      for (std::size_t s = 0; s < batches; ++s) {
        const double* gc = grad_out.data() + s * m * n;
        const double* ap = a_val.data() + s * a_rows * a_cols;
        double* gp = gb->data() + s * b_rows * b_cols;
        if (!trans_b) {
          detail::gemm(!trans_a, false, k, n, m, ap, gc, gp, true);
        } else {
          detail::gemm(true, trans_a, n, k, m, gc, ap, gp, true);
        }
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b, "add");
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ShapeError("add: shapes differ: " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  Tensor out = Tensor::zeros(av.shape());
  const double* pa = av.data();
  const double* pb = bv.data();
  double* po = out.data();
  for (std::size_t i = 0, nel = out.size(); i < nel; ++i) po[i] = pa[i] + pb[i];
  out.ensure_finite("add");

  const int aid = a.id(), bid = b.id();
  return tape.push(std::move(out), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    t.add_grad(aid, grad_out);
    t.add_grad(bid, grad_out);
  });
}

Var add_broadcast(const Var& x, const Var& y) {
  require_same_tape(x, y, "add_broadcast");
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  const auto& xs = xv.shape();
  const auto& ys = yv.shape();
  if (ys.size() > xs.size() ||
      !std::equal(ys.begin(), ys.end(), xs.end() - static_cast<std::ptrdiff_t>(ys.size()))) {
    throw ShapeError("add_broadcast: " + shape_str(ys) + " is not a trailing suffix of " +
                     shape_str(xs));
  }
  const std::size_t inner = yv.size();
  const std::size_t reps = xv.size() / std::max<std::size_t>(inner, 1);
  Tensor out = Tensor::zeros(xs);
  const double* px = xv.data();
  const double* py = yv.data();
  double* po = out.data();
  for (std::size_t r = 0; r < reps; ++r) {
    const double* xr = px + r * inner;
    double* orow = po + r * inner;
    for (std::size_t i = 0; i < inner; ++i) orow[i] = xr[i] + py[i];
  }
  out.ensure_finite("add_broadcast");

  const int xid = x.id(), yid = y.id();
  return tape.push(std::move(out), {xid, yid}, [xid, yid, inner, reps](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    t.add_grad(xid, grad_out);
    if (Tensor* gy = t.grad_buffer(yid)) {
      double* gp = gy->data();
      const double* go = grad_out.data();
      for (std::size_t r = 0; r < reps; ++r) {
        const double* row = go + r * inner;
        for (std::size_t i = 0; i < inner; ++i) gp[i] += row[i];
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b, "mul");
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ShapeError("mul: shapes differ: " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  Tensor out = Tensor::zeros(av.shape());
  const double* pa = av.data();
  const double* pb = bv.data();
  double* po = out.data();
  for (std::size_t i = 0, nel = out.size(); i < nel; ++i) po[i] = pa[i] * pb[i];
  out.ensure_finite("mul");

  const int aid = a.id(), bid = b.id();
  return tape.push(std::move(out), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    const double* go = grad_out.data();
    const std::size_t nel = grad_out.size();
    if (Tensor* ga = t.grad_buffer(aid)) {
      const double* pb = t.node_value(bid).data();
      double* gp = ga->data();
      for (std::size_t i = 0; i < nel; ++i) gp[i] += go[i] * pb[i];
    }
    if (Tensor* gb = t.grad_buffer(bid)) {
      const double* pa = t.node_value(aid).data();
      double* gp = gb->data();
      for (std::size_t i = 0; i < nel; ++i) gp[i] += go[i] * pa[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(xv.shape());
  const double* px = xv.data();
  double* po = out.data();
  for (std::size_t i = 0, nel = out.size(); i < nel; ++i) po[i] = px[i] * factor;
  out.ensure_finite("scale");

  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid, factor](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      double* gp = gx->data();
      for (std::size_t i = 0, nel = grad_out.size(); i < nel; ++i) gp[i] += go[i] * factor;
    }
  });
}

Var softmax_rows(const Var& x) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  if (xv.rank() < 1 || xv.shape().back() < 1) {
    throw ShapeError("softmax_rows: last dim must be >= 1, shape is " + shape_str(xv.shape()));
  }
  const std::size_t width = xv.shape().back();
  const std::size_t rows = xv.size() / width;
  Tensor out = Tensor::zeros(xv.shape());
  const double* px = xv.data();
  double* po = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = px + r * width;
    double* orow = po + r * width;
    double peak = xr[0];
    for (std::size_t i = 1; i < width; ++i) peak = std::max(peak, xr[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      orow[i] = std::exp(xr[i] - peak);
      total += orow[i];
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < width; ++i) orow[i] *= inv;
  }
  out.ensure_finite("softmax_rows");

  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid, width, rows](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    const Tensor& y = t.node_value(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      const double* py = y.data();
      double* gp = gx->data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = go + r * width;
        const double* yrow = py + r * width;
        double* dst = gp + r * width;
        double dot = 0.0;
        for (std::size_t i = 0; i < width; ++i) dot += grow[i] * yrow[i];
        for (std::size_t i = 0; i < width; ++i) dst[i] += yrow[i] * (grow[i] - dot);
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  if (eps <= 0.0) throw UsageError("layer_norm: eps must be positive");
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  const std::size_t width = xv.shape().back();
  if (gv.shape() != std::vector<std::size_t>{width} || !gv.same_shape(bv)) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(width) + "], got " +
                     shape_str(gv.shape()) + " and " + shape_str(bv.shape()));
  }
  const std::size_t rows = xv.size() / width;
  Tensor out = Tensor::zeros(xv.shape());
  const double* px = xv.data();
  const double* pg = gv.data();
  const double* pb = bv.data();
  double* po = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = px + r * width;
    double* orow = po + r * width;
    double mean = 0.0;
    for (std::size_t i = 0; i < width; ++i) mean += xr[i];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      const double d = xr[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(width);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) {
      orow[i] = pg[i] * ((xr[i] - mean) * inv) + pb[i];
    }
  }
  out.ensure_finite("layer_norm");

  const int xid = x.id(), gid = gain.id(), bid = bias.id();
  return tape.push(std::move(out), {xid, gid, bid},
                   [xid, gid, bid, width, rows, eps](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    const Tensor& x_val = t.node_value(xid);
    const Tensor& g_val = t.node_value(gid);
    const double* go = grad_out.data();
    const double* px = x_val.data();
    const double* pg = g_val.data();
    Tensor* gx = t.grad_buffer(xid);
    Tensor* gg = t.grad_buffer(gid);
    Tensor* gb = t.grad_buffer(bid);
    std::vector<double> xhat(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = px + r * width;
      const double* grow = go + r * width;
      double mean = 0.0;
      for (std::size_t i = 0; i < width; ++i) mean += xr[i];
      mean /= static_cast<double>(width);
      double var = 0.0;
      for (std::size_t i = 0; i < width; ++i) {
        const double d = xr[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(width);
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < width; ++i) xhat[i] = (xr[i] - mean) * inv;
      if (gx) {
        double mean_g = 0.0, mean_gx = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
          const double gi = grow[i] * pg[i];
          mean_g += gi;
          mean_gx += gi * xhat[i];
        }
        mean_g /= static_cast<double>(width);
        mean_gx /= static_cast<double>(width);
        double* dst = gx->data() + r * width;
        for (std::size_t i = 0; i < width; ++i) {
          const double gi = grow[i] * pg[i];
          dst[i] += inv * (gi - mean_g - xhat[i] * mean_gx);
        }
      }
      if (gg) {
        double* dst = gg->data();
        for (std::size_t i = 0; i < width; ++i) dst[i] += grow[i] * xhat[i];
      }
      if (gb) {
        double* dst = gb->data();
        for (std::size_t i = 0; i < width; ++i) dst[i] += grow[i];
      }
    }
  });
}

Var activation(const Var& x, ActivationKind kind) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(xv.shape());
  const double* px = xv.data();
  double* po = out.data();
  const std::size_t nel = out.size();
  const int xid = x.id();

  if (kind == ActivationKind::kRelu) {
    for (std::size_t i = 0; i < nel; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
    out.ensure_finite("relu");
    return tape.push(std::move(out), {xid}, [xid](Tape& t, int self) {
      const Tensor& grad_out = *t.grad_buffer(self);
      if (Tensor* gx = t.grad_buffer(xid)) {
        const double* go = grad_out.data();
        const double* pin = t.node_value(xid).data();
        double* gp = gx->data();
        for (std::size_t i = 0, n = grad_out.size(); i < n; ++i) {
          if (pin[i] > 0.0) gp[i] += go[i];
        }
      }
    });
  }

  // gelu: cache tanh(u) so backward avoids recomputing the transcendental.
  Tensor tanh_u = Tensor::zeros(xv.shape());
  double* pt = tanh_u.data();
  for (std::size_t i = 0; i < nel; ++i) po[i] = gelu_forward(px[i], pt[i]);
  out.ensure_finite("gelu");
  return tape.push(std::move(out), {xid}, [xid, aux = std::move(tanh_u)](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      const double* pin = t.node_value(xid).data();
      const double* pt2 = aux.data();
      double* gp = gx->data();
      for (std::size_t i = 0, n = grad_out.size(); i < n; ++i) {
        gp[i] += go[i] * gelu_backward(pin[i], pt2[i]);
      }
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets) {
  Tape& tape = *logits.tape();
  const Tensor& lv = logits.value();
  if (lv.rank() < 2) {
    throw ShapeError("cross_entropy: logits must have rank >= 2, shape is " +
                     shape_str(lv.shape()));
  }
  const std::size_t vocab = lv.shape().back();
  const std::size_t rows = lv.size() / vocab;
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  for (std::int32_t id : targets) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError("cross_entropy: target id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(vocab));
    }
  }

  // Keep the softmax probabilities for the backward pass.
  Tensor probs = Tensor::zeros(lv.shape());
  const double* pl = lv.data();
  double* pp = probs.data();
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = pl + r * vocab;
    double* prow = pp + r * vocab;
    double peak = row[0];
    for (std::size_t i = 1; i < vocab; ++i) peak = std::max(peak, row[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) {
      prow[i] = std::exp(row[i] - peak);
      total += prow[i];
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < vocab; ++i) prow[i] *= inv;
    const double lse = peak + std::log(total);
    loss += lse - row[targets[r]];
  }
  loss /= static_cast<double>(rows);

  Tensor out = Tensor::scalar(loss);
  out.ensure_finite("cross_entropy");
  const int lid = logits.id();
  std::vector<std::int32_t> targets_copy(targets.begin(), targets.end());
  return tape.push(std::move(out), {lid},
                   [lid, vocab, rows, probs = std::move(probs),
                    targets_copy = std::move(targets_copy)](Tape& t, int self) {
    const double upstream = t.grad_buffer(self)->item();
    if (Tensor* gl = t.grad_buffer(lid)) {
      const double unit = upstream / static_cast<double>(rows);
      const double* pp2 = probs.data();
      double* gp = gl->data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* prow = pp2 + r * vocab;
        double* grow = gp + r * vocab;
        for (std::size_t i = 0; i < vocab; ++i) grow[i] += unit * prow[i];
        grow[targets_copy[r]] -= unit;
      }
    }
  });
}

Var dropout(const Var& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;

  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask = Tensor::zeros(xv.shape());
  Tensor out = Tensor::zeros(xv.shape());
  const double* px = xv.data();
  double* pm = mask.data();
  double* po = out.data();
  for (std::size_t i = 0, nel = out.size(); i < nel; ++i) {
    pm[i] = rng.next_double() < rate ? 0.0 : keep_scale;
    po[i] = px[i] * pm[i];
  }
  out.ensure_finite("dropout");

  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid, mask = std::move(mask)](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      const double* pm2 = mask.data();
      double* gp = gx->data();
      for (std::size_t i = 0, n = grad_out.size(); i < n; ++i) gp[i] += go[i] * pm2[i];
    }
  });
}

Var embedding_lookup(const Var& table, std::span<const std::int32_t> ids) {
  Tape& tape = *table.tape();
  const Tensor& tv = table.value();
  if (tv.rank() != 2) {
    throw ShapeError("embedding_lookup: table must be rank 2, shape is " + shape_str(tv.shape()));
  }
  const std::size_t vocab = tv.dim(0);
  const std::size_t width = tv.dim(1);
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError("embedding_lookup: token id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  Tensor out = Tensor::zeros({ids.size(), width});
  const double* pt = tv.data();
  double* po = out.data();
  for (std::size_t n = 0; n < ids.size(); ++n) {
    std::memcpy(po + n * width, pt + static_cast<std::size_t>(ids[n]) * width,
                width * sizeof(double));
  }
  out.ensure_finite("embedding_lookup");

  const int tid = table.id();
  std::vector<std::int32_t> ids_copy(ids.begin(), ids.end());
  return tape.push(std::move(out), {tid},
                   [tid, width, ids_copy = std::move(ids_copy)](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gt = t.grad_buffer(tid)) {
      const double* go = grad_out.data();
      double* gp = gt->data();
      for (std::size_t n = 0; n < ids_copy.size(); ++n) {
        double* dst = gp + static_cast<std::size_t>(ids_copy[n]) * width;
        const double* src = go + n * width;
        for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
      }
    }
  });
}

Var narrow_rows(const Var& x, std::size_t start, std::size_t len) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  if (xv.rank() < 1 || start + len > xv.dim(0)) {
    throw ShapeError("narrow_rows: slice [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds shape " + shape_str(xv.shape()));
  }
  const std::size_t row_size = xv.size() / xv.dim(0);
  std::vector<std::size_t> out_shape = xv.shape();
  out_shape[0] = len;
  Tensor out = Tensor::zeros(out_shape);
  std::memcpy(out.data(), xv.data() + start * row_size, len * row_size * sizeof(double));

  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid, start, row_size](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      double* gp = gx->data() + start * row_size;
      for (std::size_t i = 0, n = grad_out.size(); i < n; ++i) gp[i] += go[i];
    }
  });
}

Var reshape(const Var& x, std::vector<std::size_t> new_shape) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  if (shape_size(new_shape) != xv.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(xv.shape()) + " as " +
                     shape_str(new_shape));
  }
  Tensor out = Tensor::from(std::move(new_shape),
                            std::vector<double>(xv.data(), xv.data() + xv.size()));
  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      const double* go = grad_out.data();
      double* gp = gx->data();
      for (std::size_t i = 0, n = grad_out.size(); i < n; ++i) gp[i] += go[i];
    }
  });
}

namespace {

// out[idx] = in[perm applied to idx]; out_shape[i] = in_shape[perm[i]].
Tensor permute_copy(const Tensor& in, const std::vector<std::size_t>& perm) {
  const auto& shape = in.shape();
  const std::size_t rank = shape.size();
  std::vector<std::size_t> out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = shape[perm[i]];
  Tensor out = Tensor::zeros(out_shape);

  // The model's fast path: swap the middle axes of a rank-4 tensor.
  if (rank == 4 && perm == std::vector<std::size_t>{0, 2, 1, 3}) {
    const std::size_t d0 = shape[0], d1 = shape[1], d2 = shape[2], d3 = shape[3];
    const double* pi = in.data();
    double* po = out.data();
    for (std::size_t a = 0; a < d0; ++a) {
      for (std::size_t b = 0; b < d1; ++b) {
        for (std::size_t c = 0; c < d2; ++c) {
          std::memcpy(po + ((a * d2 + c) * d1 + b) * d3, pi + ((a * d1 + b) * d2 + c) * d3,
                      d3 * sizeof(double));
        }
      }
    }
    return out;
  }

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * shape[i];
  std::vector<std::size_t> out_index(rank, 0);
  const double* pi = in.data();
  double* po = out.data();
  for (std::size_t flat = 0, n = out.size(); flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += out_index[i] * in_strides[perm[i]];
    po[flat] = pi[src];
    for (std::size_t i = rank; i-- > 0;) {
      if (++out_index[i] < out_shape[i]) break;
      out_index[i] = 0;
    }
  }
  return out;
}

}  // namespace

Var permute(const Var& x, std::vector<std::size_t> perm) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const std::size_t rank = xv.rank();
  std::vector<bool> seen(rank, false);
  if (perm.size() != rank) {
    throw ShapeError("permute: permutation rank " + std::to_string(perm.size()) +
                     " does not match shape " + shape_str(xv.shape()));
  }
  for (std::size_t axis : perm) {
    if (axis >= rank || seen[axis]) {
      throw ShapeError("permute: invalid permutation for shape " + shape_str(xv.shape()));
    }
    seen[axis] = true;
  }

  Tensor out = permute_copy(xv, perm);
  std::vector<std::size_t> inverse(rank);
  for (std::size_t i = 0; i < rank; ++i) inverse[perm[i]] = i;

  const int xid = x.id();
  return tape.push(std::move(out), {xid},
                   [xid, inverse = std::move(inverse)](Tape& t, int self) {
    const Tensor& grad_out = *t.grad_buffer(self);
    if (Tensor* gx = t.grad_buffer(xid)) {
      Tensor back = permute_copy(grad_out, inverse);
      const double* go = back.data();
      double* gp = gx->data();
      for (std::size_t i = 0, n = back.size(); i < n; ++i) gp[i] += go[i];
    }
  });
}

Var sum(const Var& x) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  double total = 0.0;
  for (std::size_t i = 0, n = xv.size(); i < n; ++i) total += xv[i];
  Tensor out = Tensor::scalar(total);
  out.ensure_finite("sum");

  const int xid = x.id();
  return tape.push(std::move(out), {xid}, [xid](Tape& t, int self) {
    const double upstream = t.grad_buffer(self)->item();
    if (Tensor* gx = t.grad_buffer(xid)) {
      double* gp = gx->data();
      for (std::size_t i = 0, n = gx->size(); i < n; ++i) gp[i] += upstream;
    }
  });
}

}  // namespace gpte
