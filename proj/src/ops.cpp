#include "senc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace senc::ad {

namespace {

Tensor emit(Shape shape, std::vector<double> values, Tape* tp,
            std::function<void(Tape&, int)> fn) {
  if (!tp) return Tensor::constant(std::move(shape), std::move(values));
  const int id = tp->fresh_node(static_cast<int64_t>(values.size()));
  Tensor out = Tensor::make(std::move(shape), std::move(values), tp, id);
  tp->set_backward_fn(id, [fn = std::move(fn), id](Tape& t) { fn(t, id); });
  return out;
}

void axpy(std::vector<double>& dst, double a, std::span<const double> src) {
  for (size_t i = 0; i < src.size(); ++i) dst[i] += a * src[i];
}

enum class Bcast { Equal, AScalar, BScalar };

Bcast bcast_mode(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.shape() == b.shape()) return Bcast::Equal;
  if (a.size() == 1) return Bcast::AScalar;
  if (b.size() == 1) return Bcast::BScalar;
  throw DimensionError(std::string(opname) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " are neither equal nor scalar-broadcastable");
}

// Shared skeleton for binary elementwise ops with the restricted broadcast
// rule. fwd(x, y) gives the value; dfa/dfb give local partials.
template <typename F, typename Da, typename Db>
Tensor binary_ew(const Tensor& a, const Tensor& b, const char* opname, F fwd, Da dfa, Db dfb) {
  const Bcast mode = bcast_mode(a, b, opname);
  const size_t n = static_cast<size_t>(std::max(a.size(), b.size()));
  std::vector<double> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < n; ++i) {
    const double x = (mode == Bcast::AScalar) ? av[0] : av[i];
    const double y = (mode == Bcast::BScalar) ? bv[0] : bv[i];
    out[i] = fwd(x, y);
  }
  Shape shape = (mode == Bcast::AScalar) ? b.shape() : a.shape();
  Tape* tp = common_tape({&a, &b});
  return emit(std::move(shape), std::move(out), tp, [=](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    const auto& av2 = a.values();
    const auto& bv2 = b.values();
    if (a.on_tape()) {
      auto& ga = t.grad_buf(a.node());
      for (size_t i = 0; i < g.size(); ++i) {
        const double x = (mode == Bcast::AScalar) ? av2[0] : av2[i];
        const double y = (mode == Bcast::BScalar) ? bv2[0] : bv2[i];
        ga[(mode == Bcast::AScalar) ? 0 : i] += g[i] * dfa(x, y);
      }
    }
    if (b.on_tape()) {
      auto& gb = t.grad_buf(b.node());
      for (size_t i = 0; i < g.size(); ++i) {
        const double x = (mode == Bcast::AScalar) ? av2[0] : av2[i];
        const double y = (mode == Bcast::BScalar) ? bv2[0] : bv2[i];
        gb[(mode == Bcast::BScalar) ? 0 : i] += g[i] * dfb(x, y);
      }
    }
  });
}

// Unary elementwise.
template <typename F, typename D>
Tensor unary_ew(const Tensor& x, F fwd, D dfx) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  Tape* tp = common_tape({&x});
  return emit(x.shape(), std::move(out), tp, [=](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gx = t.grad_buf(x.node());
    const auto& xv2 = x.values();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfx(xv2[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int m = a.rows(), k = a.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner dimensions mismatch " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  const int n = b.cols();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = &av[static_cast<size_t>(i) * k];
    double* orow = &out[static_cast<size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = &bv[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Tape* tp = common_tape({&a, &b});
  return emit({m, n}, std::move(out), tp, [=](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    if (a.on_tape()) {
      // dA = g . B^T
      auto& ga = t.grad_buf(a.node());
      const auto& bv2 = b.values();
      for (int i = 0; i < m; ++i) {
        const double* grow = &g[static_cast<size_t>(i) * n];
        double* garow = &ga[static_cast<size_t>(i) * k];
        for (int p = 0; p < k; ++p) {
          const double* brow = &bv2[static_cast<size_t>(p) * n];
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          garow[p] += acc;
        }
      }
    }
    if (b.on_tape()) {
      // dB = A^T . g
      auto& gb = t.grad_buf(b.node());
      const auto& av2 = a.values();
      for (int i = 0; i < m; ++i) {
        const double* arow = &av2[static_cast<size_t>(i) * k];
        const double* grow = &g[static_cast<size_t>(i) * n];
        for (int p = 0; p < k; ++p) {
          const double aip = arow[p];
          if (aip == 0.0) continue;
          double* gbrow = &gb[static_cast<size_t>(p) * n];
          for (int j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.values())
    if (y == 0.0) throw NumericDomainError("div: zero divisor");
  return binary_ew(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor relu(const Tensor& x) {
  // Subgradient at exactly 0 is 0.
  return unary_ew(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values())
    if (!(v > 0.0)) throw NumericDomainError("log: input " + std::to_string(v) + " not positive");
  return unary_ew(
      x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
  Tape* tp = common_tape({&x});
  auto outcopy = out;  // reuse the forward values in the backward closure
  return emit(x.shape(), std::move(out), tp,
              [x, yv = std::move(outcopy)](Tape& t, int self) {
                const auto& g = *t.grad_if_any(self);
                auto& gx = t.grad_buf(x.node());
                for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i];
              });
}

Tensor pow(const Tensor& x, double e) {
  const bool int_exp = (e == std::floor(e));
  for (double v : x.values()) {
    if (v < 0.0 && !int_exp)
      throw NumericDomainError("pow: negative base with non-integer exponent");
    if (v == 0.0 && e < 0.0) throw NumericDomainError("pow: zero base with negative exponent");
  }
  // d/dx x^0 = 0; at x == 0 with e < 1 the derivative is taken as 0 by
  // convention (keeps focal-loss gradients finite at t = 1).
  return unary_ew(
      x, [e](double v) { return std::pow(v, e); },
      [e](double v) {
        if (e == 0.0) return 0.0;
        if (v == 0.0 && e < 1.0) return 0.0;
        return e * std::pow(v, e - 1.0);
      });
}

Tensor scale(const Tensor& x, double a) {
  return unary_ew(
      x, [a](double v) { return a * v; }, [a](double) { return a; });
}

Tensor add_scalar(const Tensor& x, double a) {
  return unary_ew(
      x, [a](double v) { return v + a; }, [](double) { return 1.0; });
}

Tensor clamp_min(const Tensor& x, double m) {
  // Gradient passes only where the input was not clamped.
  return unary_ew(
      x, [m](double v) { return v < m ? m : v; },
      [m](double v) { return v < m ? 0.0 : 1.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  const int r = x.rows(), c = x.cols();
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  const auto& xv = x.values();
  for (double v : xv)
    if (std::isnan(v)) throw NumericDomainError("softmax: NaN input");
  const int nslices = (axis == 1) ? r : c;
  const int slice_len = (axis == 1) ? c : r;
  const auto at = [&](int s, int i) -> size_t {
    return (axis == 1) ? static_cast<size_t>(s) * c + i : static_cast<size_t>(i) * c + s;
  };
  std::vector<double> out(xv.size());
  for (int s = 0; s < nslices; ++s) {
    double mx = xv[at(s, 0)];
    for (int i = 1; i < slice_len; ++i) mx = std::max(mx, xv[at(s, i)]);
    double z = 0.0;
    for (int i = 0; i < slice_len; ++i) {
      const double e = std::exp(xv[at(s, i)] - mx);
      out[at(s, i)] = e;
      z += e;
    }
    for (int i = 0; i < slice_len; ++i) out[at(s, i)] /= z;
  }
  Tape* tp = common_tape({&x});
  auto sv = out;
  return emit(x.shape(), std::move(out), tp,
              [x, axis, r, c, sv = std::move(sv)](Tape& t, int self) {
                const auto& g = *t.grad_if_any(self);
                auto& gx = t.grad_buf(x.node());
                const int nslices = (axis == 1) ? r : c;
                const int slice_len = (axis == 1) ? c : r;
                const auto at = [&](int s, int i) -> size_t {
                  return (axis == 1) ? static_cast<size_t>(s) * c + i
                                     : static_cast<size_t>(i) * c + s;
                };
                for (int s = 0; s < nslices; ++s) {
                  double dot = 0.0;
                  for (int i = 0; i < slice_len; ++i) dot += g[at(s, i)] * sv[at(s, i)];
                  for (int i = 0; i < slice_len; ++i)
                    gx[at(s, i)] += sv[at(s, i)] * (g[at(s, i)] - dot);
                }
              });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tape* tp = common_tape({&x});
  return emit({1}, {acc}, tp, [x](Tape& t, int self) {
    const double g = (*t.grad_if_any(self))[0];
    auto& gx = t.grad_buf(x.node());
    for (auto& v : gx) v += g;
  });
}

Tensor sum_axis(const Tensor& x, int axis) {
  const int r = x.rows(), c = x.cols();
  if (axis != 0 && axis != 1) throw ContractError("sum_axis: axis must be 0 or 1");
  const auto& xv = x.values();
  if (axis == 0) {
    std::vector<double> out(static_cast<size_t>(c), 0.0);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out[static_cast<size_t>(j)] += xv[static_cast<size_t>(i) * c + j];
    Tape* tp = common_tape({&x});
    return emit({1, c}, std::move(out), tp, [x, r, c](Tape& t, int self) {
      const auto& g = *t.grad_if_any(self);
      auto& gx = t.grad_buf(x.node());
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(j)];
    });
  }
  std::vector<double> out(static_cast<size_t>(r), 0.0);
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < c; ++j) acc += xv[static_cast<size_t>(i) * c + j];
    out[static_cast<size_t>(i)] = acc;
  }
  Tape* tp = common_tape({&x});
  return emit({r, 1}, std::move(out), tp, [x, r, c](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gx = t.grad_buf(x.node());
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(i)];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const int r = parts[0].rows();
  int ctotal = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: row mismatch");
    ctotal += p.cols();
  }
  std::vector<double> out(static_cast<size_t>(r) * ctotal);
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.cols();
    const auto& pv = p.values();
    for (int i = 0; i < r; ++i)
      std::memcpy(&out[static_cast<size_t>(i) * ctotal + off], &pv[static_cast<size_t>(i) * pc],
                  static_cast<size_t>(pc) * sizeof(double));
    off += pc;
  }
  std::vector<const Tensor*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  Tape* tp = nullptr;
  for (const auto& p : parts) {
    Tape* q = common_tape({&p});
    if (q) {
      if (tp && tp != q) throw ContractError("concat_cols: operands on different tapes");
      tp = q;
    }
  }
  std::vector<Tensor> owned(parts.begin(), parts.end());
  return emit({r, ctotal}, std::move(out), tp, [owned, r, ctotal](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    int off = 0;
    for (const auto& p : owned) {
      const int pc = p.cols();
      if (p.on_tape()) {
        auto& gp = t.grad_buf(p.node());
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < pc; ++j)
            gp[static_cast<size_t>(i) * pc + j] += g[static_cast<size_t>(i) * ctotal + off + j];
      }
      off += pc;
    }
  });
}

Tensor stack_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("stack_rows: no parts");
  const int c = parts[0].cols();
  int rtotal = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("stack_rows: column mismatch");
    rtotal += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rtotal) * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tape* tp = nullptr;
  for (const auto& p : parts) {
    Tape* q = common_tape({&p});
    if (q) {
      if (tp && tp != q) throw ContractError("stack_rows: operands on different tapes");
      tp = q;
    }
  }
  std::vector<Tensor> owned(parts.begin(), parts.end());
  return emit({rtotal, c}, std::move(out), tp, [owned, c](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    size_t off = 0;
    for (const auto& p : owned) {
      const size_t len = static_cast<size_t>(p.size());
      if (p.on_tape()) {
        auto& gp = t.grad_buf(p.node());
        for (size_t i = 0; i < len; ++i) gp[i] += g[off + i];
      }
      off += len;
    }
  });
}

Tensor gather_rows(const Tensor& x, std::vector<int> idx) {
  const int r = x.rows(), c = x.cols();
  for (int i : idx)
    if (i < 0 || i >= r) throw ContractError("gather_rows: index out of range");
  const auto& xv = x.values();
  std::vector<double> out(idx.size() * static_cast<size_t>(c));
  for (size_t k = 0; k < idx.size(); ++k)
    std::memcpy(&out[k * c], &xv[static_cast<size_t>(idx[k]) * c],
                static_cast<size_t>(c) * sizeof(double));
  Tape* tp = common_tape({&x});
  return emit({static_cast<int>(idx.size()), c}, std::move(out), tp,
              [x, idx = std::move(idx), c](Tape& t, int self) {
                const auto& g = *t.grad_if_any(self);
                auto& gx = t.grad_buf(x.node());
                for (size_t k = 0; k < idx.size(); ++k)
                  for (int j = 0; j < c; ++j)
                    gx[static_cast<size_t>(idx[k]) * c + j] += g[k * c + j];
              });
}

Tensor weighted_gather(const Tensor& x, std::vector<std::pair<int, double>> taps) {
  const int r = x.rows(), c = x.cols();
  for (const auto& [i, w] : taps) {
    (void)w;
    if (i < 0 || i >= r) throw ContractError("weighted_gather: index out of range");
  }
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  for (const auto& [i, w] : taps)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j)] += w * xv[static_cast<size_t>(i) * c + j];
  Tape* tp = common_tape({&x});
  return emit({1, c}, std::move(out), tp, [x, taps = std::move(taps), c](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gx = t.grad_buf(x.node());
    for (const auto& [i, w] : taps)
      for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += w * g[static_cast<size_t>(j)];
  });
}

Tensor repeat_rows(const Tensor& row, int n) {
  if (row.rows() != 1) throw DimensionError("repeat_rows: expected 1xC input");
  const int c = row.cols();
  const auto& rv = row.values();
  std::vector<double> out(static_cast<size_t>(n) * c);
  for (int i = 0; i < n; ++i)
    std::memcpy(&out[static_cast<size_t>(i) * c], rv.data(), static_cast<size_t>(c) * sizeof(double));
  Tape* tp = common_tape({&row});
  return emit({n, c}, std::move(out), tp, [row, n, c](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gr = t.grad_buf(row.node());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) gr[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * c + j];
  });
}

Tensor repeat_cols(const Tensor& col, int d) {
  if (col.cols() != 1) throw DimensionError("repeat_cols: expected Nx1 input");
  const int n = col.rows();
  const auto& cv = col.values();
  std::vector<double> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(i) * d + j] = cv[static_cast<size_t>(i)];
  Tape* tp = common_tape({&col});
  return emit({n, d}, std::move(out), tp, [col, n, d](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gc = t.grad_buf(col.node());
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += g[static_cast<size_t>(i) * d + j];
      gc[static_cast<size_t>(i)] += acc;
    }
  });
}

Tensor im2col3x3(const Tensor& x, int h, int w, int stride) {
  const int c = x.cols();
  if (x.rows() != h * w) throw DimensionError("im2col3x3: rows != h*w");
  if (h % stride != 0 || w % stride != 0)
    throw DimensionError("im2col3x3: dims not divisible by stride");
  const int ho = h / stride, wo = w / stride;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(ho) * wo * 9 * c, 0.0);
  for (int oi = 0; oi < ho; ++oi) {
    for (int oj = 0; oj < wo; ++oj) {
      double* orow = &out[(static_cast<size_t>(oi) * wo + oj) * 9 * c];
      int tap = 0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj, ++tap) {
          const int ii = oi * stride + di, jj = oj * stride + dj;
          if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;  // zero pad
          std::memcpy(&orow[tap * c], &xv[(static_cast<size_t>(ii) * w + jj) * c],
                      static_cast<size_t>(c) * sizeof(double));
        }
      }
    }
  }
  Tape* tp = common_tape({&x});
  return emit({ho * wo, 9 * c}, std::move(out), tp, [x, h, w, stride, c](Tape& t, int self) {
    const auto& g = *t.grad_if_any(self);
    auto& gx = t.grad_buf(x.node());
    const int ho = h / stride, wo = w / stride;
    for (int oi = 0; oi < ho; ++oi) {
      for (int oj = 0; oj < wo; ++oj) {
        const double* grow = &g[(static_cast<size_t>(oi) * wo + oj) * 9 * c];
        int tap = 0;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj, ++tap) {
            const int ii = oi * stride + di, jj = oj * stride + dj;
            if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
            double* gxrow = &gx[(static_cast<size_t>(ii) * w + jj) * c];
            for (int k = 0; k < c; ++k) gxrow[k] += grow[tap * c + k];
          }
        }
      }
    }
  });
}

}  // namespace senc::ad
