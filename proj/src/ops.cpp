// SPDX-License-Identifier: Apache-2.0
#include "drfuse/ops.hpp"

#include <cmath>

#include "drfuse/errors.hpp"
#include "drfuse/kernels.hpp"

namespace drfuse::ops {

namespace {
bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v->needs_grad) return true;
  return false;
}
}  // namespace

Var add(Tape& t, Var a, Var b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
  Tensor out = a->value;
  add_inplace(out, b->value);
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      Tape::accumulate(a, r->grad);
      Tape::accumulate(b, r->grad);
    };
  return r;
}

Var sub(Tape& t, Var a, Var b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("sub: shape mismatch");
  Tensor out = a->value;
  axpy_inplace(out, -1.0, b->value);
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      Tape::accumulate(a, r->grad);
      if (b->needs_grad) {
        Tensor g = r->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -g[i];
        Tape::accumulate(b, std::move(g));
      }
    };
  return r;
}

Var hadamard(Tape& t, Var a, Var b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("hadamard: shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      if (a->needs_grad) {
        Tensor g = r->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b->value[i];
        Tape::accumulate(a, std::move(g));
      }
      if (b->needs_grad) {
        Tensor g = r->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= a->value[i];
        Tape::accumulate(b, std::move(g));
      }
    };
  return r;
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  Var r = t.make(std::move(out), a->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, s]() {
      Tensor g = r->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
      Tape::accumulate(a, std::move(g));
    };
  return r;
}

Var add_rowvec(Tape& t, Var m, Var v) {
  if (m->value.rank() != 2 || v->value.rank() != 2 || v->value.rows() != 1 ||
      v->value.cols() != m->value.cols())
    throw ShapeError("add_rowvec: shape mismatch");
  Tensor out = m->value;
  std::size_t r = out.rows(), c = out.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += v->value[j];
  Var res = t.make(std::move(out), any_grad({m, v}), nullptr);
  if (res->needs_grad)
    res->vjp = [res, m, v, r, c]() {
      Tape::accumulate(m, res->grad);
      if (v->needs_grad) {
        Tensor gv({1, c});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gv[j] += res->grad.at(i, j);
        Tape::accumulate(v, std::move(gv));
      }
    };
  return res;
}

Var matmul(Tape& t, Var a, Var b) {
  Tensor out = drfuse::matmul(a->value, b->value);
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      if (a->needs_grad) Tape::accumulate(a, drfuse::matmul_nt(r->grad, b->value));
      if (b->needs_grad) Tape::accumulate(b, drfuse::matmul_tn(a->value, r->grad));
    };
  return r;
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Tensor out = drfuse::matmul_nt(a->value, b->value);
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      if (a->needs_grad) Tape::accumulate(a, drfuse::matmul(r->grad, b->value));
      if (b->needs_grad) Tape::accumulate(b, drfuse::matmul_tn(r->grad, a->value));
    };
  return r;
}

Var relu(Tape& t, Var a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  Var r = t.make(std::move(out), a->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, a]() {
      Tensor g = r->grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a->value[i] <= 0.0) g[i] = 0.0;
      Tape::accumulate(a, std::move(g));
    };
  return r;
}

Var tanh_op(Tape& t, Var a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  Var r = t.make(std::move(out), a->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, a]() {
      Tensor g = r->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - r->value[i] * r->value[i];
      Tape::accumulate(a, std::move(g));
    };
  return r;
}

Var sigmoid(Tape& t, Var a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernels::sigmoid_scalar(out[i]);
  Var r = t.make(std::move(out), a->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, a]() {
      Tensor g = r->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        double y = r->value[i];
        bool clamped = y == kernels::kProbClamp || y == 1.0 - kernels::kProbClamp;
        g[i] = clamped ? 0.0 : g[i] * y * (1.0 - y);
      }
      Tape::accumulate(a, std::move(g));
    };
  return r;
}

Var mean_rows(Tape& t, Var m) {
  if (m->value.rank() != 2) throw ShapeError("mean_rows: expects a matrix");
  std::size_t r = m->value.rows(), c = m->value.cols();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += m->value.at(i, j);
  double inv = 1.0 / static_cast<double>(r);
  for (std::size_t j = 0; j < c; ++j) out[j] *= inv;
  Var res = t.make(std::move(out), m->needs_grad, nullptr);
  if (res->needs_grad)
    res->vjp = [res, m, r, c, inv]() {
      Tensor g({r, c});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g.at(i, j) = res->grad[j] * inv;
      Tape::accumulate(m, std::move(g));
    };
  return res;
}

Var slice_cols(Tape& t, Var m, std::size_t c0, std::size_t c1) {
  if (m->value.rank() != 2 || c1 > m->value.cols() || c0 >= c1)
    throw ShapeError("slice_cols: bad range");
  std::size_t r = m->value.rows(), w = c1 - c0, c = m->value.cols();
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = m->value.at(i, c0 + j);
  Var res = t.make(std::move(out), m->needs_grad, nullptr);
  if (res->needs_grad)
    res->vjp = [res, m, r, w, c, c0]() {
      Tensor g({r, c});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) g.at(i, c0 + j) = res->grad.at(i, j);
      Tape::accumulate(m, std::move(g));
    };
  return res;
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::size_t r = parts[0]->value.rows(), total = 0;
  bool ng = false;
  for (Var p : parts) {
    if (p->value.rank() != 2 || p->value.rows() != r)
      throw ShapeError("concat_cols: row mismatch");
    total += p->value.cols();
    ng = ng || p->needs_grad;
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (Var p : parts) {
    std::size_t w = p->value.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out.at(i, off + j) = p->value.at(i, j);
    off += w;
  }
  std::vector<Var> ps = parts;
  Var res = t.make(std::move(out), ng, nullptr);
  if (ng)
    res->vjp = [res, ps, r]() {
      std::size_t off = 0;
      for (Var p : ps) {
        std::size_t w = p->value.cols();
        if (p->needs_grad) {
          Tensor g({r, w});
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) g.at(i, j) = res->grad.at(i, off + j);
          Tape::accumulate(p, std::move(g));
        }
        off += w;
      }
    };
  return res;
}

Var stack_rows(Tape& t, const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  std::size_t d = rows[0]->value.cols();
  bool ng = false;
  for (Var r : rows) {
    if (r->value.rank() != 2 || r->value.rows() != 1 || r->value.cols() != d)
      throw ShapeError("stack_rows: expects 1 x d rows");
    ng = ng || r->needs_grad;
  }
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = rows[i]->value[j];
  std::vector<Var> rs = rows;
  Var res = t.make(std::move(out), ng, nullptr);
  if (ng)
    res->vjp = [res, rs, d]() {
      for (std::size_t i = 0; i < rs.size(); ++i) {
        if (!rs[i]->needs_grad) continue;
        Tensor g({1, d});
        for (std::size_t j = 0; j < d; ++j) g[j] = res->grad.at(i, j);
        Tape::accumulate(rs[i], std::move(g));
      }
    };
  return res;
}

Var softmax_rows(Tape& t, Var m) {
  if (m->value.rank() != 2) throw ShapeError("softmax_rows: expects a matrix");
  std::size_t r = m->value.rows(), c = m->value.cols();
  Tensor out = m->value;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = out.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  Var res = t.make(std::move(out), m->needs_grad, nullptr);
  if (res->needs_grad)
    res->vjp = [res, m, r, c]() {
      Tensor g({r, c});
      for (std::size_t i = 0; i < r; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += res->grad.at(i, j) * res->value.at(i, j);
        for (std::size_t j = 0; j < c; ++j)
          g.at(i, j) = res->value.at(i, j) * (res->grad.at(i, j) - inner);
      }
      Tape::accumulate(m, std::move(g));
    };
  return res;
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  if (x->value.rank() != 2) throw ShapeError("layer_norm: expects a matrix");
  std::size_t r = x->value.rows(), c = x->value.cols();
  if (gamma->value.cols() != c || beta->value.cols() != c)
    throw ShapeError("layer_norm: gamma/beta width mismatch");
  Tensor out({r, c});
  Tensor xhat({r, c});
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x->value.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = x->value.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat.at(i, j) = (x->value.at(i, j) - mu) * inv_std[i];
      out.at(i, j) = xhat.at(i, j) * gamma->value[j] + beta->value[j];
    }
  }
  bool ng = any_grad({x, gamma, beta});
  Var res = t.make(std::move(out), ng, nullptr);
  if (ng) {
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    res->vjp = [res, x, gamma, beta, xh, istd, r, c]() {
      if (gamma->needs_grad) {
        Tensor gg({1, c});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gg[j] += res->grad.at(i, j) * xh->at(i, j);
        Tape::accumulate(gamma, std::move(gg));
      }
      if (beta->needs_grad) {
        Tensor gb({1, c});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += res->grad.at(i, j);
        Tape::accumulate(beta, std::move(gb));
      }
      if (x->needs_grad) {
        Tensor gx({r, c});
        double invc = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_gy = 0.0, mean_gyxh = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            double gy = res->grad.at(i, j) * gamma->value[j];
            mean_gy += gy;
            mean_gyxh += gy * xh->at(i, j);
          }
          mean_gy *= invc;
          mean_gyxh *= invc;
          for (std::size_t j = 0; j < c; ++j) {
            double gy = res->grad.at(i, j) * gamma->value[j];
            gx.at(i, j) = (gy - mean_gy - xh->at(i, j) * mean_gyxh) * (*istd)[i];
          }
        }
        Tape::accumulate(x, std::move(gx));
      }
    };
  }
  return res;
}

Var conv2d(Tape& t, Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
  if (x->value.rank() != 3 || w->value.rank() != 4) throw ShapeError("conv2d: bad ranks");
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  std::size_t cin = xs[0], h = xs[1], wd = xs[2];
  std::size_t cout = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != cin) throw ShapeError("conv2d: channel mismatch");
  if (b->value.size() != cout) throw ShapeError("conv2d: bias size mismatch");
  std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  std::size_t wo = (wd + 2 * pad - kw) / stride + 1;
  Tensor out({cout, ho, wo});
  for (std::size_t oc = 0; oc < cout; ++oc)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = b->value[oc];
        for (std::size_t ic = 0; ic < cin; ++ic)
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx) {
              std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                  static_cast<std::ptrdiff_t>(pad);
              std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                  ix >= static_cast<std::ptrdiff_t>(wd))
                continue;
              acc += x->value.at(ic, iy, ix) * w->value.at(oc, ic, ky, kx);
            }
        out.at(oc, oy, ox) = acc;
      }
  bool ng = any_grad({x, w, b});
  Var res = t.make(std::move(out), ng, nullptr);
  if (ng)
    res->vjp = [res, x, w, b, stride, pad, cin, h, wd, cout, kh, kw, ho, wo]() {
      Tensor gx({cin, h, wd});
      Tensor gw(w->value.shape());
      Tensor gb({cout});
      for (std::size_t oc = 0; oc < cout; ++oc)
        for (std::size_t oy = 0; oy < ho; ++oy)
          for (std::size_t ox = 0; ox < wo; ++ox) {
            double g = res->grad.at(oc, oy, ox);
            gb[oc] += g;
            for (std::size_t ic = 0; ic < cin; ++ic)
              for (std::size_t ky = 0; ky < kh; ++ky)
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
                  std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                      ix >= static_cast<std::ptrdiff_t>(wd))
                    continue;
                  gw.at(oc, ic, ky, kx) += g * x->value.at(ic, iy, ix);
                  gx.at(ic, iy, ix) += g * w->value.at(oc, ic, ky, kx);
                }
          }
      Tape::accumulate(x, std::move(gx));
      Tape::accumulate(w, std::move(gw));
      Tape::accumulate(b, std::move(gb));
    };
  return res;
}

Var global_avg_pool(Tape& t, Var x) {
  if (x->value.rank() != 3) throw ShapeError("global_avg_pool: expects C x H x W");
  const auto& xs = x->value.shape();
  std::size_t c = xs[0], h = xs[1], w = xs[2];
  double inv = 1.0 / static_cast<double>(h * w);
  Tensor out({1, c});
  for (std::size_t ic = 0; ic < c; ++ic) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) acc += x->value.at(ic, i, j);
    out[ic] = acc * inv;
  }
  Var res = t.make(std::move(out), x->needs_grad, nullptr);
  if (res->needs_grad)
    res->vjp = [res, x, c, h, w, inv]() {
      Tensor g({c, h, w});
      for (std::size_t ic = 0; ic < c; ++ic) {
        double gv = res->grad[ic] * inv;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) g.at(ic, i, j) = gv;
      }
      Tape::accumulate(x, std::move(g));
    };
  return res;
}

Var logit_pool(Tape& t, Var a, Var b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("logit_pool: shape mismatch");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = kernels::logit_pool_scalar(a->value[i], b->value[i]);
  Var r = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      Tensor ga(a->value.shape());
      Tensor gb(b->value.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) {
        auto [d1, d2] = kernels::logit_pool_grad_scalar(a->value[i], b->value[i]);
        ga[i] = r->grad[i] * d1;
        gb[i] = r->grad[i] * d2;
      }
      Tape::accumulate(a, std::move(ga));
      Tape::accumulate(b, std::move(gb));
    };
  return r;
}

Var jsd_loss(Tape& t, Var a, Var b) {
  double v = kernels::jsd_from_logits(a->value.to_vector(), b->value.to_vector());
  Var r = t.make(Tensor::scalar(v), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      auto [g1, g2] = kernels::jsd_from_logits_grad(a->value.to_vector(), b->value.to_vector());
      double s = r->grad[0];
      Tensor ga(a->value.shape());
      Tensor gb(b->value.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] = s * g1[i];
        gb[i] = s * g2[i];
      }
      Tape::accumulate(a, std::move(ga));
      Tape::accumulate(b, std::move(gb));
    };
  return r;
}

Var mse_loss(Tape& t, Var a, Var b) {
  if (!a->value.same_shape(b->value)) throw ShapeError("mse_loss: shape mismatch");
  std::size_t n = a->value.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a->value[i] - b->value[i];
    acc += d * d;
  }
  Var r = t.make(Tensor::scalar(acc / static_cast<double>(n)), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b, n]() {
      double s = 2.0 * r->grad[0] / static_cast<double>(n);
      Tensor ga(a->value.shape());
      Tensor gb(b->value.shape());
      for (std::size_t i = 0; i < n; ++i) {
        double d = a->value[i] - b->value[i];
        ga[i] = s * d;
        gb[i] = -s * d;
      }
      Tape::accumulate(a, std::move(ga));
      Tape::accumulate(b, std::move(gb));
    };
  return r;
}

Var orth_loss(Tape& t, Var a, Var b) {
  double v = kernels::orthogonality_penalty(a->value.to_vector(), b->value.to_vector());
  Var r = t.make(Tensor::scalar(v), any_grad({a, b}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, a, b]() {
      auto [g1, g2] =
          kernels::orthogonality_penalty_grad(a->value.to_vector(), b->value.to_vector());
      double s = r->grad[0];
      Tensor ga(a->value.shape());
      Tensor gb(b->value.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] = s * g1[i];
        gb[i] = s * g2[i];
      }
      Tape::accumulate(a, std::move(ga));
      Tape::accumulate(b, std::move(gb));
    };
  return r;
}

Var masked_attention(Tape& t, Var scores, const std::vector<double>& mask, std::size_t d) {
  auto alpha = kernels::masked_scaled_attention(scores->value.to_vector(), mask, d);
  Tensor out({1, alpha.size()}, alpha);
  Var r = t.make(std::move(out), scores->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, scores, mask, d]() {
      auto gs = kernels::masked_scaled_attention_vjp(r->value.to_vector(), mask, d,
                                                     r->grad.to_vector());
      std::size_t n = gs.size();
      Tape::accumulate(scores, Tensor({1, n}, std::move(gs)));
    };
  return r;
}

Var attend_rows(Tape& t, Var alpha, Var m, const std::vector<double>& mask) {
  if (alpha->value.rank() != 2 || alpha->value.rows() != 1 ||
      alpha->value.cols() != m->value.rows() || mask.size() != m->value.rows())
    throw ShapeError("attend_rows: shape mismatch");
  std::size_t n = m->value.rows(), d = m->value.cols();
  Tensor out({1, d});
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] != 0.0) continue;  // masked rows are never read
    double w = alpha->value[i];
    for (std::size_t j = 0; j < d; ++j) out[j] += w * m->value.at(i, j);
  }
  auto mk = mask;
  Var r = t.make(std::move(out), any_grad({alpha, m}), nullptr);
  if (r->needs_grad)
    r->vjp = [r, alpha, m, mk, n, d]() {
      if (alpha->needs_grad) {
        Tensor ga({1, n});
        for (std::size_t i = 0; i < n; ++i) {
          if (mk[i] != 0.0) continue;
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += r->grad[j] * m->value.at(i, j);
          ga[i] = acc;
        }
        Tape::accumulate(alpha, std::move(ga));
      }
      if (m->needs_grad) {
        Tensor gm({n, d});
        for (std::size_t i = 0; i < n; ++i) {
          if (mk[i] != 0.0) continue;
          double w = alpha->value[i];
          for (std::size_t j = 0; j < d; ++j) gm.at(i, j) = w * r->grad[j];
        }
        Tape::accumulate(m, std::move(gm));
      }
    };
  return r;
}

Var rows_dot(Tape& t, Var a, Var b) {
  if (a->value.rank() != 2 || !a->value.same_shape(b->value))
    throw ShapeError("rows_dot: shape mismatch");
  std::size_t r = a->value.rows(), c = a->value.cols();
  Tensor out({1, r});
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += a->value.at(i, j) * b->value.at(i, j);
    out[i] = acc;
  }
  Var res = t.make(std::move(out), any_grad({a, b}), nullptr);
  if (res->needs_grad)
    res->vjp = [res, a, b, r, c]() {
      if (a->needs_grad) {
        Tensor g({r, c});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g.at(i, j) = res->grad[i] * b->value.at(i, j);
        Tape::accumulate(a, std::move(g));
      }
      if (b->needs_grad) {
        Tensor g({r, c});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g.at(i, j) = res->grad[i] * a->value.at(i, j);
        Tape::accumulate(b, std::move(g));
      }
    };
  return res;
}

Var bce_sum(Tape& t, Var y_hat, const std::vector<double>& y) {
  auto losses = kernels::binary_cross_entropy(y, y_hat->value.to_vector());
  double total = 0.0;
  for (double l : losses) total += l;
  auto yy = y;
  Var r = t.make(Tensor::scalar(total), y_hat->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, y_hat, yy]() {
      auto g = kernels::binary_cross_entropy_grad(yy, y_hat->value.to_vector());
      double s = r->grad[0];
      Tensor gy(y_hat->value.shape());
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] = s * g[i];
      Tape::accumulate(y_hat, std::move(gy));
    };
  return r;
}

Var margin_rank(Tape& t, Var alpha, const Tensor& aux_losses, double epsilon) {
  double v = kernels::margin_rank_attn_loss(alpha->value, aux_losses, epsilon);
  auto losses = std::make_shared<Tensor>(aux_losses);
  Var r = t.make(Tensor::scalar(v), alpha->needs_grad, nullptr);
  if (r->needs_grad)
    r->vjp = [r, alpha, losses, epsilon]() {
      Tensor g = kernels::margin_rank_attn_loss_grad(alpha->value, *losses, epsilon);
      double s = r->grad[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
      Tape::accumulate(alpha, std::move(g));
    };
  return r;
}

Var add_scalars(Tape& t, const std::vector<Var>& vs) {
  std::vector<double> w(vs.size(), 1.0);
  return scalar_weighted_sum(t, vs, w);
}

Var scalar_weighted_sum(Tape& t, const std::vector<Var>& vs, const std::vector<double>& w) {
  if (vs.empty() || vs.size() != w.size()) throw ShapeError("scalar_weighted_sum: bad inputs");
  double acc = 0.0;
  bool ng = false;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i]->value.size() != 1) throw ShapeError("scalar_weighted_sum: non-scalar input");
    acc += w[i] * vs[i]->value[0];
    ng = ng || vs[i]->needs_grad;
  }
  auto vv = vs;
  auto ww = w;
  Var r = t.make(Tensor::scalar(acc), ng, nullptr);
  if (ng)
    r->vjp = [r, vv, ww]() {
      for (std::size_t i = 0; i < vv.size(); ++i)
        Tape::accumulate(vv[i], Tensor::scalar(r->grad[0] * ww[i]));
    };
  return r;
}

}  // namespace drfuse::ops
