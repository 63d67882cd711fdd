#include "ocgec/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "ocgec/error.hpp"
#include "ocgec/numerics/kernels.hpp"

namespace ocgec::numerics {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got " + to_string(t.shape()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) {
      Tensor& gb = *in[1];
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> in) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (in[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * bv[i];
    }
    if (in[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  out *= factor;
  return a.tape().record(std::move(out), {a}, [factor](const Tensor& g, std::span<Tensor* const> in) {
    Tensor& ga = *in[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.values()) v += offset;
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> in) {
    *in[0] += g;
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw SpecError("add_n of no terms");
  Tensor out = terms[0].value();
  for (std::size_t t = 1; t < terms.size(); ++t) {
    require_same_shape(out, terms[t].value(), "add_n");
    out += terms[t].value();
  }
  return terms[0].tape().record(std::move(out), terms, [](const Tensor& g, std::span<Tensor* const> in) {
    for (Tensor* gi : in) {
      if (gi) *gi += g;
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul lhs");
  require_rank(bv, 2, "matmul rhs");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(av.shape()) + " x " +
                         to_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  kernels::gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  return a.tape().record(std::move(out), {a, b},
                         [a, b, m, k, n](const Tensor& g, std::span<Tensor* const> in) {
                           if (in[0]) kernels::gemm_nt(g.data(), b.value().data(), in[0]->data(), m, n, k);
                           if (in[1]) kernels::gemm_tn(a.value().data(), g.data(), in[1]->data(), m, k, n);
                         });
}

Var add_row_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_rank(av, 2, "add_row_bias");
  if (bv.size() != av.dim(1)) {
    throw DimensionError("add_row_bias: bias of " + to_string(bv.shape()) + " for rows of " +
                         to_string(av.shape()));
  }
  Tensor out = av;
  const std::size_t rows = av.dim(0), cols = av.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) += bv[c];
  }
  return a.tape().record(std::move(out), {a, bias},
                         [rows, cols](const Tensor& g, std::span<Tensor* const> in) {
                           if (in[0]) *in[0] += g;
                           if (in[1]) {
                             Tensor& gb = *in[1];
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) gb[c] += g(r, c);
                             }
                           }
                         });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape().record(std::move(out), {a}, [a](const Tensor& g, std::span<Tensor* const> in) {
    const Tensor& av = a.value();
    Tensor& ga = *in[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var conv2d(Var input, Var filters, Var bias) {
  const Tensor& x = input.value();
  const Tensor& w = filters.value();
  const Tensor& b = bias.value();
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d filters");
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c) {
    throw DimensionError("conv2d: filters " + to_string(w.shape()) + " for input " +
                         to_string(x.shape()));
  }
  if (kh > h || kw > wd || kh == 0 || kw == 0) {
    throw DimensionError("conv2d: kernel " + to_string(w.shape()) + " larger than input " +
                         to_string(x.shape()));
  }
  if (b.size() != f) throw DimensionError("conv2d: bias of " + to_string(b.shape()));
  const std::size_t oh = h - kh + 1, ow = wd - kw + 1;
  const std::size_t taps = c * kh * kw, pixels = oh * ow;

  // cols[(ci, ky, kx), (y, x)] = x[ci, y + ky, x + kx]
  auto cols = std::make_shared<std::vector<double>>(taps * pixels);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* row = cols->data() + ((ci * kh + ky) * kw + kx) * pixels;
        for (std::size_t y = 0; y < oh; ++y) {
          const double* src = x.data() + (ci * h + y + ky) * wd + kx;
          std::copy(src, src + ow, row + y * ow);
        }
      }
    }
  }

  Tensor out(Shape{f, oh, ow});
  for (std::size_t fi = 0; fi < f; ++fi) std::fill_n(out.data() + fi * pixels, pixels, b[fi]);
  kernels::gemm_nn(w.data(), cols->data(), out.data(), f, taps, pixels);

  return input.tape().record(
      std::move(out), {input, filters, bias},
      [filters, cols, c, h, wd, f, kh, kw, oh, ow, taps, pixels](const Tensor& g, std::span<Tensor* const> in) {
        if (in[2]) {
          for (std::size_t fi = 0; fi < f; ++fi) {
            const double* go = g.data() + fi * pixels;
            double s = 0.0;
            for (std::size_t i = 0; i < pixels; ++i) s += go[i];
            (*in[2])[fi] += s;
          }
        }
        if (in[1]) kernels::gemm_nt(g.data(), cols->data(), in[1]->data(), f, pixels, taps);
        if (in[0]) {
          std::vector<double> gcols(taps * pixels, 0.0);
          kernels::gemm_tn(filters.value().data(), g.data(), gcols.data(), f, taps, pixels);
          for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const double* row = gcols.data() + ((ci * kh + ky) * kw + kx) * pixels;
                for (std::size_t y = 0; y < oh; ++y) {
                  double* dst = in[0]->data() + (ci * h + y + ky) * wd + kx;
                  const double* src = row + y * ow;
                  for (std::size_t xo = 0; xo < ow; ++xo) dst[xo] += src[xo];
                }
              }
            }
          }
        }
      });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> in) {
    Tensor& ga = *in[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> in) {
    const double gv = g[0];
    for (double& v : in[0]->values()) v += gv;
  });
}

Var sum_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](const Tensor& g, std::span<Tensor* const> in) {
    const double gv = 2.0 * g[0];
    const Tensor& av = a.value();
    Tensor& ga = *in[0];
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += gv * av[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw SpecError("concat of no parts");
  std::vector<double> data;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    offsets.push_back(data.size());
    const auto vals = p.value().values();
    data.insert(data.end(), vals.begin(), vals.end());
  }
  Tensor out = Tensor::vector(std::move(data));
  return parts[0].tape().record(std::move(out), parts,
                                [offsets](const Tensor& g, std::span<Tensor* const> in) {
                                  for (std::size_t k = 0; k < in.size(); ++k) {
                                    if (!in[k]) continue;
                                    Tensor& gk = *in[k];
                                    for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] + i];
                                  }
                                });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

Var softmax_cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (label >= z.size()) {
    throw DimensionError("softmax_cross_entropy: label " + std::to_string(label) + " for " +
                         std::to_string(z.size()) + " logits");
  }
  const double top = *std::max_element(z.values().begin(), z.values().end());
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - top);
  const double loss = top + std::log(total) - z[label];
  return logits.tape().record(Tensor::scalar(loss), {logits},
                              [logits, label](const Tensor& g, std::span<Tensor* const> in) {
                                const auto p = softmax(logits.value().values());
                                Tensor& gz = *in[0];
                                for (std::size_t i = 0; i < p.size(); ++i) {
                                  gz[i] += g[0] * (p[i] - (i == label ? 1.0 : 0.0));
                                }
                              });
}

Var dropout(Var a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw SpecError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  Tensor mask(a.shape());
  for (double& m : mask.values()) m = keep(rng) ? factor : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return a.tape().record(std::move(out), {a},
                         [mask = std::move(mask)](const Tensor& g, std::span<Tensor* const> in) {
                           Tensor& ga = *in[0];
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                         });
}

Var zero_rows(Var a, std::span<const std::size_t> rows) {
  require_rank(a.value(), 2, "zero_rows");
  const std::size_t n = a.value().dim(0);
  std::vector<std::size_t> zeroed(rows.begin(), rows.end());
  Tensor out = a.value();
  for (std::size_t r : zeroed) {
    if (r >= n) throw PlanError("row " + std::to_string(r) + " out of range for " + std::to_string(n) + " rows");
    std::fill(out.row(r).begin(), out.row(r).end(), 0.0);
  }
  return a.tape().record(std::move(out), {a},
                         [zeroed = std::move(zeroed)](const Tensor& g, std::span<Tensor* const> in) {
                           Tensor masked = g;
                           for (std::size_t r : zeroed) std::fill(masked.row(r).begin(), masked.row(r).end(), 0.0);
                           *in[0] += masked;
                         });
}

}  // namespace ocgec::numerics
