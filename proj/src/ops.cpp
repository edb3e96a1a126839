#include "tsdapt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsdapt/errors.hpp"

namespace tsdapt {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return Var::make(std::move(out), {a, b},
                   [](const Array& g, std::span<Array* const> grads) {
                     for (Array* dst : grads) {
                       if (!dst) continue;
                       for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i];
                     }
                   },
                   "add");
}

Var scale(const Var& a, double factor) {
  Array out = a.value();
  for (double& v : out.data()) v *= factor;
  return Var::make(std::move(out), {a},
                   [factor](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += factor * g[i];
                   },
                   "scale");
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return Var::make(std::move(out), {a, b},
                   [a, b](const Array& g, std::span<Array* const> grads) {
                     if (grads[0]) {
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*grads[0])[i] += g[i] * b.value()[i];
                     }
                     if (grads[1]) {
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*grads[1])[i] += g[i] * a.value()[i];
                     }
                   },
                   "mul");
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return Var::make(Array::scalar(s), {a},
                   [](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (double& v : grads[0]->data()) v += g[0];
                   },
                   "sum");
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty array");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const double inv = 1.0 / static_cast<double>(n);
  return Var::make(Array::scalar(s * inv), {a},
                   [inv](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (double& v : grads[0]->data()) v += g[0] * inv;
                   },
                   "mean");
}

Var conv1d(const Var& input, const Var& kernels, const Var& bias, Padding padding) {
  const Array& x = input.value();
  const Array& k = kernels.value();
  const Array& b = bias.value();
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("conv1d: input must be [C x T] or [B x C x T], got " +
                     shape_string(x.shape()));
  }
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t channels = x.dim(batched ? 1 : 0);
  const std::size_t length = x.dim(batched ? 2 : 1);
  if (k.rank() != 3 || k.dim(1) != channels) {
    throw ShapeError("conv1d: kernels must be [F x " + std::to_string(channels) + " x W], got " +
                     shape_string(k.shape()));
  }
  const std::size_t filters = k.dim(0);
  const std::size_t width = k.dim(2);
  if (b.shape() != Shape{filters}) {
    throw ShapeError("conv1d: bias must be [" + std::to_string(filters) + "], got " +
                     shape_string(b.shape()));
  }
  if (width == 0) throw ShapeError("conv1d: zero kernel width");
  std::size_t left = 0;
  std::size_t out_len = 0;
  if (padding == Padding::same) {
    left = (width - 1) / 2;
    out_len = length;
  } else {
    if (width > length) {
      throw ShapeError("conv1d: kernel width " + std::to_string(width) +
                       " exceeds input length " + std::to_string(length));
    }
    out_len = length - width + 1;
  }

  // For tap w, output t reads input t + w - left; valid t lie in [lo(w), hi(w)).
  auto lo = [left](std::size_t w) { return w < left ? left - w : std::size_t{0}; };
  auto hi = [left, length, out_len](std::size_t w) {
    const std::size_t limit = length + left - w;  // t + w - left < length
    return std::min(out_len, limit);
  };

  Shape out_shape = batched ? Shape{batch, filters, out_len} : Shape{filters, out_len};
  Array out(out_shape);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x.data().data() + s * channels * length;
    double* os = out.data().data() + s * filters * out_len;
    for (std::size_t f = 0; f < filters; ++f) {
      double* o = os + f * out_len;
      std::fill(o, o + out_len, b[f]);
      for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = xs + c * length;
        const double* kw = k.data().data() + (f * channels + c) * width;
        for (std::size_t w = 0; w < width; ++w) {
          const std::size_t t0 = lo(w);
          const std::size_t t1 = hi(w);
          if (t0 >= t1) continue;
          axpy(kw[w], xc + t0 + w - left, o + t0, t1 - t0);
        }
      }
    }
  }

  auto rule = [input, kernels, batch, channels, length, filters, width, out_len, lo, hi,
               left](const Array& g, std::span<Array* const> grads) {
    const Array& xv = input.value();
    const Array& kv = kernels.value();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* xs = xv.data().data() + s * channels * length;
      const double* gs = g.data().data() + s * filters * out_len;
      for (std::size_t f = 0; f < filters; ++f) {
        const double* gf = gs + f * out_len;
        if (grads[2]) {
          double acc = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) acc += gf[t];
          (*grads[2])[f] += acc;
        }
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t kidx = (f * channels + c) * width;
          for (std::size_t w = 0; w < width; ++w) {
            const std::size_t t0 = lo(w);
            const std::size_t t1 = hi(w);
            if (t0 >= t1) continue;
            if (grads[1]) {
              (*grads[1])[kidx + w] += dot(gf + t0, xs + c * length + t0 + w - left, t1 - t0);
            }
            if (grads[0]) {
              double* dx = grads[0]->data().data() + s * channels * length + c * length;
              axpy(kv[kidx + w], gf + t0, dx + t0 + w - left, t1 - t0);
            }
          }
        }
      }
    }
  };
  return Var::make(std::move(out), {input, kernels, bias}, std::move(rule), "conv1d");
}

Var dense(const Var& input, const Var& weights, const Var& bias) {
  const Array& x = input.value();
  const Array& w = weights.value();
  if (w.rank() != 2) throw ShapeError("dense: weights must be rank 2, got " + shape_string(w.shape()));
  const std::size_t out_dim = w.dim(0);
  const std::size_t in_dim = w.dim(1);
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("dense: input must be [in] or [B x in], got " + shape_string(x.shape()));
  }
  const bool batched = x.rank() == 2;
  const std::size_t batch = batched ? x.dim(0) : 1;
  if (x.shape().back() != in_dim) {
    throw ShapeError("dense: expected input width " + std::to_string(in_dim) + ", got shape " +
                     shape_string(x.shape()));
  }
  require_shape(bias.value(), Shape{out_dim}, "dense bias");

  Array out(batched ? Shape{batch, out_dim} : Shape{out_dim});
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x.data().data() + s * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      out[s * out_dim + o] = dot(w.data().data() + o * in_dim, xs, in_dim) + bias.value()[o];
    }
  }
  auto rule = [input, weights, batch, in_dim, out_dim](const Array& g,
                                                       std::span<Array* const> grads) {
    const Array& xv = input.value();
    const Array& wv = weights.value();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* xs = xv.data().data() + s * in_dim;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double go = g[s * out_dim + o];
        if (grads[0]) axpy(go, wv.data().data() + o * in_dim, grads[0]->data().data() + s * in_dim, in_dim);
        if (grads[1]) axpy(go, xs, grads[1]->data().data() + o * in_dim, in_dim);
        if (grads[2]) (*grads[2])[o] += go;
      }
    }
  };
  return Var::make(std::move(out), {input, weights, bias}, std::move(rule), "dense");
}

Var relu(const Var& input) {
  Array out = input.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return Var::make(std::move(out), {input},
                   [input](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     const Array& x = input.value();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       if (x[i] > 0.0) (*grads[0])[i] += g[i];
                     }
                   },
                   "relu");
}

Var global_average_pool(const Var& input) {
  const Array& x = input.value();
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("global_average_pool: expected [C x T] or [B x C x T], got " +
                     shape_string(x.shape()));
  }
  const std::size_t length = x.shape().back();
  if (length == 0) throw ShapeError("global_average_pool: zero-length input");
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  Array out(out_shape);
  const double inv = 1.0 / static_cast<double>(length);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double s = 0.0;
    const double* xr = x.data().data() + r * length;
    for (std::size_t t = 0; t < length; ++t) s += xr[t];
    out[r] = s * inv;
  }
  return Var::make(std::move(out), {input},
                   [length, inv](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t r = 0; r < g.size(); ++r) {
                       double* d = grads[0]->data().data() + r * length;
                       const double gr = g[r] * inv;
                       for (std::size_t t = 0; t < length; ++t) d[t] += gr;
                     }
                   },
                   "global_average_pool");
}

Var softmax(const Var& logits) {
  const Array& x = logits.value();
  if ((x.rank() != 1 && x.rank() != 2) || x.shape().back() == 0) {
    throw ShapeError("softmax: expected non-empty [L] or [B x L], got " + shape_string(x.shape()));
  }
  const std::size_t width = x.shape().back();
  const std::size_t count = x.size() / width;
  Array out(x.shape());
  for (std::size_t r = 0; r < count; ++r) {
    const double* xr = x.data().data() + r * width;
    double* yr = out.data().data() + r * width;
    const double mx = *std::max_element(xr, xr + width);
    double z = 0.0;
    for (std::size_t i = 0; i < width; ++i) z += (yr[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < width; ++i) yr[i] /= z;
  }
  Array y = out;
  return Var::make(std::move(out), {logits},
                   [y = std::move(y), width, count](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t r = 0; r < count; ++r) {
                       const double* yr = y.data().data() + r * width;
                       const double* gr = g.data().data() + r * width;
                       const double inner = dot(gr, yr, width);
                       double* d = grads[0]->data().data() + r * width;
                       for (std::size_t i = 0; i < width; ++i) d[i] += yr[i] * (gr[i] - inner);
                     }
                   },
                   "softmax");
}

Var cross_entropy(const Var& probabilities, std::span<const int> labels) {
  const Array& p = probabilities.value();
  if (p.rank() != 1 && p.rank() != 2) {
    throw ShapeError("cross_entropy: expected [L] or [B x L], got " + shape_string(p.shape()));
  }
  const bool batched = p.rank() == 2;
  const std::size_t width = p.shape().back();
  const std::size_t count = batched ? p.dim(0) : 1;
  if (labels.size() != count) {
    throw ShapeError("cross_entropy: " + std::to_string(count) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<int> owned(labels.begin(), labels.end());
  for (int y : owned) {
    if (y < 0 || static_cast<std::size_t>(y) >= width) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(width) + ")");
    }
  }
  Array out(batched ? Shape{count} : Shape{});
  for (std::size_t r = 0; r < count; ++r) {
    out[r] = -std::log(std::max(p[r * width + owned[r]], kProbabilityFloor));
  }
  return Var::make(std::move(out), {probabilities},
                   [probabilities, owned = std::move(owned), width](const Array& g,
                                                                   std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     const Array& pv = probabilities.value();
                     for (std::size_t r = 0; r < owned.size(); ++r) {
                       const std::size_t idx = r * width + owned[r];
                       if (pv[idx] > kProbabilityFloor) (*grads[0])[idx] -= g[r] / pv[idx];
                     }
                   },
                   "cross_entropy");
}

Var gradient_reversal(const Var& input, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("gradient_reversal: lambda must be >= 0");
  return Var::make(input.value(), {input},
                   [lambda](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += -lambda * g[i];
                   },
                   "gradient_reversal");
}

namespace {

struct CosinePair {
  double value;
  double denominator;  // max(|a||b|, eps)
  bool guarded;
};

CosinePair cosine_pair(const double* a, const double* b, std::size_t d, double na, double nb) {
  const double raw = na * nb;
  const bool guarded = raw <= kCosineEpsilon;
  const double den = guarded ? kCosineEpsilon : raw;
  return {dot(a, b, d) / den, den, guarded};
}

// d sim / d a, accumulated as scale * gradient into `out`.
void cosine_grad_a(const double* a, const double* b, std::size_t d, double na, const CosinePair& c,
                   double scale, double* out) {
  axpy(scale / c.denominator, b, out, d);
  if (!c.guarded) axpy(-scale * c.value / (na * na), a, out, d);
}

double norm(const double* a, std::size_t d) { return std::sqrt(dot(a, a, d)); }

}  // namespace

Var cosine_similarity(const Var& a, const Var& b) {
  require_same_shape(a, b, "cosine_similarity");
  if (a.value().rank() != 1) throw ShapeError("cosine_similarity: expected rank-1 vectors");
  const std::size_t d = a.value().size();
  const double* av = a.value().data().data();
  const double* bv = b.value().data().data();
  const double na = norm(av, d);
  const double nb = norm(bv, d);
  const CosinePair c = cosine_pair(av, bv, d, na, nb);
  return Var::make(Array::scalar(c.value), {a, b},
                   [a, b, d, na, nb, c](const Array& g, std::span<Array* const> grads) {
                     const double* av = a.value().data().data();
                     const double* bv = b.value().data().data();
                     if (grads[0]) cosine_grad_a(av, bv, d, na, c, g[0], grads[0]->data().data());
                     if (grads[1]) cosine_grad_a(bv, av, d, nb, c, g[0], grads[1]->data().data());
                   },
                   "cosine_similarity");
}

Var pairwise_cosine(const Var& rows_var) {
  const Array& z = rows_var.value();
  if (z.rank() != 2) throw ShapeError("pairwise_cosine: expected [B x d], got " + shape_string(z.shape()));
  const std::size_t n = z.dim(0);
  const std::size_t d = z.dim(1);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = norm(z.data().data() + i * d, d);
  Array out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) =
          cosine_pair(z.data().data() + i * d, z.data().data() + j * d, d, norms[i], norms[j]).value;
    }
  }
  return Var::make(std::move(out), {rows_var},
                   [rows_var, n, d, norms](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     const double* zv = rows_var.value().data().data();
                     double* dz = grads[0]->data().data();
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t j = 0; j < n; ++j) {
                         const double gij = g[i * n + j];
                         if (gij == 0.0) continue;
                         const double* zi = zv + i * d;
                         const double* zj = zv + j * d;
                         const CosinePair c = cosine_pair(zi, zj, d, norms[i], norms[j]);
                         cosine_grad_a(zi, zj, d, norms[i], c, gij, dz + i * d);
                         cosine_grad_a(zj, zi, d, norms[j], c, gij, dz + j * d);
                       }
                     }
                   },
                   "pairwise_cosine");
}

Var rows(const Var& input, std::size_t begin, std::size_t end) {
  const Array& x = input.value();
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw ShapeError("rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_string(x.shape()));
  }
  const std::size_t stride = x.dim(0) ? x.size() / x.dim(0) : 0;
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<double> data(x.data().begin() + begin * stride, x.data().begin() + end * stride);
  return Var::make(Array(std::move(shape), std::move(data)), {input},
                   [begin, stride](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     double* d = grads[0]->data().data() + begin * stride;
                     for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                   },
                   "rows");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat_rows: scalar input");
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.shape().size() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_rows: trailing shape mismatch " + shape_string(shape) + " vs " +
                       shape_string(p.shape()));
    }
    total += p.shape()[0];
  }
  shape[0] = total;
  std::vector<double> data;
  data.reserve(shape_size(shape));
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(data.size());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  return Var::make(Array(std::move(shape), std::move(data)), parts,
                   [offsets](const Array& g, std::span<Array* const> grads) {
                     for (std::size_t k = 0; k < grads.size(); ++k) {
                       if (!grads[k]) continue;
                       const double* src = g.data().data() + offsets[k];
                       for (std::size_t i = 0; i < grads[k]->size(); ++i) (*grads[k])[i] += src[i];
                     }
                   },
                   "concat_rows");
}

Var kl_to_batch_mean(const Var& probabilities, const Array& target) {
  const Array& p = probabilities.value();
  if (p.rank() != 2 || p.dim(0) == 0) {
    throw ShapeError("kl_to_batch_mean: expected non-empty [B x L], got " + shape_string(p.shape()));
  }
  const std::size_t count = p.dim(0);
  const std::size_t width = p.dim(1);
  require_shape(target, Shape{width}, "kl_to_batch_mean target");
  std::vector<double> m(width, 0.0);
  for (std::size_t r = 0; r < count; ++r) axpy(1.0, p.data().data() + r * width, m.data(), width);
  for (double& v : m) v /= static_cast<double>(count);
  double kl = 0.0;
  for (std::size_t l = 0; l < width; ++l) {
    if (target[l] > 0.0) kl += target[l] * (std::log(target[l]) - std::log(std::max(m[l], kProbabilityFloor)));
  }
  return Var::make(Array::scalar(kl), {probabilities},
                   [target, m, count, width](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t l = 0; l < width; ++l) {
                       if (target[l] <= 0.0 || m[l] <= kProbabilityFloor) continue;
                       const double dm = -g[0] * target[l] / m[l] / static_cast<double>(count);
                       for (std::size_t r = 0; r < count; ++r) (*grads[0])[r * width + l] += dm;
                     }
                   },
                   "kl_to_batch_mean");
}

}  // namespace tsdapt
