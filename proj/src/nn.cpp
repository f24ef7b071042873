#include "pjfit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pjfit/errors.hpp"

namespace pjfit::nn {

Parameter::Parameter(std::string name_, Shape shape)
    : name(std::move(name_)), value(shape), grad(shape), m(shape), v(std::move(shape)) {}

void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& w : p.value.values()) w = rng.uniform(-bound, bound);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

std::size_t parameter_count(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require_shape(dy, x.shape(), "relu_backward");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {
  init_uniform(weight, in, rng);
  init_uniform(bias, in, rng);
}

Tensor Dense::forward(const Tensor& x) const {
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  require_shape(x, {in}, "dense_forward");
  Tensor y({out});
  const double* w = weight.value.data();
  const double* xs = x.data();
  for (std::size_t o = 0; o < out; ++o) {
    double s = bias.value[o];
    const double* row = w + o * in;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * xs[i];
    y[o] = s;
  }
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy) {
  const std::size_t in = in_features();
  const std::size_t out = out_features();
  require_shape(x, {in}, "dense_backward");
  require_shape(dy, {out}, "dense_backward");
  Tensor dx({in});
  const double* w = weight.value.data();
  double* gw = weight.grad.data();
  const double* xs = x.data();
  double* dxs = dx.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    bias.grad[o] += g;
    if (g == 0.0) continue;
    const double* row = w + o * in;
    double* grow = gw + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      grow[i] += g * xs[i];
      dxs[i] += g * row[i];
    }
  }
  return dx;
}

// ------------------------------------------------------------ Embedding

Embedding::Embedding(const std::string& name, std::size_t rows, std::size_t width, Rng& rng)
    : table(name + ".table", {rows, width}) {
  init_uniform(table, width, rng);
}

Tensor Embedding::forward(std::span<const std::size_t> ids) const {
  const std::size_t w = width();
  Tensor out({ids.size(), w});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= rows()) {
      throw ShapeError("embedding_lookup: index " + std::to_string(ids[k]) +
                       " out of range for table " + shape_string(table.value.shape()));
    }
    auto src = table.value.row(ids[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

void Embedding::backward(std::span<const std::size_t> ids, const Tensor& dy) {
  require_shape(dy, {ids.size(), width()}, "embedding_backward");
  for (std::size_t k = 0; k < ids.size(); ++k) {
    axpy(1.0, dy.row(k), table.grad.row(ids[k]));
  }
}

// --------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel_h, std::size_t kernel_w, std::size_t pad_h_,
               std::size_t pad_w_, Rng& rng)
    : weight(name + ".weight", {out_channels, in_channels, kernel_h, kernel_w}),
      bias(name + ".bias", {out_channels}),
      pad_h(pad_h_),
      pad_w(pad_w_) {
  const std::size_t fan_in = in_channels * kernel_h * kernel_w;
  init_uniform(weight, fan_in, rng);
  init_uniform(bias, fan_in, rng);
}

Shape Conv2d::output_shape(const Shape& input) const {
  const Shape& k = weight.value.shape();
  if (input.size() != 4 || input[1] != k[1] || input[2] + 2 * pad_h < k[2] ||
      input[3] + 2 * pad_w < k[3]) {
    throw ShapeError("conv2d_forward: input " + shape_string(input) +
                     " incompatible with kernels " + shape_string(k));
  }
  return {input[0], k[0], input[2] + 2 * pad_h - k[2] + 1, input[3] + 2 * pad_w - k[3] + 1};
}

Tensor Conv2d::forward(const Tensor& x) const {
  const Shape os = output_shape(x.shape());
  const Shape& ks = weight.value.shape();
  const std::size_t n_batch = os[0], c_out = os[1], h_out = os[2], w_out = os[3];
  const std::size_t c_in = ks[1], kh = ks[2], kw = ks[3];
  const std::size_t h_in = x.dim(2), w_in = x.dim(3);
  Tensor y(os);
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t oh = 0; oh < h_out; ++oh) {
        for (std::size_t ow = 0; ow < w_out; ++ow) {
          double s = bias.value[co];
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t i = 0; i < kh; ++i) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) -
                                        static_cast<std::ptrdiff_t>(pad_h);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h_in)) continue;
              const double* xrow = x.data() + ((n * c_in + ci) * h_in + ih) * w_in;
              const double* krow = weight.value.data() + ((co * c_in + ci) * kh + i) * kw;
              for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + j) -
                                          static_cast<std::ptrdiff_t>(pad_w);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w_in)) continue;
                s += krow[j] * xrow[iw];
              }
            }
          }
          y[((n * c_out + co) * h_out + oh) * w_out + ow] = s;
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
  const Shape os = output_shape(x.shape());
  require_shape(dy, os, "conv2d_backward");
  const Shape& ks = weight.value.shape();
  const std::size_t n_batch = os[0], c_out = os[1], h_out = os[2], w_out = os[3];
  const std::size_t c_in = ks[1], kh = ks[2], kw = ks[3];
  const std::size_t h_in = x.dim(2), w_in = x.dim(3);
  Tensor dx(x.shape());
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t oh = 0; oh < h_out; ++oh) {
        for (std::size_t ow = 0; ow < w_out; ++ow) {
          const double g = dy[((n * c_out + co) * h_out + oh) * w_out + ow];
          bias.grad[co] += g;
          if (g == 0.0) continue;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t i = 0; i < kh; ++i) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) -
                                        static_cast<std::ptrdiff_t>(pad_h);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h_in)) continue;
              const std::size_t xoff = ((n * c_in + ci) * h_in + ih) * w_in;
              const std::size_t koff = ((co * c_in + ci) * kh + i) * kw;
              for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + j) -
                                          static_cast<std::ptrdiff_t>(pad_w);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w_in)) continue;
                weight.grad[koff + j] += g * x[xoff + iw];
                dx[xoff + iw] += g * weight.value[koff + j];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

// -------------------------------------------------------------- MaxPool

MaxPoolResult max_pool2d(const Tensor& x, std::size_t pool_h, std::size_t pool_w) {
  if (x.rank() != 4 || pool_h == 0 || pool_w == 0) {
    throw ShapeError("maxpool: expected rank-4 input and non-zero window, got " +
                     shape_string(x.shape()));
  }
  const std::size_t nb = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = (h + pool_h - 1) / pool_h;
  const std::size_t wo = (w + pool_w - 1) / pool_w;
  MaxPoolResult r{Tensor({nb, ch, ho, wo}), x.shape(), {}};
  r.argmax.resize(r.output.size());
  for (std::size_t nc = 0; nc < nb * ch; ++nc) {
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t i = oh * pool_h; i < std::min(h, (oh + 1) * pool_h); ++i) {
          for (std::size_t j = ow * pool_w; j < std::min(w, (ow + 1) * pool_w); ++j) {
            const std::size_t idx = (nc * h + i) * w + j;
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t out = (nc * ho + oh) * wo + ow;
        r.output[out] = best;
        r.argmax[out] = best_idx;
      }
    }
  }
  return r;
}

Tensor max_pool2d_backward(const MaxPoolResult& pooled, const Tensor& dy) {
  require_shape(dy, pooled.output.shape(), "maxpool_backward");
  Tensor dx(pooled.input_shape);
  for (std::size_t k = 0; k < dy.size(); ++k) dx[pooled.argmax[k]] += dy[k];
  return dx;
}

// ----------------------------------------------------------------- LSTM

LstmState LstmState::zeros(std::size_t hidden) { return {Tensor({hidden}), Tensor({hidden})}; }

LstmCell::LstmCell(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng)
    : weight(name + ".weight", {4 * hidden, input + hidden}), bias(name + ".bias", {4 * hidden}) {
  init_uniform(weight, input + hidden, rng);
  init_uniform(bias, input + hidden, rng);
}

LstmState LstmCell::step(const Tensor& x, const LstmState& state, LstmStepCache* cache) const {
  const std::size_t hs = hidden_size();
  const std::size_t in = input_size();
  require_shape(x, {in}, "lstm_step");
  require_shape(state.h, {hs}, "lstm_step");
  require_shape(state.c, {hs}, "lstm_step");
  const std::size_t cols = in + hs;
  Tensor gates({4 * hs});
  const double* w = weight.value.data();
  for (std::size_t r = 0; r < 4 * hs; ++r) {
    const double* row = w + r * cols;
    double s = bias.value[r];
    for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
    for (std::size_t i = 0; i < hs; ++i) s += row[in + i] * state.h[i];
    gates[r] = s;
  }
  LstmState next = LstmState::zeros(hs);
  Tensor tanh_c({hs});
  for (std::size_t k = 0; k < hs; ++k) {
    const double ig = sigmoid(gates[k]);
    const double fg = sigmoid(gates[hs + k]);
    const double gg = std::tanh(gates[2 * hs + k]);
    const double og = sigmoid(gates[3 * hs + k]);
    gates[k] = ig;
    gates[hs + k] = fg;
    gates[2 * hs + k] = gg;
    gates[3 * hs + k] = og;
    next.c[k] = fg * state.c[k] + ig * gg;
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = og * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->prev = state;
    cache->gates = std::move(gates);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

Tensor LstmCell::backward_step(const LstmStepCache& cache, Tensor& dh, Tensor& dc) {
  const std::size_t hs = hidden_size();
  const std::size_t in = input_size();
  if (cache.gates.size() != 4 * hs) {
    throw ShapeError("lstm_backward: step cache is empty (no forward pass recorded)");
  }
  require_shape(dh, {hs}, "lstm_backward");
  require_shape(dc, {hs}, "lstm_backward");
  const std::size_t cols = in + hs;
  // Pre-activation gradients.
  Tensor dz({4 * hs});
  Tensor dc_prev({hs});
  for (std::size_t k = 0; k < hs; ++k) {
    const double ig = cache.gates[k];
    const double fg = cache.gates[hs + k];
    const double gg = cache.gates[2 * hs + k];
    const double og = cache.gates[3 * hs + k];
    const double tc = cache.tanh_c[k];
    const double dct = dc[k] + dh[k] * og * (1.0 - tc * tc);
    dz[k] = dct * gg * ig * (1.0 - ig);
    dz[hs + k] = dct * cache.prev.c[k] * fg * (1.0 - fg);
    dz[2 * hs + k] = dct * ig * (1.0 - gg * gg);
    dz[3 * hs + k] = dh[k] * tc * og * (1.0 - og);
    dc_prev[k] = dct * fg;
  }
  Tensor dx({in});
  Tensor dh_prev({hs});
  const double* w = weight.value.data();
  double* gw = weight.grad.data();
  for (std::size_t r = 0; r < 4 * hs; ++r) {
    const double g = dz[r];
    bias.grad[r] += g;
    const double* row = w + r * cols;
    double* grow = gw + r * cols;
    for (std::size_t i = 0; i < in; ++i) {
      grow[i] += g * cache.x[i];
      dx[i] += g * row[i];
    }
    for (std::size_t i = 0; i < hs; ++i) {
      grow[in + i] += g * cache.prev.h[i];
      dh_prev[i] += g * row[in + i];
    }
  }
  dh = std::move(dh_prev);
  dc = std::move(dc_prev);
  return dx;
}

// ------------------------------------------------------------------ BCE

double bce_loss(double score, int label) {
  constexpr double kEps = 1e-12;
  const double p = std::clamp(score, kEps, 1.0 - kEps);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double bce_logit_grad(double z, int label) { return sigmoid(z) - static_cast<double>(label); }

}  // namespace pjfit::nn
