#pragma once

// Layer kernels with hand-written reverse passes. Forward functions are
// const and keep no state, so frozen layers can be evaluated from several
// threads. Each backward takes the forward input it needs, accumulates into
// Parameter::grad and returns the gradient with respect to that input.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pjfit/rng.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit::nn {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Shape shape);

  std::string name;
  Tensor value;
  Tensor grad;
  // Adam moments.
  Tensor m;
  Tensor v;
  std::int64_t step = 0;

  void zero_grad() { grad.fill(0.0); }
};

using ParameterList = std::vector<Parameter*>;

// Uniform in +-1/sqrt(fan_in).
void init_uniform(Parameter& p, std::size_t fan_in, Rng& rng);
void zero_grads(std::span<Parameter* const> params);
std::size_t parameter_count(std::span<Parameter* const> params);

double sigmoid(double z);
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// Fully connected layer on a rank-1 input: y = W x + b, W is [out, in].
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
  void collect(ParameterList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;
  Parameter bias;
};

// Row lookup into a [rows, width] table.
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t rows, std::size_t width, Rng& rng);

  std::size_t rows() const { return table.value.dim(0); }
  std::size_t width() const { return table.value.dim(1); }

  // Returns [ids.size(), width].
  Tensor forward(std::span<const std::size_t> ids) const;
  void backward(std::span<const std::size_t> ids, const Tensor& dy);
  void collect(ParameterList& out) { out.push_back(&table); }

  Parameter table;
};

// 2D cross-correlation with stride 1 and symmetric zero padding.
// Input [N, C_in, H, W]; weight [C_out, C_in, KH, KW]; output
// [N, C_out, H + 2*pad_h - KH + 1, W + 2*pad_w - KW + 1].
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel_h, std::size_t kernel_w, std::size_t pad_h, std::size_t pad_w,
         Rng& rng);

  Shape output_shape(const Shape& input) const;
  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
  void collect(ParameterList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;
  Parameter bias;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// Max pooling over [N, C, H, W] with non-overlapping windows. Partial
// windows at the edge are kept (ceil mode), so H=1 pools to 1.
struct MaxPoolResult {
  Tensor output;
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

MaxPoolResult max_pool2d(const Tensor& x, std::size_t pool_h, std::size_t pool_w);
Tensor max_pool2d_backward(const MaxPoolResult& pooled, const Tensor& dy);

struct LstmState {
  Tensor h;
  Tensor c;
  static LstmState zeros(std::size_t hidden);
};

struct LstmStepCache {
  Tensor x;
  LstmState prev;
  Tensor gates;  // activated [i, f, g, o], 4*hidden
  Tensor c;
  Tensor tanh_c;
};

// Standard LSTM cell, gate order input/forget/candidate/output. One fused
// weight [4H, I + H] acting on [x; h_prev].
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return weight.value.dim(1) - hidden_size(); }
  std::size_t hidden_size() const { return weight.value.dim(0) / 4; }

  // `cache` may be null for inference.
  LstmState step(const Tensor& x, const LstmState& state, LstmStepCache* cache) const;
  // dh and dc enter as gradients w.r.t. this step's outputs and leave as
  // gradients w.r.t. the previous state. Returns dL/dx.
  Tensor backward_step(const LstmStepCache& cache, Tensor& dh, Tensor& dc);
  void collect(ParameterList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;
  Parameter bias;
};

// Binary cross-entropy of a probability; the score is clamped to
// [1e-12, 1 - 1e-12] so the loss is always finite.
double bce_loss(double score, int label);
// d bce(sigmoid(z), label) / dz.
double bce_logit_grad(double z, int label);

}  // namespace pjfit::nn
