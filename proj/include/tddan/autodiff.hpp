// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tddan/common.hpp"

namespace tddan::ad {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backprop;  // scatters node.grad into inputs
  const char* op = "leaf";

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Shared handle on a tape node. Copies alias the same storage; graphs are
/// freed when the last handle to the result goes away.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_mat(const Mat& m, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& grad() { return node_->ensure_grad(), node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  double item() const;

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

 private:
  NodePtr node_;
};

/// Reverse-mode sweep from a scalar loss; touches each node once in reverse
/// topological order and accumulates into .grad of every requires_grad
/// ancestor.
void backward(const Tensor& loss);

// --- elementwise and reductions ---------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor div_scalars(const Tensor& num, const Tensor& den);
/// Broadcast multiply of a scalar tensor into any shape.
Tensor scale_by(const Tensor& a, const Tensor& scalar);
/// Leaf copy sharing no tape history.
Tensor detach(const Tensor& a);

// --- linear algebra ----------------------------------------------------------

Tensor matvec(const Tensor& m, const Tensor& v);  // [R,C] x [C] -> [R]

// --- network building blocks -------------------------------------------------

/// Cross-correlation, input [C_in, T], weight [C_out, C_in/groups, P],
/// optional bias [C_out]; symmetric zero padding.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int dilation, int groups, int padding);

/// Per-channel parametric ReLU over [C, T] with slope [C].
Tensor prelu(const Tensor& input, const Tensor& slope);

/// Normalizes over all C*T entries, then applies per-channel gain/bias.
Tensor global_layer_norm(const Tensor& input, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-12);

/// Strided framing correlation with the module-wide padding rule
/// (pad kernel-hop on the left, enough on the right to cover every sample).
/// input [L], weight [C, N] -> [C, T].
Tensor encode_frames(const Tensor& input, const Tensor& weight, int hop);

/// Transposed counterpart of encode_frames; trims back to out_len samples.
/// rep [C, T], weight [C, N] -> [out_len].
Tensor decode_frames(const Tensor& rep, const Tensor& weight, int hop, int out_len);

Tensor slice_rows(const Tensor& input, int row_begin, int row_count);

// --- embedding/attractor ops -------------------------------------------------
//
// Embedding fields are stored as [G*D, T]: channel g*D + d holds coordinate d
// of the bin-g embedding at frame t.

/// Masked average of selected bin embeddings: a[d] = sum_sel emb / count.
/// selection is a constant {0,1} matrix stored as [G, T] row-major.
Tensor masked_average(const Tensor& emb, const Mat& selection, int groups, int dim);

/// Per-bin inner product with an attractor: out[g, t] = sum_d a[d]*emb[g*D+d, t].
Tensor group_dot(const Tensor& emb, const Tensor& attractor, int groups);

/// Sum over selected bins of ||attractor - embedding||^2 (no normalization).
Tensor concentration_term(const Tensor& emb, const Tensor& attractor, const Mat& selection,
                          int groups);

// --- gradient checking ---------------------------------------------------------

/// Central finite differences against the autodiff gradient; returns the max
/// over coordinates of |analytic - numeric| / (|numeric| + 1e-8).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Shape& shape,
                         const std::vector<double>& x0, double h = 1e-6);

/// Same check against an arbitrary parameter buffer perturbed in place.
double finite_diff_check_values(const std::function<double()>& loss_value,
                                std::vector<double>& values, const std::vector<double>& analytic,
                                const std::vector<std::size_t>& coords, double h = 1e-6);

}  // namespace tddan::ad
