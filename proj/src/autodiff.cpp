// Copyright 2026 The tddan Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tddan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tddan/transforms.hpp"

namespace tddan::ad {

namespace {

NodePtr make_node(const char* op, Shape shape, std::vector<Tensor> inputs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), 0.0);
  for (const Tensor& t : inputs)
    if (t.defined() && t.requires_grad()) n->requires_grad = true;
  if (n->requires_grad) {
    for (const Tensor& t : inputs)
      if (t.defined()) n->inputs.push_back(t.node());
  }
  return n;
}

void accumulate(Node& target, std::size_t i, double v) {
  target.ensure_grad();
  target.grad[i] += v;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw InvalidArgument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape_numel(shape)) throw InvalidArgument("leaf: value count != shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return leaf({1}, {v}, requires_grad);
}

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
  return leaf({m.rows, m.cols}, m.data, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw InvalidArgument("item: tensor is not scalar");
  return node_->value[0];
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw InvalidArgument("backward: loss must be a defined scalar");
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // iterative post-order DFS; children land before parents
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& fr = stack.back();
    if (fr.next < fr.node->inputs.size()) {
      Node* child = fr.node->inputs[fr.next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(fr.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto n = make_node("add", a.shape(), {a, b});
  const std::size_t sz = n->numel();
  for (std::size_t i = 0; i < sz; ++i) n->value[i] = a.values()[i] + b.values()[i];
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      for (std::size_t i = 0; i < self.numel(); ++i) {
        if (self.inputs[0]->requires_grad) accumulate(*self.inputs[0], i, self.grad[i]);
        if (self.inputs[1]->requires_grad) accumulate(*self.inputs[1], i, self.grad[i]);
      }
    };
  return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto n = make_node("sub", a.shape(), {a, b});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = a.values()[i] - b.values()[i];
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      for (std::size_t i = 0; i < self.numel(); ++i) {
        if (self.inputs[0]->requires_grad) accumulate(*self.inputs[0], i, self.grad[i]);
        if (self.inputs[1]->requires_grad) accumulate(*self.inputs[1], i, -self.grad[i]);
      }
    };
  return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto n = make_node("mul", a.shape(), {a, b});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = a.values()[i] * b.values()[i];
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      Node& b = *self.inputs[1];
      for (std::size_t i = 0; i < self.numel(); ++i) {
        if (a.requires_grad) accumulate(a, i, self.grad[i] * b.value[i]);
        if (b.requires_grad) accumulate(b, i, self.grad[i] * a.value[i]);
      }
    };
  return Tensor(n);
}

Tensor scale(const Tensor& a, double c) {
  auto n = make_node("scale", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = c * a.values()[i];
  if (n->requires_grad)
    n->backprop = [c](Node& self) {
      for (std::size_t i = 0; i < self.numel(); ++i)
        accumulate(*self.inputs[0], i, c * self.grad[i]);
    };
  return Tensor(n);
}

Tensor add_scalar(const Tensor& a, double c) {
  auto n = make_node("add_scalar", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = a.values()[i] + c;
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      for (std::size_t i = 0; i < self.numel(); ++i) accumulate(*self.inputs[0], i, self.grad[i]);
    };
  return Tensor(n);
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  auto n = make_node("relu", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = std::max(0.0, a.values()[i]);
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      for (std::size_t i = 0; i < self.numel(); ++i)
        if (a.value[i] > 0.0) accumulate(a, i, self.grad[i]);
    };
  return Tensor(n);
}

Tensor abs_t(const Tensor& a) {
  auto n = make_node("abs", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = std::abs(a.values()[i]);
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      for (std::size_t i = 0; i < self.numel(); ++i) {
        if (a.value[i] > 0.0)
          accumulate(a, i, self.grad[i]);
        else if (a.value[i] < 0.0)
          accumulate(a, i, -self.grad[i]);
      }
    };
  return Tensor(n);
}

Tensor sigmoid(const Tensor& a) {
  auto n = make_node("sigmoid", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      for (std::size_t i = 0; i < self.numel(); ++i) {
        const double y = self.value[i];
        accumulate(*self.inputs[0], i, self.grad[i] * y * (1.0 - y));
      }
    };
  return Tensor(n);
}

Tensor log_t(const Tensor& a) {
  auto n = make_node("log", a.shape(), {a});
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = std::log(a.values()[i]);
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      for (std::size_t i = 0; i < self.numel(); ++i)
        accumulate(a, i, self.grad[i] / a.value[i]);
    };
  return Tensor(n);
}

Tensor sum(const Tensor& a) {
  auto n = make_node("sum", {1}, {a});
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  n->value[0] = acc;
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      for (std::size_t i = 0; i < a.numel(); ++i) accumulate(a, i, self.grad[0]);
    };
  return Tensor(n);
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw InvalidArgument("dot: length mismatch");
  auto n = make_node("dot", {1}, {a, b});
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.values()[i] * b.values()[i];
  n->value[0] = acc;
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      Node& b = *self.inputs[1];
      const double g = self.grad[0];
      for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a.requires_grad) accumulate(a, i, g * b.value[i]);
        if (b.requires_grad) accumulate(b, i, g * a.value[i]);
      }
    };
  return Tensor(n);
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  auto n = make_node("mse", {1}, {a, b});
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  n->value[0] = acc / static_cast<double>(a.numel());
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      Node& b = *self.inputs[1];
      const double g = 2.0 * self.grad[0] / static_cast<double>(a.numel());
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.value[i] - b.value[i];
        if (a.requires_grad) accumulate(a, i, g * d);
        if (b.requires_grad) accumulate(b, i, -g * d);
      }
    };
  return Tensor(n);
}

Tensor div_scalars(const Tensor& num, const Tensor& den) {
  if (num.numel() != 1 || den.numel() != 1)
    throw InvalidArgument("div_scalars: both operands must be scalars");
  auto n = make_node("div", {1}, {num, den});
  n->value[0] = num.values()[0] / den.values()[0];
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      Node& b = *self.inputs[1];
      const double g = self.grad[0];
      if (a.requires_grad) accumulate(a, 0, g / b.value[0]);
      if (b.requires_grad) accumulate(b, 0, -g * a.value[0] / (b.value[0] * b.value[0]));
    };
  return Tensor(n);
}

Tensor scale_by(const Tensor& a, const Tensor& scalar) {
  if (scalar.numel() != 1) throw InvalidArgument("scale_by: scale must be scalar");
  auto n = make_node("scale_by", a.shape(), {a, scalar});
  const double s = scalar.values()[0];
  for (std::size_t i = 0; i < n->numel(); ++i) n->value[i] = s * a.values()[i];
  if (n->requires_grad)
    n->backprop = [](Node& self) {
      Node& a = *self.inputs[0];
      Node& s = *self.inputs[1];
      for (std::size_t i = 0; i < self.numel(); ++i) {
        if (a.requires_grad) accumulate(a, i, self.grad[i] * s.value[0]);
        if (s.requires_grad) accumulate(s, 0, self.grad[i] * a.value[i]);
      }
    };
  return Tensor(n);
}

Tensor detach(const Tensor& a) { return Tensor::leaf(a.shape(), a.values(), false); }

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.shape().size() != 2 || v.shape().size() != 1 || m.shape()[1] != v.shape()[0])
    throw InvalidArgument("matvec: expected [R,C] x [C]");
  const int rows = m.shape()[0];
  const int cols = m.shape()[1];
  auto n = make_node("matvec", {rows}, {m, v});
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += m.values()[static_cast<std::size_t>(r) * cols + c] * v.values()[c];
    n->value[r] = acc;
  }
  if (n->requires_grad)
    n->backprop = [rows, cols](Node& self) {
      Node& m = *self.inputs[0];
      Node& v = *self.inputs[1];
      for (int r = 0; r < rows; ++r) {
        const double g = self.grad[r];
        for (int c = 0; c < cols; ++c) {
          const std::size_t mi = static_cast<std::size_t>(r) * cols + c;
          if (m.requires_grad) accumulate(m, mi, g * v.value[c]);
          if (v.requires_grad) accumulate(v, c, g * m.value[mi]);
        }
      }
    };
  return Tensor(n);
}

// --- network blocks ------------------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int dilation, int groups, int padding) {
  if (input.shape().size() != 2 || weight.shape().size() != 3)
    throw InvalidArgument("conv1d: expected input [C,T], weight [Cout,Cin/g,P]");
  if (stride < 1 || dilation < 1 || groups < 1 || padding < 0)
    throw InvalidArgument("conv1d: bad stride/dilation/groups/padding");
  const int c_in = input.shape()[0];
  const int t_in = input.shape()[1];
  const int c_out = weight.shape()[0];
  const int c_in_pg = weight.shape()[1];
  const int p_len = weight.shape()[2];
  if (c_in % groups != 0 || c_out % groups != 0 || c_in / groups != c_in_pg)
    throw InvalidArgument("conv1d: group/channel mismatch");
  if (bias.defined() && (bias.shape().size() != 1 || bias.shape()[0] != c_out))
    throw InvalidArgument("conv1d: bias shape mismatch");
  const int span = dilation * (p_len - 1) + 1;
  const int t_out = (t_in + 2 * padding - span) / stride + 1;
  if (t_out < 1) throw InvalidArgument("conv1d: output would be empty");

  const bool has_bias = bias.defined();
  std::vector<Tensor> ins = has_bias ? std::vector<Tensor>{input, weight, bias}
                                     : std::vector<Tensor>{input, weight};
  auto n = make_node("conv1d", {c_out, t_out}, ins);

  const int c_out_pg = c_out / groups;
  const double* xv = input.values().data();
  const double* wv = weight.values().data();
  for (int co = 0; co < c_out; ++co) {
    const int gi = co / c_out_pg;
    const int ci0 = gi * c_in_pg;
    double* orow = n->value.data() + static_cast<std::size_t>(co) * t_out;
    if (has_bias) {
      const double b = bias.values()[co];
      for (int t = 0; t < t_out; ++t) orow[t] = b;
    }
    for (int cip = 0; cip < c_in_pg; ++cip) {
      const double* xrow = xv + static_cast<std::size_t>(ci0 + cip) * t_in;
      const double* wrow = wv + (static_cast<std::size_t>(co) * c_in_pg + cip) * p_len;
      for (int p = 0; p < p_len; ++p) {
        const double w = wrow[p];
        if (w == 0.0) continue;
        const int off = p * dilation - padding;
        // valid t range: 0 <= t*stride + off < t_in
        int t_lo = 0;
        if (off < 0) t_lo = (-off + stride - 1) / stride;
        int t_hi = t_out;
        if (off < t_in) {
          t_hi = std::min<long>(t_out, (static_cast<long>(t_in) - 1 - off) / stride + 1);
        } else {
          t_hi = 0;
        }
        for (int t = t_lo; t < t_hi; ++t) orow[t] += w * xrow[t * stride + off];
      }
    }
  }

  if (n->requires_grad)
    n->backprop = [stride, dilation, groups, padding, c_in, t_in, c_out, c_in_pg, p_len, t_out,
                   has_bias](Node& self) {
      Node& x = *self.inputs[0];
      Node& w = *self.inputs[1];
      Node* b = has_bias ? self.inputs[2].get() : nullptr;
      if (x.requires_grad) x.ensure_grad();
      if (w.requires_grad) w.ensure_grad();
      if (b && b->requires_grad) b->ensure_grad();
      const int c_out_pg = c_out / groups;
      for (int co = 0; co < c_out; ++co) {
        const int gi = co / c_out_pg;
        const int ci0 = gi * c_in_pg;
        const double* grow = self.grad.data() + static_cast<std::size_t>(co) * t_out;
        if (b && b->requires_grad) {
          double acc = 0.0;
          for (int t = 0; t < t_out; ++t) acc += grow[t];
          b->grad[co] += acc;
        }
        for (int cip = 0; cip < c_in_pg; ++cip) {
          const std::size_t xbase = static_cast<std::size_t>(ci0 + cip) * t_in;
          const std::size_t wbase = (static_cast<std::size_t>(co) * c_in_pg + cip) * p_len;
          for (int p = 0; p < p_len; ++p) {
            const int off = p * dilation - padding;
            int t_lo = 0;
            if (off < 0) t_lo = (-off + stride - 1) / stride;
            int t_hi = t_out;
            if (off < t_in) {
              t_hi = std::min<long>(t_out, (static_cast<long>(t_in) - 1 - off) / stride + 1);
            } else {
              t_hi = 0;
            }
            const double wval = w.value[wbase + p];
            double wacc = 0.0;
            for (int t = t_lo; t < t_hi; ++t) {
              const double g = grow[t];
              const std::size_t xi = xbase + t * stride + off;
              wacc += g * x.value[xi];
              if (x.requires_grad) x.grad[xi] += g * wval;
            }
            if (w.requires_grad) w.grad[wbase + p] += wacc;
          }
        }
      }
    };
  return Tensor(n);
}

Tensor prelu(const Tensor& input, const Tensor& slope) {
  if (input.shape().size() != 2 || slope.shape().size() != 1 ||
      slope.shape()[0] != input.shape()[0])
    throw InvalidArgument("prelu: expected input [C,T], slope [C]");
  const int c = input.shape()[0];
  const int t_len = input.shape()[1];
  auto n = make_node("prelu", input.shape(), {input, slope});
  for (int ci = 0; ci < c; ++ci) {
    const double a = slope.values()[ci];
    const double* xrow = input.values().data() + static_cast<std::size_t>(ci) * t_len;
    double* orow = n->value.data() + static_cast<std::size_t>(ci) * t_len;
    for (int t = 0; t < t_len; ++t) orow[t] = xrow[t] > 0.0 ? xrow[t] : a * xrow[t];
  }
  if (n->requires_grad)
    n->backprop = [c, t_len](Node& self) {
      Node& x = *self.inputs[0];
      Node& a = *self.inputs[1];
      if (x.requires_grad) x.ensure_grad();
      if (a.requires_grad) a.ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        const double slope = a.value[ci];
        double slope_acc = 0.0;
        const std::size_t base = static_cast<std::size_t>(ci) * t_len;
        for (int t = 0; t < t_len; ++t) {
          const double xv = x.value[base + t];
          const double g = self.grad[base + t];
          if (xv > 0.0) {
            if (x.requires_grad) x.grad[base + t] += g;
          } else if (xv < 0.0) {
            if (x.requires_grad) x.grad[base + t] += g * slope;
            slope_acc += g * xv;
          }
          // derivative defined as 0 exactly at the kink
        }
        if (a.requires_grad) a.grad[ci] += slope_acc;
      }
    };
  return Tensor(n);
}

Tensor global_layer_norm(const Tensor& input, const Tensor& gain, const Tensor& bias,
                         double eps) {
  if (input.shape().size() != 2) throw InvalidArgument("gln: expected input [C,T]");
  const int c = input.shape()[0];
  const int t_len = input.shape()[1];
  if (gain.shape() != Shape{c} || bias.shape() != Shape{c})
    throw InvalidArgument("gln: gain/bias must be [C]");
  const std::size_t n_total = input.numel();

  double mu = 0.0;
  for (double v : input.values()) mu += v;
  mu /= static_cast<double>(n_total);
  double var = 0.0;
  for (double v : input.values()) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n_total);
  const double s = std::sqrt(var + eps);

  auto n = make_node("gln", input.shape(), {input, gain, bias});
  for (int ci = 0; ci < c; ++ci) {
    const double g = gain.values()[ci];
    const double b = bias.values()[ci];
    const std::size_t base = static_cast<std::size_t>(ci) * t_len;
    for (int t = 0; t < t_len; ++t)
      n->value[base + t] = g * (input.values()[base + t] - mu) / s + b;
  }
  if (n->requires_grad)
    n->backprop = [c, t_len, mu, s, n_total](Node& self) {
      Node& x = *self.inputs[0];
      Node& gain = *self.inputs[1];
      Node& bias = *self.inputs[2];
      if (x.requires_grad) x.ensure_grad();
      if (gain.requires_grad) gain.ensure_grad();
      if (bias.requires_grad) bias.ensure_grad();

      // gradient of the normalized value for every entry
      std::vector<double> ghat(self.numel());
      double ghat_sum = 0.0, ghat_dot_u = 0.0;
      for (int ci = 0; ci < c; ++ci) {
        const std::size_t base = static_cast<std::size_t>(ci) * t_len;
        const double gval = gain.value[ci];
        double dgain = 0.0, dbias = 0.0;
        for (int t = 0; t < t_len; ++t) {
          const double g = self.grad[base + t];
          const double u = x.value[base + t] - mu;
          ghat[base + t] = g * gval;
          ghat_sum += g * gval;
          ghat_dot_u += g * gval * u;
          dgain += g * u / s;
          dbias += g;
        }
        if (gain.requires_grad) gain.grad[ci] += dgain;
        if (bias.requires_grad) bias.grad[ci] += dbias;
      }
      if (x.requires_grad) {
        const double inv_n = 1.0 / static_cast<double>(n_total);
        const double dvar = -0.5 * ghat_dot_u / (s * s * s);
        const double dmu = -ghat_sum / s;
        for (std::size_t i = 0; i < self.numel(); ++i) {
          const double u = x.value[i] - mu;
          x.grad[i] += ghat[i] / s + dvar * 2.0 * u * inv_n + dmu * inv_n;
        }
      }
    };
  return Tensor(n);
}

Tensor encode_frames(const Tensor& input, const Tensor& weight, int hop) {
  if (input.shape().size() != 1 || weight.shape().size() != 2)
    throw InvalidArgument("encode_frames: expected input [L], weight [C,N]");
  const int len = input.shape()[0];
  const int c = weight.shape()[0];
  const int klen = weight.shape()[1];
  const dsp::Framing fr = dsp::plan_framing(len, klen, hop);

  auto n = make_node("encode_frames", {c, fr.frames}, {input, weight});
  const double* xv = input.values().data();
  const double* wv = weight.values().data();
  for (int t = 0; t < fr.frames; ++t) {
    const int base = t * hop - fr.pad_left;  // padded frame start in source coords
    for (int ci = 0; ci < c; ++ci) {
      const double* wrow = wv + static_cast<std::size_t>(ci) * klen;
      double acc = 0.0;
      const int n_lo = std::max(0, -base);
      const int n_hi = std::min(klen, len - base);
      for (int k = n_lo; k < n_hi; ++k) acc += wrow[k] * xv[base + k];
      n->value[static_cast<std::size_t>(ci) * fr.frames + t] = acc;
    }
  }
  if (n->requires_grad)
    n->backprop = [len, c, klen, hop, fr](Node& self) {
      Node& x = *self.inputs[0];
      Node& w = *self.inputs[1];
      if (x.requires_grad) x.ensure_grad();
      if (w.requires_grad) w.ensure_grad();
      for (int t = 0; t < fr.frames; ++t) {
        const int base = t * hop - fr.pad_left;
        const int n_lo = std::max(0, -base);
        const int n_hi = std::min(klen, len - base);
        for (int ci = 0; ci < c; ++ci) {
          const double g = self.grad[static_cast<std::size_t>(ci) * fr.frames + t];
          if (g == 0.0) continue;
          const std::size_t wbase = static_cast<std::size_t>(ci) * klen;
          for (int k = n_lo; k < n_hi; ++k) {
            if (x.requires_grad) x.grad[base + k] += g * w.value[wbase + k];
            if (w.requires_grad) w.grad[wbase + k] += g * x.value[base + k];
          }
        }
      }
    };
  return Tensor(n);
}

Tensor decode_frames(const Tensor& rep, const Tensor& weight, int hop, int out_len) {
  if (rep.shape().size() != 2 || weight.shape().size() != 2)
    throw InvalidArgument("decode_frames: expected rep [C,T], weight [C,N]");
  const int c = rep.shape()[0];
  const int frames = rep.shape()[1];
  const int klen = weight.shape()[1];
  if (weight.shape()[0] != c) throw InvalidArgument("decode_frames: channel mismatch");
  const dsp::Framing fr = dsp::plan_framing(out_len, klen, hop);
  if (fr.frames != frames) throw InvalidArgument("decode_frames: frame count mismatch");

  auto n = make_node("decode_frames", {out_len}, {rep, weight});
  const double* rv = rep.values().data();
  const double* wv = weight.values().data();
  for (int t = 0; t < frames; ++t) {
    const int base = t * hop - fr.pad_left;
    const int n_lo = std::max(0, -base);
    const int n_hi = std::min(klen, out_len - base);
    for (int ci = 0; ci < c; ++ci) {
      const double r = rv[static_cast<std::size_t>(ci) * frames + t];
      if (r == 0.0) continue;
      const double* wrow = wv + static_cast<std::size_t>(ci) * klen;
      for (int k = n_lo; k < n_hi; ++k) n->value[base + k] += wrow[k] * r;
    }
  }
  if (n->requires_grad)
    n->backprop = [c, frames, klen, hop, fr, out_len](Node& self) {
      Node& rep = *self.inputs[0];
      Node& w = *self.inputs[1];
      if (rep.requires_grad) rep.ensure_grad();
      if (w.requires_grad) w.ensure_grad();
      for (int t = 0; t < frames; ++t) {
        const int base = t * hop - fr.pad_left;
        const int n_lo = std::max(0, -base);
        const int n_hi = std::min(klen, out_len - base);
        for (int ci = 0; ci < c; ++ci) {
          const std::size_t ri = static_cast<std::size_t>(ci) * frames + t;
          const std::size_t wbase = static_cast<std::size_t>(ci) * klen;
          double racc = 0.0;
          for (int k = n_lo; k < n_hi; ++k) {
            const double g = self.grad[base + k];
            racc += g * w.value[wbase + k];
            if (w.requires_grad) w.grad[wbase + k] += g * rep.value[ri];
          }
          if (rep.requires_grad) rep.grad[ri] += racc;
        }
      }
    };
  return Tensor(n);
}

Tensor slice_rows(const Tensor& input, int row_begin, int row_count) {
  if (input.shape().size() != 2) throw InvalidArgument("slice_rows: expected [C,T]");
  const int c = input.shape()[0];
  const int t_len = input.shape()[1];
  if (row_begin < 0 || row_begin + row_count > c)
    throw InvalidArgument("slice_rows: range out of bounds");
  auto n = make_node("slice_rows", {row_count, t_len}, {input});
  std::copy(input.values().begin() + static_cast<std::size_t>(row_begin) * t_len,
            input.values().begin() + static_cast<std::size_t>(row_begin + row_count) * t_len,
            n->value.begin());
  if (n->requires_grad)
    n->backprop = [row_begin, t_len](Node& self) {
      Node& x = *self.inputs[0];
      x.ensure_grad();
      const std::size_t off = static_cast<std::size_t>(row_begin) * t_len;
      for (std::size_t i = 0; i < self.numel(); ++i) x.grad[off + i] += self.grad[i];
    };
  return Tensor(n);
}

// --- embedding/attractor ops ---------------------------------------------------

namespace {

void check_embedding(const Tensor& emb, const Mat& selection, int groups, int dim) {
  if (emb.shape().size() != 2 || emb.shape()[0] != groups * dim)
    throw InvalidArgument("embedding op: expected [G*D, T]");
  if (selection.rows != emb.shape()[1] || selection.cols != groups)
    throw InvalidArgument("embedding op: selection must be [T, G]");
}

}  // namespace

Tensor masked_average(const Tensor& emb, const Mat& selection, int groups, int dim) {
  check_embedding(emb, selection, groups, dim);
  const int frames = emb.shape()[1];
  double count = 0.0;
  for (double v : selection.data) count += (v != 0.0) ? 1.0 : 0.0;
  if (count < 1.0) throw EmptySpeaker("masked_average: no selected bins");

  auto n = make_node("masked_average", {dim}, {emb});
  for (int t = 0; t < frames; ++t) {
    for (int g = 0; g < groups; ++g) {
      if (selection.at(t, g) == 0.0) continue;
      for (int d = 0; d < dim; ++d)
        n->value[d] += emb.values()[(static_cast<std::size_t>(g) * dim + d) * frames + t];
    }
  }
  for (int d = 0; d < dim; ++d) n->value[d] /= count;

  if (n->requires_grad) {
    Mat sel = selection;  // captured by value for the backward pass
    n->backprop = [sel = std::move(sel), groups, dim, frames, count](Node& self) {
      Node& emb = *self.inputs[0];
      emb.ensure_grad();
      for (int t = 0; t < frames; ++t)
        for (int g = 0; g < groups; ++g) {
          if (sel.at(t, g) == 0.0) continue;
          for (int d = 0; d < dim; ++d)
            emb.grad[(static_cast<std::size_t>(g) * dim + d) * frames + t] +=
                self.grad[d] / count;
        }
    };
  }
  return Tensor(n);
}

Tensor group_dot(const Tensor& emb, const Tensor& attractor, int groups) {
  if (attractor.shape().size() != 1) throw InvalidArgument("group_dot: attractor must be [D]");
  const int dim = attractor.shape()[0];
  if (emb.shape().size() != 2 || emb.shape()[0] != groups * dim)
    throw InvalidArgument("group_dot: expected emb [G*D, T]");
  const int frames = emb.shape()[1];

  auto n = make_node("group_dot", {groups, frames}, {emb, attractor});
  for (int g = 0; g < groups; ++g)
    for (int d = 0; d < dim; ++d) {
      const double a = attractor.values()[d];
      if (a == 0.0) continue;
      const std::size_t ebase = (static_cast<std::size_t>(g) * dim + d) * frames;
      double* orow = n->value.data() + static_cast<std::size_t>(g) * frames;
      for (int t = 0; t < frames; ++t) orow[t] += a * emb.values()[ebase + t];
    }
  if (n->requires_grad)
    n->backprop = [groups, dim, frames](Node& self) {
      Node& emb = *self.inputs[0];
      Node& att = *self.inputs[1];
      if (emb.requires_grad) emb.ensure_grad();
      if (att.requires_grad) att.ensure_grad();
      for (int g = 0; g < groups; ++g) {
        const double* grow = self.grad.data() + static_cast<std::size_t>(g) * frames;
        for (int d = 0; d < dim; ++d) {
          const std::size_t ebase = (static_cast<std::size_t>(g) * dim + d) * frames;
          const double a = att.value[d];
          double aacc = 0.0;
          for (int t = 0; t < frames; ++t) {
            aacc += grow[t] * emb.value[ebase + t];
            if (emb.requires_grad) emb.grad[ebase + t] += grow[t] * a;
          }
          if (att.requires_grad) att.grad[d] += aacc;
        }
      }
    };
  return Tensor(n);
}

Tensor concentration_term(const Tensor& emb, const Tensor& attractor, const Mat& selection,
                          int groups) {
  if (attractor.shape().size() != 1) throw InvalidArgument("concentration: attractor must be [D]");
  const int dim = attractor.shape()[0];
  check_embedding(emb, selection, groups, dim);
  const int frames = emb.shape()[1];

  auto n = make_node("concentration", {1}, {emb, attractor});
  double acc = 0.0;
  for (int t = 0; t < frames; ++t)
    for (int g = 0; g < groups; ++g) {
      if (selection.at(t, g) == 0.0) continue;
      for (int d = 0; d < dim; ++d) {
        const double diff =
            attractor.values()[d] -
            emb.values()[(static_cast<std::size_t>(g) * dim + d) * frames + t];
        acc += diff * diff;
      }
    }
  n->value[0] = acc;
  if (n->requires_grad) {
    Mat sel = selection;
    n->backprop = [sel = std::move(sel), groups, dim, frames](Node& self) {
      Node& emb = *self.inputs[0];
      Node& att = *self.inputs[1];
      if (emb.requires_grad) emb.ensure_grad();
      if (att.requires_grad) att.ensure_grad();
      const double g = self.grad[0];
      for (int t = 0; t < frames; ++t)
        for (int gi = 0; gi < groups; ++gi) {
          if (sel.at(t, gi) == 0.0) continue;
          for (int d = 0; d < dim; ++d) {
            const std::size_t ei = (static_cast<std::size_t>(gi) * dim + d) * frames + t;
            const double diff = att.value[d] - emb.value[ei];
            if (att.requires_grad) att.grad[d] += g * 2.0 * diff;
            if (emb.requires_grad) emb.grad[ei] -= g * 2.0 * diff;
          }
        }
    };
  }
  return Tensor(n);
}

// --- gradient checking -----------------------------------------------------------

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Shape& shape,
                         const std::vector<double>& x0, double h) {
  Tensor x = Tensor::leaf(shape, x0, true);
  Tensor y = f(x);
  if (y.numel() != 1) throw InvalidArgument("finite_diff_check: f must return a scalar");
  backward(y);
  const std::vector<double> analytic = x.grad();

  double max_rel = 0.0;
  std::vector<double> probe = x0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(Tensor::leaf(shape, probe, false)).item();
    probe[i] = orig - h;
    const double down = f(Tensor::leaf(shape, probe, false)).item();
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[i] - numeric) / (std::abs(numeric) + 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

double finite_diff_check_values(const std::function<double()>& loss_value,
                                std::vector<double>& values, const std::vector<double>& analytic,
                                const std::vector<std::size_t>& coords, double h) {
  double max_rel = 0.0;
  for (std::size_t ci : coords) {
    const double orig = values[ci];
    values[ci] = orig + h;
    const double up = loss_value();
    values[ci] = orig - h;
    const double down = loss_value();
    values[ci] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[ci] - numeric) / (std::abs(numeric) + 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace tddan::ad
