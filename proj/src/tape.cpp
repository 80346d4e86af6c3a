#include "qgnn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "qgnn/errors.hpp"
#include "qgnn/kernels.hpp"

namespace qgnn {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         ") vs (" + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Gradients::of(Var v) const { return grads_.at(static_cast<std::size_t>(v.id)); }

bool Gradients::has_param(int key) const {
  return key >= 0 && static_cast<std::size_t>(key) < param_node_.size() && param_node_[static_cast<std::size_t>(key)] >= 0;
}

const Tensor& Gradients::param(int key) const {
  if (!has_param(key)) throw ContractError("no parameter registered under key " + std::to_string(key));
  return grads_[static_cast<std::size_t>(param_node_[static_cast<std::size_t>(key)])];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Tensor value, int key) {
  if (key < 0) throw ContractError("parameter keys must be non-negative");
  Node n;
  n.value = std::move(value);
  n.key = key;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::matmul;
  n.inputs = {a.id, b.id};
  kernels::matmul(value(a), value(b), n.value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same(value(a), value(b), "add");
  Node n;
  n.op = Op::add;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  n.value += value(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same(value(a), value(b), "sub");
  Node n;
  n.op = Op::sub;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  const auto& vb = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= vb[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same(value(a), value(b), "mul");
  Node n;
  n.op = Op::mul;
  n.inputs = {a.id, b.id};
  n.value = value(a);
  const auto& vb = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= vb[i];
  return push(std::move(n));
}

Var Tape::scale(Var x, double c) {
  Node n;
  n.op = Op::scale;
  n.inputs = {x.id};
  n.c0 = c;
  n.value = value(x);
  for (auto& v : n.value.data()) v *= c;
  return push(std::move(n));
}

Var Tape::add_scalar(Var x, double c) {
  Node n;
  n.op = Op::add_scalar;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v += c;
  return push(std::move(n));
}

Var Tape::add_bias_rowwise(Var x, Var bias) {
  const auto& vx = value(x);
  const auto& vb = value(bias);
  if (vb.rows() != 1 || vb.cols() != vx.cols()) throw DimensionError("bias must be 1 x cols");
  Node n;
  n.op = Op::add_bias;
  n.inputs = {x.id, bias.id};
  n.value = vx;
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    for (std::size_t c = 0; c < vx.cols(); ++c) n.value(r, c) += vb[c];
  }
  return push(std::move(n));
}

Var Tape::scale_rows(Var x, std::vector<double> row_factors) {
  const auto& vx = value(x);
  if (row_factors.size() != vx.rows()) throw DimensionError("one factor per row required");
  Node n;
  n.op = Op::scale_rows;
  n.inputs = {x.id};
  n.value = vx;
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    for (std::size_t c = 0; c < vx.cols(); ++c) n.value(r, c) *= row_factors[r];
  }
  n.reals = std::move(row_factors);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::relu;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  Node n;
  n.op = Op::sigmoid;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v = sigmoid_scalar(v);
  return push(std::move(n));
}

Var Tape::abs(Var x) {
  Node n;
  n.op = Op::abs;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) v = std::fabs(v);
  return push(std::move(n));
}

Var Tape::log(Var x) {
  Node n;
  n.op = Op::log;
  n.inputs = {x.id};
  n.value = value(x);
  for (auto& v : n.value.data()) {
    if (!(v > 0.0)) throw ContractError("log of a non-positive value");
    v = std::log(v);
  }
  return push(std::move(n));
}

Var Tape::clamp(Var x, double lo, double hi) {
  Node n;
  n.op = Op::clamp;
  n.inputs = {x.id};
  n.c0 = lo;
  n.c1 = hi;
  n.value = value(x);
  for (auto& v : n.value.data()) v = std::clamp(v, lo, hi);
  return push(std::move(n));
}

Var Tape::softmax_rowwise(Var x) {
  const auto& vx = value(x);
  Node n;
  n.op = Op::softmax;
  n.inputs = {x.id};
  n.value = Tensor(vx.rows(), vx.cols());
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < vx.cols(); ++c) mx = std::max(mx, vx(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < vx.cols(); ++c) z += std::exp(vx(r, c) - mx);
    for (std::size_t c = 0; c < vx.cols(); ++c) n.value(r, c) = std::exp(vx(r, c) - mx) / z;
  }
  return push(std::move(n));
}

Var Tape::log_softmax_rowwise(Var x) {
  const auto& vx = value(x);
  Node n;
  n.op = Op::log_softmax;
  n.inputs = {x.id};
  n.value = Tensor(vx.rows(), vx.cols());
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < vx.cols(); ++c) mx = std::max(mx, vx(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < vx.cols(); ++c) z += std::exp(vx(r, c) - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < vx.cols(); ++c) n.value(r, c) = vx(r, c) - lz;
  }
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (auto p : parts) {
    if (value(p).rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Node n;
  n.op = Op::concat;
  n.value = Tensor(rows, cols);
  std::size_t off = 0;
  for (auto p : parts) {
    const auto& vp = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < vp.cols(); ++c) n.value(r, off + c) = vp(r, c);
    }
    off += vp.cols();
    n.inputs.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::segment_sum(Var x, std::vector<int> segment_ids, std::size_t num_segments) {
  Node n;
  n.op = Op::segment_sum;
  n.inputs = {x.id};
  n.value = Tensor(num_segments, value(x).cols());
  kernels::segment_sum(value(x), segment_ids, n.value);
  n.ints = std::move(segment_ids);
  return push(std::move(n));
}

Var Tape::gather_rows(Var x, std::vector<int> index) {
  Node n;
  n.op = Op::gather;
  n.inputs = {x.id};
  kernels::gather_rows(value(x), index, n.value);
  n.ints = std::move(index);
  return push(std::move(n));
}

Var Tape::sum_all(Var x) {
  Node n;
  n.op = Op::sum_all;
  n.inputs = {x.id};
  double s = 0.0;
  for (double v : value(x).data()) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::mean_all(Var x) {
  const auto& vx = value(x);
  if (vx.size() == 0) throw DimensionError("mean of an empty tensor");
  Node n;
  n.op = Op::mean_all;
  n.inputs = {x.id};
  double s = 0.0;
  for (double v : vx.data()) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(vx.size()));
  return push(std::move(n));
}

Var Tape::bce_with_logits_masked(Var logits, Tensor targets, Tensor mask) {
  const auto& z = value(logits);
  require_same(z, targets, "bce targets");
  require_same(z, mask, "bce mask");
  std::size_t count = 0;
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask[i] == 0.0) continue;
    ++count;
    s += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::fabs(z[i])));
  }
  if (count == 0) throw ContractError("every target in the batch is missing");
  Node n;
  n.op = Op::bce;
  n.inputs = {logits.id};
  n.value = Tensor::scalar(s / static_cast<double>(count));
  n.aux0 = std::move(targets);
  n.aux1 = std::move(mask);
  n.count = count;
  return push(std::move(n));
}

Var Tape::nll_mean(Var log_probs, std::vector<int> targets) {
  const auto& lp = value(log_probs);
  if (targets.size() != lp.rows()) throw DimensionError("one target per row required");
  if (targets.empty()) throw ContractError("empty batch");
  double s = 0.0;
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    const auto t = static_cast<std::size_t>(targets[r]);
    if (t >= lp.cols()) throw DimensionError("class target out of range");
    s -= lp(r, t);
  }
  Node n;
  n.op = Op::nll;
  n.inputs = {log_probs.id};
  n.value = Tensor::scalar(s / static_cast<double>(lp.rows()));
  n.ints = std::move(targets);
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  const auto& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw ContractError("backward needs a 1x1 loss");

  Gradients out;
  auto& g = out.grads_;
  g.resize(nodes_.size());
  auto acc = [&](int id) -> Tensor& {
    auto& t = g[static_cast<std::size_t>(id)];
    if (t.size() == 0 && nodes_[static_cast<std::size_t>(id)].value.size() != 0) {
      const auto& v = nodes_[static_cast<std::size_t>(id)].value;
      t = Tensor(v.rows(), v.cols());
    }
    return t;
  };
  acc(loss.id)[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& gy = g[static_cast<std::size_t>(id)];
    if (gy.size() == 0 || n.op == Op::leaf) continue;
    const auto& in = n.inputs;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        Tensor da, db;
        kernels::matmul_nt(gy, value(Var{in[1]}), da);
        kernels::matmul_tn(value(Var{in[0]}), gy, db);
        acc(in[0]) += da;
        acc(in[1]) += db;
        break;
      }
      case Op::add:
        acc(in[0]) += gy;
        acc(in[1]) += gy;
        break;
      case Op::sub: {
        acc(in[0]) += gy;
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        break;
      }
      case Op::mul: {
        const auto& a = value(Var{in[0]});
        const auto& b = value(Var{in[1]});
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a[i];
        break;
      }
      case Op::scale: {
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += n.c0 * gy[i];
        break;
      }
      case Op::add_scalar:
        acc(in[0]) += gy;
        break;
      case Op::add_bias: {
        acc(in[0]) += gy;
        auto& gb = acc(in[1]);
        for (std::size_t r = 0; r < gy.rows(); ++r) {
          for (std::size_t c = 0; c < gy.cols(); ++c) gb[c] += gy(r, c);
        }
        break;
      }
      case Op::scale_rows: {
        auto& gx = acc(in[0]);
        for (std::size_t r = 0; r < gy.rows(); ++r) {
          for (std::size_t c = 0; c < gy.cols(); ++c) gx(r, c) += n.reals[r] * gy(r, c);
        }
        break;
      }
      case Op::relu: {
        const auto& x = value(Var{in[0]});
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
        break;
      }
      case Op::sigmoid: {
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::abs: {
        const auto& x = value(Var{in[0]});
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += x[i] > 0.0 ? gy[i] : (x[i] < 0.0 ? -gy[i] : 0.0);
        break;
      }
      case Op::log: {
        const auto& x = value(Var{in[0]});
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] / x[i];
        break;
      }
      case Op::clamp: {
        const auto& x = value(Var{in[0]});
        auto& gx = acc(in[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += (x[i] < n.c0 || x[i] > n.c1) ? 0.0 : gy[i];
        break;
      }
      case Op::softmax: {
        auto& gx = acc(in[0]);
        const auto& y = n.value;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += gy(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (gy(r, c) - dot);
        }
        break;
      }
      case Op::log_softmax: {
        auto& gx = acc(in[0]);
        const auto& y = n.value;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) s += gy(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += gy(r, c) - std::exp(y(r, c)) * s;
        }
        break;
      }
      case Op::concat: {
        std::size_t off = 0;
        for (int p : in) {
          auto& gp = acc(p);
          for (std::size_t r = 0; r < gp.rows(); ++r) {
            for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += gy(r, off + c);
          }
          off += gp.cols();
        }
        break;
      }
      case Op::segment_sum: {
        auto& gx = acc(in[0]);
        for (std::size_t r = 0; r < gx.rows(); ++r) {
          const auto s = static_cast<std::size_t>(n.ints[r]);
          for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += gy(s, c);
        }
        break;
      }
      case Op::gather: {
        auto& gx = acc(in[0]);
        for (std::size_t r = 0; r < gy.rows(); ++r) {
          const auto s = static_cast<std::size_t>(n.ints[r]);
          for (std::size_t c = 0; c < gy.cols(); ++c) gx(s, c) += gy(r, c);
        }
        break;
      }
      case Op::sum_all: {
        auto& gx = acc(in[0]);
        for (auto& v : gx.data()) v += gy[0];
        break;
      }
      case Op::mean_all: {
        auto& gx = acc(in[0]);
        const double f = gy[0] / static_cast<double>(gx.size());
        for (auto& v : gx.data()) v += f;
        break;
      }
      case Op::bce: {
        const auto& z = value(Var{in[0]});
        auto& gx = acc(in[0]);
        const double f = gy[0] / static_cast<double>(n.count);
        for (std::size_t i = 0; i < z.size(); ++i) {
          if (n.aux1[i] != 0.0) gx[i] += f * (sigmoid_scalar(z[i]) - n.aux0[i]);
        }
        break;
      }
      case Op::nll: {
        auto& gx = acc(in[0]);
        const double f = gy[0] / static_cast<double>(gx.rows());
        for (std::size_t r = 0; r < gx.rows(); ++r) gx(r, static_cast<std::size_t>(n.ints[r])) -= f;
        break;
      }
    }
  }

  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (g[id].size() == 0) g[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    const int key = nodes_[id].key;
    if (key >= 0) {
      if (out.param_node_.size() <= static_cast<std::size_t>(key)) out.param_node_.resize(static_cast<std::size_t>(key) + 1, -1);
      out.param_node_[static_cast<std::size_t>(key)] = static_cast<int>(id);
    }
  }
  return out;
}

double finite_diff_check(const TapeFunction& f, std::span<const Tensor> params, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("finite-difference step must be positive");
  auto evaluate = [&](std::span<const Tensor> ps) {
    Tape t;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < ps.size(); ++i) vars.push_back(t.parameter(ps[i], static_cast<int>(i)));
    return t.value(f(t, vars))[0];
  };

  Tape tape;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(params[i], static_cast<int>(i)));
  const auto grads = tape.backward(f(tape, vars));

  std::vector<Tensor> work(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < work.size(); ++p) {
    const auto& analytic = grads.param(static_cast<int>(p));
    for (std::size_t e = 0; e < work[p].size(); ++e) {
      const double orig = work[p][e];
      work[p][e] = orig + epsilon;
      const double up = evaluate(work);
      work[p][e] = orig - epsilon;
      const double down = evaluate(work);
      work[p][e] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[e];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), kGradientFloor});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace qgnn
