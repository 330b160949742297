#include "logiccar/diff_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace logiccar {

namespace {

std::string shape_str(Shape s) {
  std::ostringstream os;
  os << s.rows << "x" << s.cols;
  return os.str();
}

bool is_integer(double p) { return std::floor(p) == p; }

bool exact_power(double p) { return is_integer(p) && p >= 0.0; }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMax: return "max";
    case OpKind::kPowScalar: return "pow_scalar";
    case OpKind::kRootScalar: return "root_scalar";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmaxCe: return "softmax_ce";
    case OpKind::kScale: return "scale";
    case OpKind::kStandardize: return "standardize";
  }
  return "?";
}

const Shape& Var::shape() const { return graph->node(id).shape; }

Var ExprGraph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

void ExprGraph::check_owned(Var v) const {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw GraphError("operand does not belong to this graph");
}

Var ExprGraph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.shape = {value.rows(), value.cols()};
  n.value = std::move(value);
  return push(std::move(n));
}

Var ExprGraph::constant(double value) { return constant(Tensor::Constant(1, 1, value)); }

Var ExprGraph::constant_like(Shape shape, double fill) {
  return constant(Tensor::Constant(shape.rows, shape.cols, fill));
}

Var ExprGraph::parameter(const std::string& name, Shape shape) {
  for (NodeId id : parameters_)
    if (nodes_[static_cast<std::size_t>(id)].name == name)
      throw GraphError("duplicate parameter '" + name + "'");
  if (shape.rows <= 0 || shape.cols <= 0) throw GraphError("parameter '" + name + "' has empty shape");
  Node n;
  n.kind = OpKind::kParameter;
  n.shape = shape;
  n.name = name;
  Var v = push(std::move(n));
  parameters_.push_back(v.id);
  return v;
}

namespace {

Node binary(OpKind kind, Var a, Var b) {
  if (!(a.shape() == b.shape()))
    throw GraphError(std::string(op_name(kind)) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Node n;
  n.kind = kind;
  n.inputs = {a.id, b.id};
  n.shape = a.shape();
  return n;
}

Node unary(OpKind kind, Var x, Shape out) {
  Node n;
  n.kind = kind;
  n.inputs = {x.id};
  n.shape = out;
  return n;
}

}  // namespace

Var ExprGraph::add(Var a, Var b) {
  check_owned(a), check_owned(b);
  return push(binary(OpKind::kAdd, a, b));
}

Var ExprGraph::sub(Var a, Var b) {
  check_owned(a), check_owned(b);
  return push(binary(OpKind::kSub, a, b));
}

Var ExprGraph::mul(Var a, Var b) {
  check_owned(a), check_owned(b);
  return push(binary(OpKind::kMul, a, b));
}

Var ExprGraph::max(Var a, Var b) {
  check_owned(a), check_owned(b);
  return push(binary(OpKind::kMax, a, b));
}

Var ExprGraph::matvec(Var a, Var x) {
  check_owned(a), check_owned(x);
  if (a.shape().cols != x.shape().rows)
    throw GraphError("matvec: shape mismatch " + shape_str(a.shape()) + " * " + shape_str(x.shape()));
  Node n;
  n.kind = OpKind::kMatVec;
  n.inputs = {a.id, x.id};
  n.shape = {a.shape().rows, x.shape().cols};
  return push(std::move(n));
}

Var ExprGraph::sum(Var x) {
  check_owned(x);
  return push(unary(OpKind::kSum, x, {1, 1}));
}

Var ExprGraph::mean(Var x) {
  check_owned(x);
  return push(unary(OpKind::kMean, x, {1, 1}));
}

Var ExprGraph::pow_scalar(Var x, double p, double clamp) {
  check_owned(x);
  if (!std::isfinite(p)) throw GraphError("pow_scalar: non-finite exponent");
  Node n = unary(OpKind::kPowScalar, x, x.shape());
  n.exponent = p;
  n.floor = clamp;
  return push(std::move(n));
}

Var ExprGraph::root_scalar(Var x, int q, double clamp) {
  check_owned(x);
  if (q == 0) throw GraphError("root_scalar: q must be nonzero");
  Node n = unary(OpKind::kRootScalar, x, x.shape());
  n.exponent = q;
  n.floor = clamp;
  return push(std::move(n));
}

Var ExprGraph::sigmoid(Var x) {
  check_owned(x);
  return push(unary(OpKind::kSigmoid, x, x.shape()));
}

Var ExprGraph::log(Var x, double floor) {
  check_owned(x);
  Node n = unary(OpKind::kLog, x, x.shape());
  n.floor = floor;
  return push(std::move(n));
}

Var ExprGraph::softmax_ce(Var logits, std::vector<Index> labels) {
  check_owned(logits);
  const Shape s = logits.shape();
  if (static_cast<Index>(labels.size()) != s.cols)
    throw GraphError("softmax_ce: " + std::to_string(labels.size()) + " labels for " + std::to_string(s.cols) +
                     " columns");
  for (Index y : labels)
    if (y < 0 || y >= s.rows) throw GraphError("softmax_ce: label " + std::to_string(y) + " outside candidates");
  Node n = unary(OpKind::kSoftmaxCe, logits, {1, 1});
  n.labels = std::move(labels);
  return push(std::move(n));
}

Var ExprGraph::scale(Var s, Var x) {
  check_owned(s), check_owned(x);
  if (!(s.shape() == Shape{1, 1})) throw GraphError("scale: factor must be 1x1, got " + shape_str(s.shape()));
  Node n;
  n.kind = OpKind::kScale;
  n.inputs = {s.id, x.id};
  n.shape = x.shape();
  return push(std::move(n));
}

Var ExprGraph::standardize(Var x, double epsilon) {
  check_owned(x);
  Node n = unary(OpKind::kStandardize, x, x.shape());
  n.floor = epsilon;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------

namespace {

Tensor pow_value(const Tensor& x, double p, double clamp) {
  if (p == 0.0) return Tensor::Ones(x.rows(), x.cols());
  if (exact_power(p)) return x.unaryExpr([p](double v) { return std::pow(v, p); });
  return x.unaryExpr([p, clamp](double v) { return std::pow(std::max(v, clamp), p); });
}

Tensor root_value(const Tensor& x, double q, double clamp) {
  const double inv = 1.0 / q;
  if (q > 0) return x.unaryExpr([inv](double v) { return std::pow(std::max(v, 0.0), inv); });
  return x.unaryExpr([inv, clamp](double v) { return std::pow(std::max(v, clamp), inv); });
}

}  // namespace

Evaluation forward(const ExprGraph& g, const Bindings& bindings) {
  Evaluation ev;
  ev.values.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.node(static_cast<NodeId>(i));
    auto in = [&](std::size_t k) -> const Tensor& { return ev.values[static_cast<std::size_t>(n.inputs[k])]; };
    Tensor& out = ev.values[i];
    switch (n.kind) {
      case OpKind::kConstant:
        out = n.value;
        break;
      case OpKind::kParameter: {
        auto it = bindings.find(n.name);
        if (it == bindings.end()) throw GraphError("unbound parameter '" + n.name + "'");
        if (it->second.rows() != n.shape.rows || it->second.cols() != n.shape.cols)
          throw GraphError("parameter '" + n.name + "' bound with shape " +
                           shape_str({it->second.rows(), it->second.cols()}) + ", expected " + shape_str(n.shape));
        out = it->second;
        break;
      }
      case OpKind::kAdd: out = in(0) + in(1); break;
      case OpKind::kSub: out = in(0) - in(1); break;
      case OpKind::kMul: out = in(0).cwiseProduct(in(1)); break;
      case OpKind::kMatVec: out = in(0) * in(1); break;
      case OpKind::kSum: out = Tensor::Constant(1, 1, ordered_sum(in(0))); break;
      case OpKind::kMean: out = Tensor::Constant(1, 1, ordered_mean(in(0))); break;
      case OpKind::kMax: out = in(0).cwiseMax(in(1)); break;
      case OpKind::kPowScalar: out = pow_value(in(0), n.exponent, n.floor); break;
      case OpKind::kRootScalar: out = root_value(in(0), n.exponent, n.floor); break;
      case OpKind::kSigmoid: out = in(0).unaryExpr([](double v) { return stable_sigmoid(v); }); break;
      case OpKind::kLog: {
        const double fl = n.floor;
        out = in(0).unaryExpr([fl](double v) { return std::log(std::max(v, fl)); });
        break;
      }
      case OpKind::kSoftmaxCe: {
        const Tensor& z = in(0);
        double acc = 0.0;
        for (Index k = 0; k < z.cols(); ++k) {
          const double m = z.col(k).maxCoeff();
          double se = 0.0;
          for (Index r = 0; r < z.rows(); ++r) se += std::exp(z(r, k) - m);
          acc += m + std::log(se) - z(n.labels[static_cast<std::size_t>(k)], k);
        }
        out = Tensor::Constant(1, 1, acc / static_cast<double>(z.cols()));
        break;
      }
      case OpKind::kScale: out = in(0)(0, 0) * in(1); break;
      case OpKind::kStandardize: {
        const Tensor& z = in(0);
        out.resize(z.rows(), z.cols());
        for (Index k = 0; k < z.cols(); ++k) {
          const double mu = ordered_mean(z.col(k));
          double var = 0.0;
          for (Index r = 0; r < z.rows(); ++r) var += (z(r, k) - mu) * (z(r, k) - mu);
          var /= static_cast<double>(z.rows());
          const double sd = std::sqrt(var + n.floor);
          for (Index r = 0; r < z.rows(); ++r) out(r, k) = (z(r, k) - mu) / sd;
        }
        break;
      }
    }
    if (!out.allFinite())
      throw GraphError(std::string("non-finite value produced by ") + op_name(n.kind) + " node " +
                       std::to_string(i));
  }
  return ev;
}

Gradients backward(const ExprGraph& g, const Evaluation& ev, Var output) {
  if (output.graph != &g) throw GraphError("backward: output belongs to another graph");
  if (!(output.shape() == Shape{1, 1})) throw GraphError("backward: output must be scalar, got " +
                                                         shape_str(output.shape()));
  if (ev.values.size() != g.size()) throw GraphError("backward: evaluation does not match graph");

  std::vector<Tensor> adj(g.size());
  std::vector<bool> live(g.size(), false);
  const auto out_idx = static_cast<std::size_t>(output.id);
  adj[out_idx] = Tensor::Ones(1, 1);
  live[out_idx] = true;

  auto accumulate = [&](NodeId id, const Tensor& contrib) {
    const auto k = static_cast<std::size_t>(id);
    if (!live[k]) {
      adj[k] = contrib;
      live[k] = true;
    } else {
      adj[k] += contrib;
    }
  };

  for (std::size_t i = out_idx + 1; i-- > 0;) {
    if (!live[i]) continue;
    const Node& n = g.node(static_cast<NodeId>(i));
    const Tensor& a = adj[i];
    auto val = [&](std::size_t k) -> const Tensor& { return ev.values[static_cast<std::size_t>(n.inputs[k])]; };
    switch (n.kind) {
      case OpKind::kConstant:
      case OpKind::kParameter:
        break;
      case OpKind::kAdd:
        accumulate(n.inputs[0], a);
        accumulate(n.inputs[1], a);
        break;
      case OpKind::kSub:
        accumulate(n.inputs[0], a);
        accumulate(n.inputs[1], -a);
        break;
      case OpKind::kMul:
        accumulate(n.inputs[0], a.cwiseProduct(val(1)));
        accumulate(n.inputs[1], a.cwiseProduct(val(0)));
        break;
      case OpKind::kMatVec:
        accumulate(n.inputs[0], a * val(1).transpose());
        accumulate(n.inputs[1], val(0).transpose() * a);
        break;
      case OpKind::kSum: {
        const Shape s = g.node(n.inputs[0]).shape;
        accumulate(n.inputs[0], Tensor::Constant(s.rows, s.cols, a(0, 0)));
        break;
      }
      case OpKind::kMean: {
        const Shape s = g.node(n.inputs[0]).shape;
        const double w = a(0, 0) / static_cast<double>(s.rows * s.cols);
        accumulate(n.inputs[0], Tensor::Constant(s.rows, s.cols, w));
        break;
      }
      case OpKind::kMax: {
        const Tensor& x = val(0);
        const Tensor& y = val(1);
        Tensor ga = Tensor::Zero(x.rows(), x.cols());
        Tensor gb = Tensor::Zero(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r)
          for (Index c = 0; c < x.cols(); ++c) (x(r, c) >= y(r, c) ? ga : gb)(r, c) = a(r, c);
        accumulate(n.inputs[0], ga);
        accumulate(n.inputs[1], gb);
        break;
      }
      case OpKind::kPowScalar: {
        const double p = n.exponent;
        const double fl = n.floor;
        const Tensor& x = val(0);
        Tensor d;
        if (p == 0.0) {
          d = Tensor::Zero(x.rows(), x.cols());
        } else if (exact_power(p)) {
          d = x.unaryExpr([p](double v) { return p * std::pow(v, p - 1.0); });
        } else {
          d = x.unaryExpr([p, fl](double v) { return p * std::pow(std::max(v, fl), p - 1.0); });
        }
        accumulate(n.inputs[0], a.cwiseProduct(d));
        break;
      }
      case OpKind::kRootScalar: {
        const double inv = 1.0 / n.exponent;
        const double fl = n.floor;
        Tensor d = val(0).unaryExpr([inv, fl](double v) { return inv * std::pow(std::max(v, fl), inv - 1.0); });
        accumulate(n.inputs[0], a.cwiseProduct(d));
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& s = ev.values[i];
        accumulate(n.inputs[0], a.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
        break;
      }
      case OpKind::kLog: {
        const double fl = n.floor;
        Tensor d = val(0).unaryExpr([fl](double v) { return v >= fl ? 1.0 / v : 0.0; });
        accumulate(n.inputs[0], a.cwiseProduct(d));
        break;
      }
      case OpKind::kSoftmaxCe: {
        const Tensor& z = val(0);
        const double w = a(0, 0) / static_cast<double>(z.cols());
        Tensor d(z.rows(), z.cols());
        for (Index k = 0; k < z.cols(); ++k) {
          const double m = z.col(k).maxCoeff();
          double se = 0.0;
          for (Index r = 0; r < z.rows(); ++r) se += std::exp(z(r, k) - m);
          for (Index r = 0; r < z.rows(); ++r) d(r, k) = w * std::exp(z(r, k) - m) / se;
          d(n.labels[static_cast<std::size_t>(k)], k) -= w;
        }
        accumulate(n.inputs[0], d);
        break;
      }
      case OpKind::kScale: {
        const Tensor& x = val(1);
        accumulate(n.inputs[0], Tensor::Constant(1, 1, ordered_sum(a.cwiseProduct(x))));
        accumulate(n.inputs[1], val(0)(0, 0) * a);
        break;
      }
      case OpKind::kStandardize: {
        const Tensor& z = val(0);
        const Tensor& y = ev.values[i];
        Tensor d(z.rows(), z.cols());
        const auto rows = static_cast<double>(z.rows());
        for (Index k = 0; k < z.cols(); ++k) {
          const double mu = ordered_mean(z.col(k));
          double var = 0.0;
          for (Index r = 0; r < z.rows(); ++r) var += (z(r, k) - mu) * (z(r, k) - mu);
          const double sd = std::sqrt(var / rows + n.floor);
          double mean_a = 0.0;
          double mean_ay = 0.0;
          for (Index r = 0; r < z.rows(); ++r) {
            mean_a += a(r, k);
            mean_ay += a(r, k) * y(r, k);
          }
          mean_a /= rows;
          mean_ay /= rows;
          for (Index r = 0; r < z.rows(); ++r) d(r, k) = (a(r, k) - mean_a - y(r, k) * mean_ay) / sd;
        }
        accumulate(n.inputs[0], d);
        break;
      }
    }
  }

  Gradients grads;
  for (NodeId id : g.parameters()) {
    const auto k = static_cast<std::size_t>(id);
    const Node& n = g.node(id);
    grads[n.name] = live[k] ? adj[k] : Tensor::Zero(n.shape.rows, n.shape.cols);
  }
  return grads;
}

double finite_diff_check(const std::function<double(const Bindings&)>& f, const Bindings& point,
                         const Gradients& analytic, double h) {
  double worst = 0.0;
  Bindings probe = point;
  for (auto& [name, tensor] : probe) {
    auto it = analytic.find(name);
    if (it == analytic.end()) throw GraphError("finite_diff_check: no analytic gradient for '" + name + "'");
    for (Index r = 0; r < tensor.rows(); ++r) {
      for (Index c = 0; c < tensor.cols(); ++c) {
        const double x0 = tensor(r, c);
        tensor(r, c) = x0 + h;
        const double fp = f(probe);
        tensor(r, c) = x0 - h;
        const double fm = f(probe);
        tensor(r, c) = x0;
        if (!std::isfinite(fp) || !std::isfinite(fm))
          throw GraphError("finite_diff_check: non-finite evaluation at '" + name + "'");
        const double numeric = (fp - fm) / (2.0 * h);
        const double exact = it->second(r, c);
        worst = std::max(worst, std::abs(exact - numeric) / std::max(1e-8, std::abs(exact)));
      }
    }
  }
  return worst;
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double h) {
  return finite_diff_check([&](const Bindings& b) { return f(b.at("x")); }, Bindings{{"x", point}},
                           Gradients{{"x", analytic}}, h);
}

// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) { return a.graph->add(a, b); }
Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
Var operator*(double s, Var x) { return x.graph->scale(x.graph->constant(s), x); }
Var operator+(Var a, double s) { return a + a.graph->constant_like(a.shape(), s); }
Var operator-(double s, Var x) { return x.graph->constant_like(x.shape(), s) - x; }
Var operator-(Var x, double s) { return x - x.graph->constant_like(x.shape(), s); }

Var matvec(Var a, Var x) { return a.graph->matvec(a, x); }
Var sum(Var x) { return x.graph->sum(x); }
Var mean(Var x) { return x.graph->mean(x); }
Var max(Var a, Var b) { return a.graph->max(a, b); }
Var pow(Var x, double p) { return x.graph->pow_scalar(x, p); }
Var root(Var x, int q) { return x.graph->root_scalar(x, q); }
Var sigmoid(Var x) { return x.graph->sigmoid(x); }
Var log(Var x) { return x.graph->log(x); }
Var softmax_ce(Var logits, std::vector<Index> labels) { return logits.graph->softmax_ce(logits, std::move(labels)); }
Var standardize(Var x) { return x.graph->standardize(x); }

}  // namespace logiccar
