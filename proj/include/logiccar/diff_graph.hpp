#ifndef LOGICCAR_DIFF_GRAPH_HPP_
#define LOGICCAR_DIFF_GRAPH_HPP_

// Recorded reverse-mode expression graph over dense double tensors.
//
// A graph is built once (single writer), then evaluated with `forward` for a
// set of parameter bindings and differentiated with `backward`. Values live in
// an `Evaluation` workspace, so a frozen graph can be evaluated concurrently on
// distinct bindings.

#include "logiccar/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace logiccar {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,          // elementwise
  kMatVec,       // (m x n) * (n x k), i.e. k column vectors at once
  kSum,          // all entries -> 1x1
  kMean,         // all entries -> 1x1
  kMax,          // elementwise; ties send the adjoint to the first input
  kPowScalar,    // x^p
  kRootScalar,   // x^(1/q)
  kSigmoid,
  kLog,          // log(max(x, floor))
  kSoftmaxCe,    // mean over columns of cross-entropy, labels index rows
  kScale,        // (1x1) * tensor
  kStandardize,  // per column: zero mean, unit variance
};

const char* op_name(OpKind kind);

struct Shape {
  Index rows = 0;
  Index cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

using NodeId = std::int32_t;

struct Node {
  OpKind kind = OpKind::kConstant;
  std::vector<NodeId> inputs;
  Shape shape;
  double exponent = 1.0;  // pow_scalar / root_scalar
  double floor = 0.0;     // log floor, clamp epsilon for pow/root, variance epsilon
  std::vector<Index> labels;  // softmax_ce
  std::string name;           // parameter
  Tensor value;               // constant
};

using Bindings = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

class ExprGraph;

// Lightweight handle used to write graph expressions as ordinary arithmetic.
struct Var {
  ExprGraph* graph = nullptr;
  NodeId id = -1;

  const Shape& shape() const;
  bool valid() const { return graph != nullptr && id >= 0; }
};

class ExprGraph {
 public:
  static constexpr double kDefaultClamp = 1e-12;
  static constexpr double kStandardizeEpsilon = 1e-8;

  Var constant(Tensor value);
  Var constant(double value);
  Var constant_like(Shape shape, double fill);
  Var parameter(const std::string& name, Shape shape);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matvec(Var a, Var x);
  Var sum(Var x);
  Var mean(Var x);
  Var max(Var a, Var b);
  Var pow_scalar(Var x, double p, double clamp = kDefaultClamp);
  Var root_scalar(Var x, int q, double clamp = kDefaultClamp);
  Var sigmoid(Var x);
  Var log(Var x, double floor = kDefaultClamp);
  Var softmax_ce(Var logits, std::vector<Index> labels);
  Var scale(Var s, Var x);
  Var standardize(Var x, double epsilon = kStandardizeEpsilon);

  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& parameters() const { return parameters_; }

 private:
  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
};

// Per-evaluation workspace: one value per node.
struct Evaluation {
  std::vector<Tensor> values;

  const Tensor& operator[](Var v) const { return values.at(static_cast<std::size_t>(v.id)); }
  double scalar(Var v) const { return (*this)[v](0, 0); }
};

Evaluation forward(const ExprGraph& g, const Bindings& bindings);
Gradients backward(const ExprGraph& g, const Evaluation& ev, Var output);

// Max over coordinates of |analytic - central difference| / max(1e-8, |analytic|).
double finite_diff_check(const std::function<double(const Bindings&)>& f, const Bindings& point,
                         const Gradients& analytic, double h = 1e-5);
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double h = 1e-5);

// Expression sugar. All operands must belong to the same graph.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double s, Var x);
Var operator+(Var a, double s);
Var operator-(double s, Var x);
Var operator-(Var x, double s);

Var matvec(Var a, Var x);
Var sum(Var x);
Var mean(Var x);
Var max(Var a, Var b);
Var pow(Var x, double p);
Var root(Var x, int q);
Var sigmoid(Var x);
Var log(Var x);
Var softmax_ce(Var logits, std::vector<Index> labels);
Var standardize(Var x);

}  // namespace logiccar

#endif  // LOGICCAR_DIFF_GRAPH_HPP_
