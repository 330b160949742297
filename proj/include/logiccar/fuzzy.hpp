#ifndef LOGICCAR_FUZZY_HPP_
#define LOGICCAR_FUZZY_HPP_

// Fuzzy relaxation of the rule language: product t-norm for "and", max for
// "or", 1 - a for "not", 1 - a + a*b for "=>", and generalized (power) means
// over the samples for the quantifiers.

#include "logiccar/diff_graph.hpp"
#include "logiccar/logic_ast.hpp"
#include "logiccar/score_table.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>

namespace logiccar {

struct FuzzyConfig {
  int q = 1;               // power-mean exponent, nonzero
  double epsilon = 1e-12;  // clamp for power-mean bases/roots

  void validate() const {
    if (q == 0) throw std::invalid_argument("FuzzyConfig: q must be nonzero");
    if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw std::invalid_argument("FuzzyConfig: epsilon must be in (0, 1e-6]");
  }
};

class TruthDegree {
 public:
  static constexpr double kSlack = 1e-12;

  // Values within kSlack of [0,1] are clamped; anything further out throws.
  explicit TruthDegree(double v) : value_(v) {
    if (!(v >= -kSlack && v <= 1.0 + kSlack)) throw std::out_of_range("truth degree outside [0,1]");
    value_ = std::clamp(v, 0.0, 1.0);
  }
  double value() const { return value_; }
  operator double() const { return value_; }

 private:
  double value_;
};

enum class Connective { kAnd, kOr, kNot, kImplies };
enum class Quantifier { kForAll, kExists };

template <typename Scalar>
Scalar fuzzy_and(const Scalar& a, const Scalar& b) { return a * b; }
template <typename Scalar>
Scalar fuzzy_or(const Scalar& a, const Scalar& b) { using std::max; return max(a, b); }
template <typename Scalar>
Scalar fuzzy_not(const Scalar& a) { return 1.0 - a; }
template <typename Scalar>
Scalar fuzzy_implies(const Scalar& a, const Scalar& b) { return 1.0 - a + a * b; }

TruthDegree fuzzy_connective(Connective kind, TruthDegree a, std::optional<TruthDegree> b = std::nullopt);

TruthDegree quantifier_mean(Quantifier kind, std::span<const double> values, const FuzzyConfig& cfg);

// Graph version over a 1 x K node of per-sample degrees.
Var quantifier_mean(Quantifier kind, Var values, const FuzzyConfig& cfg);

// Top level must be a ForAll ranging over the table's K samples.
TruthDegree evaluate_formula(const Formula& f, const ScoreTable& scores, const FuzzyConfig& cfg);
Var evaluate_formula(const Formula& f, const ScoreNodes& scores, const FuzzyConfig& cfg);

}  // namespace logiccar

#endif  // LOGICCAR_FUZZY_HPP_
