#ifndef LOGICCAR_TENSOR_HPP_
#define LOGICCAR_TENSOR_HPP_

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace logiccar {

// Dense row-major storage throughout. Score-like matrices are laid out with
// one row per label and one column per sample.
template <typename Scalar>
using TensorT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Tensor = TensorT<double>;
using RowVector = RowVectorT<double>;
using Index = Eigen::Index;

// Left-to-right accumulation. Eigen's own reductions may reorder under
// vectorization, which we avoid wherever reproducibility is promised.
template <typename Derived>
typename Derived::Scalar ordered_sum(const Eigen::DenseBase<Derived>& x) {
  typename Derived::Scalar acc{0};
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) acc += x(r, c);
  return acc;
}

template <typename Derived>
typename Derived::Scalar ordered_mean(const Eigen::DenseBase<Derived>& x) {
  return ordered_sum(x) / static_cast<typename Derived::Scalar>(x.size());
}

// Round-trippable decimal rendering (17 significant digits).
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace logiccar

#endif  // LOGICCAR_TENSOR_HPP_
