#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnw/common.hpp"
#include "pnw/core.hpp"

namespace pnw {

/// One feed-forward network with a single hidden layer:
///   y = logistic(w2 * tanh(w1 * x + b1) + b2)
/// label_map maps output node index -> global label id (class labels in
/// partition order, expat last when present).
template <typename Scalar>
struct AnnT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix w1;  // hidden x input
  Vector b1;  // hidden
  Matrix w2;  // output x hidden
  Vector b2;  // output
  std::vector<int> label_map;

  Index input_size() const { return w1.cols(); }
  Index hidden_size() const { return w1.rows(); }
  Index output_size() const { return w2.rows(); }
};

using Ann = AnnT<double>;

/// Gradient of a per-sample loss with respect to every parameter; layout
/// mirrors AnnT.
template <typename Scalar>
struct AnnGradientT {
  typename AnnT<Scalar>::Matrix w1;
  typename AnnT<Scalar>::Vector b1;
  typename AnnT<Scalar>::Matrix w2;
  typename AnnT<Scalar>::Vector b2;
};

using AnnGradient = AnnGradientT<double>;

template <typename Scalar>
Scalar logistic(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

namespace detail {

template <typename Scalar, typename Derived>
void check_input(const AnnT<Scalar>& ann,
                 const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != ann.input_size()) {
    fail(ErrorCode::ShapeMismatch,
         "input of length " + std::to_string(x.size()) + " fed to a " +
             std::to_string(ann.input_size()) + "-input network");
  }
}

}  // namespace detail

/// Forward pass. All outputs lie in (0, 1).
template <typename Scalar, typename Derived>
typename AnnT<Scalar>::Vector forward(const AnnT<Scalar>& ann,
                                      const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(ann, x);
  typename AnnT<Scalar>::Vector hidden =
      ((ann.w1 * x) + ann.b1).array().tanh().matrix();
  typename AnnT<Scalar>::Vector out = ann.w2 * hidden + ann.b2;
  for (Index i = 0; i < out.size(); ++i) out[i] = logistic(out[i]);
  return out;
}

/// Squared distance from an activation vector to the one-hot vector of node
/// `target`.
template <typename Derived>
typename Derived::Scalar one_hot_distance(const Eigen::MatrixBase<Derived>& y,
                                          Index target) {
  using Scalar = typename Derived::Scalar;
  Scalar d = 0;
  for (Index j = 0; j < y.size(); ++j) {
    const Scalar e = y[j] - (j == target ? Scalar(1) : Scalar(0));
    d += e * e;
  }
  return d;
}

/// Output node whose one-hot vector is closest to y, ties broken toward the
/// lowest node index.
template <typename Derived>
Index nearest_node(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  Index best = 0;
  Scalar best_d = one_hot_distance(y, 0);
  for (Index t = 1; t < y.size(); ++t) {
    const Scalar d = one_hot_distance(y, t);
    if (d < best_d) {  // strict: ties keep the lower index
      best = t;
      best_d = d;
    }
  }
  return best;
}

/// Nearest-neighbor classification of an activation vector: winning node via
/// nearest_node, mapped through label_map, with the winning distance as loss.
template <typename Derived>
AnnVerdict nearest_one_hot(const Eigen::MatrixBase<Derived>& y,
                           const std::vector<int>& label_map) {
  const Index best = nearest_node(y);
  return AnnVerdict{label_map[static_cast<std::size_t>(best)],
                    static_cast<double>(one_hot_distance(y, best))};
}

/// (label, loss) verdict of one ANN on one feature vector.
template <typename Scalar, typename Derived>
AnnVerdict predict(const AnnT<Scalar>& ann, const Eigen::MatrixBase<Derived>& x) {
  return nearest_one_hot(forward(ann, x), ann.label_map);
}

/// Squared distance of the network output to the one-hot target.
template <typename Scalar, typename Derived>
Scalar sample_loss(const AnnT<Scalar>& ann, const Eigen::MatrixBase<Derived>& x,
                   Index target) {
  if (target < 0 || target >= ann.output_size())
    fail(ErrorCode::BadTarget,
         "target node " + std::to_string(target) + " outside output width " +
             std::to_string(ann.output_size()));
  return one_hot_distance(forward(ann, x), target);
}

/// Analytic gradient of sample_loss with respect to all parameters.
///
/// With h = tanh(w1 x + b1), y = logistic(w2 h + b2), e = y - onehot(target):
///   d2 = 2 e .* y .* (1 - y)          (gradient at the output layer)
///   d1 = (w2^T d2) .* (1 - h .* h)
/// and the parameter gradients are d2 h^T, d2, d1 x^T, d1.
template <typename Scalar, typename Derived>
AnnGradientT<Scalar> gradient(const AnnT<Scalar>& ann,
                              const Eigen::MatrixBase<Derived>& x, Index target) {
  detail::check_input(ann, x);
  if (target < 0 || target >= ann.output_size())
    fail(ErrorCode::BadTarget,
         "target node " + std::to_string(target) + " outside output width " +
             std::to_string(ann.output_size()));
  using Vector = typename AnnT<Scalar>::Vector;

  Vector h = ((ann.w1 * x) + ann.b1).array().tanh().matrix();
  Vector y = ann.w2 * h + ann.b2;
  for (Index i = 0; i < y.size(); ++i) y[i] = logistic(y[i]);

  Vector e = y;
  e[target] -= Scalar(1);
  Vector d2 =
      (Scalar(2) * e.array() * y.array() * (Scalar(1) - y.array())).matrix();
  Vector d1 =
      ((ann.w2.transpose() * d2).array() * (Scalar(1) - h.array().square()))
          .matrix();

  AnnGradientT<Scalar> g;
  g.w2 = d2 * h.transpose();
  g.b2 = d2;
  g.w1 = d1 * x.transpose();
  g.b1 = d1;
  return g;
}

/// Fresh network with weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
/// and zero biases, drawn from `rng` in a fixed order (w1 row-major, then w2
/// row-major).
template <typename Scalar = double>
AnnT<Scalar> init_ann(Index input, Index hidden, std::vector<int> label_map,
                      SeededRng& rng) {
  const Index output = static_cast<Index>(label_map.size());
  if (input <= 0 || hidden <= 0 || output <= 0)
    fail(ErrorCode::ZeroDimension, "init_ann needs positive dimensions");
  AnnT<Scalar> ann;
  ann.w1.resize(hidden, input);
  ann.b1 = AnnT<Scalar>::Vector::Zero(hidden);
  ann.w2.resize(output, hidden);
  ann.b2 = AnnT<Scalar>::Vector::Zero(output);
  ann.label_map = std::move(label_map);

  const double r1 = 1.0 / std::sqrt(static_cast<double>(input));
  for (Index r = 0; r < hidden; ++r)
    for (Index c = 0; c < input; ++c)
      ann.w1(r, c) = Scalar(rng.uniform_range(-r1, r1));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Index r = 0; r < output; ++r)
    for (Index c = 0; c < hidden; ++c)
      ann.w2(r, c) = Scalar(rng.uniform_range(-r2, r2));
  return ann;
}

}  // namespace pnw
