#pragma once

// Tape-based reverse-mode differentiation over small dense matrices. Vectors
// are n x 1 matrices; scalars are 1 x 1.

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "wbi/rng.hpp"

namespace wbi::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A trainable array. `grad` has the shape of `value` and accumulates across
/// backward passes until zero_grad.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives and
/// has not been cleared.
class Tensor {
 public:
  Tensor() = default;
  const Matrix& value() const;
  const Matrix& grad() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> inputs;
    // Reads this node's grad and adds into the inputs' grads.
    std::function<void(Tape&, const Node&)> back;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Tensor constant(Matrix v);
  /// Leaf whose gradient is kept on the tape (read with Tensor::grad).
  Tensor variable(Matrix v);
  /// Leaf bound to a parameter; backward adds into p.grad. Repeated calls with
  /// the same parameter return the same node.
  Tensor param(Parameter& p);

  /// Reverse sweep from a 1 x 1 tensor. Throws ShapeError otherwise.
  void backward(Tensor loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  Tensor push(Matrix value, std::vector<int> inputs, std::function<void(Tape&, const Node&)> back);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  /// Gradient buffer of an input during backward; sized on first use.
  Matrix& grad_of(int id);

 private:
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_ids_;
};

// Primitive operations. Binary operations require both operands on one tape.
Tensor matvec(Tensor w, Tensor x);            // (r x c) * (c x 1)
Tensor add(Tensor a, Tensor b);               // same shape
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);               // elementwise
Tensor scale(Tensor a, double s);
Tensor add_scalar(Tensor a, double s);
Tensor tanh(Tensor a);
Tensor exp(Tensor a);
Tensor log(Tensor a);
Tensor square(Tensor a);
Tensor sum(Tensor a);                         // -> 1 x 1
Tensor concat(const std::vector<Tensor>& parts);  // vertical stacking of vectors
Tensor slice(Tensor a, Eigen::Index start, Eigen::Index len);
/// Elementwise clamp; the gradient is zero where the input is clamped.
Tensor clamp(Tensor a, double lo, double hi);

/// Weighted first and second moments of a batch of points, stored centred:
/// weight_sum = sum_j w_j, mean = sum_j w_j z_j / weight_sum and
/// centred_sq = sum_j w_j (z_j - mean)^2, all per coordinate.
struct WeightedMoments {
  double weight_sum = 0.0;
  Vector mean;
  Vector centred_sq;
};

/// Moments of the rows of `z` (B x n) with weights `w` (length B).
WeightedMoments weighted_moments(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                 const Eigen::Ref<const Eigen::VectorXd>& w);
/// Moments of a single point with weight 1.
WeightedMoments point_moments(const Eigen::Ref<const Eigen::VectorXd>& z);

/// -sum_j w_j sum_i log N(z_ji; mean_i, exp(logvar_i)), evaluated from the
/// moments of the batch. mean and logvar are n x 1.
Tensor gaussian_nll(Tensor mean, Tensor logvar, const WeightedMoments& m);

/// Three affine layers with tanh after the first two.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, std::size_t in, std::size_t hidden, std::size_t out);

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  void init_uniform(Rng& rng);
  void set_zero();

  Tensor forward(Tape& tape, Tensor x);
  Vector forward_value(const Vector& x) const;

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  std::size_t in_ = 0, hidden_ = 0, out_ = 0;
  Parameter w1_, b1_, w2_, b2_, w3_, b3_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with bias correction. Weight decay is added to the gradient (L2).
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});
  void step();
  void zero_grad();
  std::size_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  void set_step_count(std::size_t t) { t_ = t; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace wbi::ad
