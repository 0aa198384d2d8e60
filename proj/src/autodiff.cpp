#include "wbi/autodiff.hpp"

#include <cmath>
#include <random>

#include "wbi/error.hpp"

namespace wbi::ad {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

Tape& same_tape(Tensor a, Tensor b) {
  if (!a.tape() || a.tape() != b.tape()) throw ShapeError("operands live on different tapes");
  return *a.tape();
}

void require_same_shape(Tensor a, Tensor b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
  zero_grad();
}

const Matrix& Tensor::value() const { return tape_->node(id_).value; }
const Matrix& Tensor::grad() const { return tape_->node(id_).grad; }
double Tensor::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("tensor is not a scalar");
  return v(0, 0);
}

Tensor Tape::push(Matrix value, std::vector<int> inputs,
                  std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.value = std::move(value);
  for (int i : inputs) n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(i)].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::constant(Matrix v) { return push(std::move(v), {}, nullptr); }

Tensor Tape::variable(Matrix v) {
  Tensor t = push(std::move(v), {}, nullptr);
  nodes_.back().requires_grad = true;
  return t;
}

Tensor Tape::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Tensor(this, it->second);
  Tensor t = variable(p.value);
  nodes_.back().param = &p;
  param_ids_.emplace(&p, t.id());
  return t;
}

Matrix& Tape::grad_of(int id) {
  Node& n = node(id);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Tensor loss) {
  if (loss.tape() != this) throw ShapeError("loss belongs to another tape");
  if (loss.value().size() != 1) throw ShapeError("backward requires a scalar loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id()).setOnes();
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = node(i);
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.back) n.back(*this, n);
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols())
        n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  param_ids_.clear();
}

Tensor matvec(Tensor w, Tensor x) {
  Tape& t = same_tape(w, x);
  if (w.cols() != x.rows() || x.cols() != 1) throw ShapeError("matvec: shape mismatch");
  const int wi = w.id(), xi = x.id();
  return t.push(w.value() * x.value(), {wi, xi}, [wi, xi](Tape& tp, const Tape::Node& n) {
    if (tp.node(wi).requires_grad) tp.grad_of(wi).noalias() += n.grad * tp.node(xi).value.transpose();
    if (tp.node(xi).requires_grad) tp.grad_of(xi).noalias() += tp.node(wi).value.transpose() * n.grad;
  });
}

Tensor add(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "add");
  const int ai = a.id(), bi = b.id();
  return t.push(a.value() + b.value(), {ai, bi}, [ai, bi](Tape& tp, const Tape::Node& n) {
    if (tp.node(ai).requires_grad) tp.grad_of(ai) += n.grad;
    if (tp.node(bi).requires_grad) tp.grad_of(bi) += n.grad;
  });
}

Tensor sub(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "sub");
  const int ai = a.id(), bi = b.id();
  return t.push(a.value() - b.value(), {ai, bi}, [ai, bi](Tape& tp, const Tape::Node& n) {
    if (tp.node(ai).requires_grad) tp.grad_of(ai) += n.grad;
    if (tp.node(bi).requires_grad) tp.grad_of(bi) -= n.grad;
  });
}

Tensor mul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "mul");
  const int ai = a.id(), bi = b.id();
  return t.push(a.value().cwiseProduct(b.value()), {ai, bi},
                [ai, bi](Tape& tp, const Tape::Node& n) {
                  if (tp.node(ai).requires_grad)
                    tp.grad_of(ai) += n.grad.cwiseProduct(tp.node(bi).value);
                  if (tp.node(bi).requires_grad)
                    tp.grad_of(bi) += n.grad.cwiseProduct(tp.node(ai).value);
                });
}

Tensor scale(Tensor a, double s) {
  const int ai = a.id();
  return a.tape()->push(a.value() * s, {ai},
                        [ai, s](Tape& tp, const Tape::Node& n) { tp.grad_of(ai) += s * n.grad; });
}

Tensor add_scalar(Tensor a, double s) {
  const int ai = a.id();
  return a.tape()->push(a.value().array() + s, {ai},
                        [ai](Tape& tp, const Tape::Node& n) { tp.grad_of(ai) += n.grad; });
}

Tensor tanh(Tensor a) {
  const int ai = a.id();
  return a.tape()->push(a.value().array().tanh().matrix(), {ai},
                        [ai](Tape& tp, const Tape::Node& n) {
                          tp.grad_of(ai).array() +=
                              n.grad.array() * (1.0 - n.value.array().square());
                        });
}

Tensor exp(Tensor a) {
  const int ai = a.id();
  return a.tape()->push(a.value().array().exp().matrix(), {ai},
                        [ai](Tape& tp, const Tape::Node& n) {
                          tp.grad_of(ai).array() += n.grad.array() * n.value.array();
                        });
}

Tensor log(Tensor a) {
  const int ai = a.id();
  return a.tape()->push(a.value().array().log().matrix(), {ai},
                        [ai](Tape& tp, const Tape::Node& n) {
                          tp.grad_of(ai).array() += n.grad.array() / tp.node(ai).value.array();
                        });
}

Tensor square(Tensor a) {
  const int ai = a.id();
  return a.tape()->push(a.value().array().square().matrix(), {ai},
                        [ai](Tape& tp, const Tape::Node& n) {
                          tp.grad_of(ai).array() += 2.0 * n.grad.array() * tp.node(ai).value.array();
                        });
}

Tensor sum(Tensor a) {
  const int ai = a.id();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->push(std::move(v), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    tp.grad_of(ai).array() += n.grad(0, 0);
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape* t = parts.front().tape();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  for (const Tensor& p : parts) {
    if (p.tape() != t) throw ShapeError("operands live on different tapes");
    if (p.cols() != 1) throw ShapeError("concat expects column vectors");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix v(rows, 1);
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    v.block(at, 0, p.rows(), 1) = p.value();
    at += p.rows();
  }
  return t->push(std::move(v), ids, [ids](Tape& tp, const Tape::Node& n) {
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index r = tp.node(id).value.rows();
      if (tp.node(id).requires_grad) tp.grad_of(id) += n.grad.block(off, 0, r, 1);
      off += r;
    }
  });
}

Tensor slice(Tensor a, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 0 || start + len > a.rows() || a.cols() != 1)
    throw ShapeError("slice out of range");
  const int ai = a.id();
  return a.tape()->push(a.value().block(start, 0, len, 1), {ai},
                        [ai, start, len](Tape& tp, const Tape::Node& n) {
                          tp.grad_of(ai).block(start, 0, len, 1) += n.grad;
                        });
}

Tensor clamp(Tensor a, double lo, double hi) {
  const int ai = a.id();
  return a.tape()->push(a.value().cwiseMax(lo).cwiseMin(hi), {ai},
                        [ai, lo, hi](Tape& tp, const Tape::Node& n) {
                          const Matrix& x = tp.node(ai).value;
                          Matrix& g = tp.grad_of(ai);
                          for (Eigen::Index k = 0; k < x.size(); ++k)
                            if (x(k) >= lo && x(k) <= hi) g(k) += n.grad(k);
                        });
}

WeightedMoments weighted_moments(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                 const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (z.rows() != w.size()) throw ShapeError("weights do not match batch size");
  WeightedMoments m;
  m.weight_sum = w.sum();
  if (m.weight_sum > 0.0)
    m.mean = (z.transpose() * w) / m.weight_sum;
  else
    m.mean = Vector::Zero(z.cols());
  m.centred_sq = Vector::Zero(z.cols());
  for (Eigen::Index j = 0; j < z.rows(); ++j)
    m.centred_sq += w(j) * (z.row(j).transpose() - m.mean).array().square().matrix();
  return m;
}

WeightedMoments point_moments(const Eigen::Ref<const Eigen::VectorXd>& z) {
  return {1.0, z, Vector::Zero(z.size())};
}

Tensor gaussian_nll(Tensor mean, Tensor logvar, const WeightedMoments& m) {
  Tape& t = same_tape(mean, logvar);
  require_same_shape(mean, logvar, "gaussian_nll");
  if (mean.cols() != 1 || mean.rows() != m.mean.size())
    throw ShapeError("gaussian_nll: moments do not match mean");
  const Vector d = m.mean - mean.value();
  const Vector prec = (-logvar.value().array()).exp();
  const Vector quad = m.centred_sq.array() + m.weight_sum * d.array().square();
  Matrix v(1, 1);
  v(0, 0) = m.weight_sum * (kHalfLog2Pi * static_cast<double>(d.size()) + 0.5 * logvar.value().sum()) +
            0.5 * quad.dot(prec);
  const int mi = mean.id(), li = logvar.id();
  const double s0 = m.weight_sum;
  return t.push(std::move(v), {mi, li}, [mi, li, d, prec, quad, s0](Tape& tp, const Tape::Node& n) {
    const double g = n.grad(0, 0);
    if (tp.node(mi).requires_grad) tp.grad_of(mi) -= g * s0 * d.cwiseProduct(prec);
    if (tp.node(li).requires_grad)
      tp.grad_of(li).array() += g * (0.5 * s0 - 0.5 * quad.array() * prec.array());
  });
}

Mlp::Mlp(std::string name, std::size_t in, std::size_t hidden, std::size_t out)
    : in_(in), hidden_(hidden), out_(out) {
  auto rows = [](std::size_t r) { return static_cast<Eigen::Index>(r); };
  w1_ = Parameter(name + ".w1", Matrix::Zero(rows(hidden), rows(in)));
  b1_ = Parameter(name + ".b1", Matrix::Zero(rows(hidden), 1));
  w2_ = Parameter(name + ".w2", Matrix::Zero(rows(hidden), rows(hidden)));
  b2_ = Parameter(name + ".b2", Matrix::Zero(rows(hidden), 1));
  w3_ = Parameter(name + ".w3", Matrix::Zero(rows(out), rows(hidden)));
  b3_ = Parameter(name + ".b3", Matrix::Zero(rows(out), 1));
}

void Mlp::init_uniform(Rng& rng) {
  for (Parameter* w : {&w1_, &w2_, &w3_}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w->value.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index k = 0; k < w->value.size(); ++k) w->value(k) = u(rng);
  }
  for (Parameter* b : {&b1_, &b2_, &b3_}) b->value.setZero();
}

void Mlp::set_zero() {
  for (Parameter* p : parameters()) p->value.setZero();
}

Tensor Mlp::forward(Tape& tape, Tensor x) {
  if (static_cast<std::size_t>(x.rows()) != in_) throw ShapeError(w1_.name + ": input size mismatch");
  Tensor h = tanh(add(matvec(tape.param(w1_), x), tape.param(b1_)));
  h = tanh(add(matvec(tape.param(w2_), h), tape.param(b2_)));
  return add(matvec(tape.param(w3_), h), tape.param(b3_));
}

Vector Mlp::forward_value(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != in_) throw ShapeError(w1_.name + ": input size mismatch");
  Vector h = (w1_.value * x + b1_.value).array().tanh();
  h = (w2_.value * h + b2_.value).array().tanh();
  return w3_.value * h + b3_.value;
}

std::vector<Parameter*> Mlp::parameters() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }
std::vector<const Parameter*> Mlp::parameters() const {
  return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_};
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw ShapeError(p.name + ": gradient shape mismatch");
    Matrix g = p.grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p.value;
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= cfg_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace wbi::ad
