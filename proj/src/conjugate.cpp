#include "wbi/conjugate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace wbi {

namespace {

// a + b'z
struct Affine {
  double a = 0.0;
  Eigen::VectorXd b;
  bool is_constant() const { return b.isZero(0.0); }
};

constexpr double kLog2Pi = 1.83787706640934548356;

}  // namespace

std::optional<LinearGaussian> linear_gaussian(const Program& prog) {
  const auto n = static_cast<Eigen::Index>(prog.latent_count());
  std::vector<Affine> val(prog.var_count(), Affine{0.0, Eigen::VectorXd::Zero(n)});
  LinearGaussian lg{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};

  // Adds the factor log N(g'z + k0; 0, v).
  auto factor = [&](const Eigen::VectorXd& g, double k0, double v) {
    lg.precision.noalias() += g * g.transpose() / v;
    lg.linear += -k0 * g / v;
    lg.constant += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * k0 * k0 / v;
  };

  Eigen::Index latent = 0;
  for (const auto& cmd : prog.commands) {
    if (const auto* s = std::get_if<Sample>(&cmd)) {
      const Affine& mean = val[s->mean.index];
      const Affine& var = val[s->variance.index];
      if (!var.is_constant() || !(var.a > 0.0)) return std::nullopt;
      Eigen::VectorXd g = -mean.b;
      g(latent) += 1.0;
      factor(g, -mean.a, var.a);
      Affine z{0.0, Eigen::VectorXd::Zero(n)};
      z.b(latent++) = 1.0;
      val[s->target.index] = std::move(z);
    } else if (const auto* o = std::get_if<Observe>(&cmd)) {
      const Affine& mean = val[o->mean.index];
      const Affine& var = val[o->variance.index];
      if (!var.is_constant() || !(var.a > 0.0)) return std::nullopt;
      factor(-mean.b, o->value - mean.a, var.a);
    } else if (const auto* c = std::get_if<AssignConst>(&cmd)) {
      val[c->target.index].a = c->value;
    } else if (const auto* c = std::get_if<AssignVar>(&cmd)) {
      val[c->target.index] = val[c->source.index];
    } else if (const auto* c = std::get_if<IfGt>(&cmd)) {
      const Affine &l = val[c->lhs.index], &r = val[c->rhs.index];
      if (!l.is_constant() || !r.is_constant()) return std::nullopt;
      val[c->target.index] = l.a > r.a ? val[c->then_var.index] : val[c->else_var.index];
    } else if (const auto* c = std::get_if<Call>(&cmd)) {
      const Affine& x = val[c->args[0].index];
      const Affine* y = c->args.size() > 1 ? &val[c->args[1].index] : nullptr;
      Affine out{0.0, Eigen::VectorXd::Zero(n)};
      if (c->proc == "add" && y) {
        out.a = x.a + y->a;
        out.b = x.b + y->b;
      } else if (c->proc == "mul" && y && (x.is_constant() || y->is_constant())) {
        const Affine& k = x.is_constant() ? x : *y;
        const Affine& w = x.is_constant() ? *y : x;
        out.a = k.a * w.a;
        out.b = k.a * w.b;
      } else if (x.is_constant() && (!y || y->is_constant())) {
        out.a = ProcedureRegistry::builtin().at(c->proc).fn(x.a, y ? y->a : 0.0);
      } else {
        return std::nullopt;
      }
      val[c->target.index] = std::move(out);
    }
  }
  if (n > 0 && Eigen::LLT<Eigen::MatrixXd>(lg.precision).info() != Eigen::Success)
    return std::nullopt;
  return lg;
}

Eigen::VectorXd LinearGaussian::mean() const { return precision.llt().solve(linear); }

Eigen::MatrixXd LinearGaussian::covariance() const {
  return precision.llt().solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
}

double LinearGaussian::log_normaliser() const {
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  const double half_logdet = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return constant + 0.5 * linear.dot(llt.solve(linear)) +
         0.5 * static_cast<double>(size()) * kLog2Pi - half_logdet;
}

SampleMatrix LinearGaussian::sample(std::size_t count, Rng& rng) const {
  const auto n = precision.rows();
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  const Eigen::VectorXd mu = llt.solve(linear);
  SampleMatrix out(static_cast<Eigen::Index>(count), n);
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(n);
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = normal(rng);
    // P = L L' so L'^{-1} eps has covariance P^{-1}.
    out.row(j) = (mu + llt.matrixU().solve(eps)).transpose();
  }
  return out;
}

}  // namespace wbi
