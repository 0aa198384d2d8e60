#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "wbi/error.hpp"
#include "wbi/lang.hpp"
#include "wbi/progen.hpp"
#include "wbi/whitebox.hpp"

using namespace wbi;

namespace {

NetworkBank random_bank(const Program& p, std::uint64_t seed, std::size_t extra_m = 0) {
  return NetworkBank::create({p.var_count() + extra_m, p.latent_count()}, seed);
}

Program rename(const Program& p, std::uint64_t seed) {
  Program q = p;
  std::vector<std::size_t> perm(p.var_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) q.var_names[i] = "w" + std::to_string(perm[i]);
  return q;
}

}  // namespace

TEST(Whitebox, AssignConstKeepsZ) {
  Program p = parse("a := 1.5\n");
  NetworkBank bank = NetworkBank::create({3, 0}, 1);
  InferState st = InferState::initial(10);
  st.log_z = 0.37;
  InferState out = step(bank, p.commands[0], st);
  EXPECT_EQ(out.log_z, 0.37);
  EXPECT_FALSE(out.h.isApprox(st.h));
}

TEST(Whitebox, ZeroIntegratorLeavesZ) {
  GeneratedProgram g = generate(class_spec("gauss"), 1);
  NetworkBank bank = random_bank(g.program, 3);
  bank.integrator().set_zero();
  InferResult r = infer(bank, g.program);
  EXPECT_EQ(r.log_z, 0.0);
  EXPECT_EQ(r.z(), 1.0);
}

TEST(Whitebox, ZeroBankSampleStepIsFixedPoint) {
  Program p = parse("a := 0\nb := 1\nz ~ normal(a, b)\n");
  NetworkBank bank = NetworkBank::zeros({3, 1});
  InferState st = InferState::initial(10);
  st.h.setConstant(0.4);
  EXPECT_TRUE(step(bank, p.commands[2], st).h.isZero());
}

TEST(Whitebox, EmptyProgramDecodesInitialState) {
  NetworkBank bank = NetworkBank::create({2, 0}, 4);
  InferResult r = infer(bank, Program{});
  EXPECT_EQ(r.log_z, 0.0);
  MeanFieldPosterior d = decode(bank, ad::Vector::Zero(10));
  EXPECT_EQ(r.posterior.mean, d.mean);
  EXPECT_EQ(r.posterior.variance, d.variance);
}

TEST(Whitebox, NoObserveMeansZIsOne) {
  GeneratedProgram g = generate(class_spec("gauss"), 2);
  Program prior = g.program;
  std::erase_if(prior.commands, [](const AtomicCommand& c) { return kind_of(c) == CommandKind::observe; });
  prior.obs_values.clear();
  EXPECT_EQ(infer(random_bank(prior, 5), prior).log_z, 0.0);
}

TEST(LogQ, StandardNormalAtZero) {
  MeanFieldPosterior q{ad::Vector::Zero(3), ad::Vector::Ones(3)};
  std::vector<double> z(3, 0.0);
  EXPECT_NEAR(log_q(q, z), 3 * std::log(1.0 / std::sqrt(2 * M_PI)), 1e-14);
}

TEST(LogQ, FourfoldVarianceCostsLogTwoPerLatent) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 5);
  for (int n = 1; n <= 4; ++n) {
    MeanFieldPosterior q{ad::Vector::Zero(n), ad::Vector::Zero(n)};
    for (int i = 0; i < n; ++i) q.mean(i) = u(rng), q.variance(i) = u(rng);
    MeanFieldPosterior wide = q;
    wide.variance *= 4.0;
    std::vector<double> at(q.mean.data(), q.mean.data() + n);
    EXPECT_NEAR(log_q(q, at) - log_q(wide, at), n * std::log(2.0), 1e-12);
  }
}

TEST(LogQ, TapedGradientMatchesFiniteDifferences) {
  GeneratedProgram g = generate(class_spec("hierd"), 7);
  NetworkBank bank = random_bank(g.program, 8);
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(g.latents.data(), static_cast<Eigen::Index>(g.latents.size()));
  ad::WeightedMoments mom = ad::point_moments(z);
  auto value = [&] {
    InferResult r = infer(bank, g.program);
    return -log_q(r.posterior, g.latents);
  };
  for (ad::Parameter* p : bank.parameters()) p->zero_grad();
  ad::Tape tape;
  ad::Tensor nll = neg_log_q(infer_taped(tape, bank, g.program), mom);
  EXPECT_NEAR(nll.scalar(), value(), 1e-9 * std::abs(value()));
  tape.backward(nll);
  auto params = bank.parameters();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    ad::Parameter* p = params[rng() % params.size()];
    Eigen::Index i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p->value.size()));
    const double v = p->value(i), h = 1e-6;
    p->value(i) = v + h;
    const double up = value();
    p->value(i) = v - h;
    const double down = value();
    p->value(i) = v;
    EXPECT_LT(test::rel_err(p->grad(i), (up - down) / (2 * h)), 1e-4) << p->name;
  }
}

TEST(Whitebox, OnePassCounts) {
  for (const auto& cls : class_names()) {
    GeneratedProgram g = generate(class_specs(cls).back(), 3);
    NetworkBank bank = random_bank(g.program, 1);
    ScanStats st;
    infer(bank, g.program, &st);
    EXPECT_EQ(st.scans, 1u);
    EXPECT_EQ(st.state_updates + st.decodes, g.program.commands.size() + 1) << cls;
    EXPECT_EQ(st.integrations, g.program.observe_count());
  }
}

TEST(Whitebox, ZEqualsReplayedProduct) {
  GeneratedProgram g = generate(class_spec("milkyo"), 2);
  NetworkBank bank = random_bank(g.program, 6);
  InferState st = InferState::initial(bank.dims().s);
  double log_z = 0.0;
  for (const auto& cmd : g.program.commands) {
    if (const auto* o = std::get_if<Observe>(&cmd)) log_z += observe_log_factor(bank, *o, st.h);
    st = step(bank, cmd, st);
  }
  EXPECT_DOUBLE_EQ(infer(bank, g.program).log_z, log_z);
}

TEST(Whitebox, CanonicalFormHidesNames) {
  for (const auto& cls : class_names()) {
    Program p = generate(class_specs(cls).front(), 9).program;
    NetworkBank bank = random_bank(p, 2);
    InferResult a = infer(bank, canonicalise(p));
    InferResult b = infer(bank, canonicalise(rename(p, 4)));
    EXPECT_EQ(a.posterior.mean, b.posterior.mean) << cls;
    EXPECT_EQ(a.posterior.variance, b.posterior.variance);
    EXPECT_EQ(a.log_z, b.log_z);
  }
}

TEST(Whitebox, OutputsAlwaysPositive) {
  for (const auto& cls : class_names()) {
    Program p = generate(class_specs(cls).front(), 1).program;
    NetworkBank bank = random_bank(p, 3);
    for (ad::Parameter* prm : bank.parameters()) prm->value *= 25.0;  // saturate everything
    InferResult r = infer(bank, p);
    EXPECT_TRUE((r.posterior.variance.array() > 0).all()) << cls;
    EXPECT_TRUE(r.posterior.variance.allFinite());
    EXPECT_GT(r.z(), 0.0);
    EXPECT_TRUE(std::isfinite(r.log_z));
  }
}

TEST(Whitebox, TapedAndUntapedAgree) {
  GeneratedProgram g = generate(class_spec("rb"), 5);
  NetworkBank bank = random_bank(g.program, 5, 3);
  InferResult r = infer(bank, g.program);
  ad::Tape tape;
  TapedInference t = infer_taped(tape, bank, g.program);
  EXPECT_TRUE(t.mean.value().isApprox(r.posterior.mean, 1e-14));
  EXPECT_TRUE(t.logvar.value().array().exp().matrix().isApprox(r.posterior.variance, 1e-12));
  EXPECT_NEAR(t.log_z.scalar(), r.log_z, 1e-12);
}

TEST(Whitebox, CompatibilityChecks) {
  GeneratedProgram g = generate(class_spec("milky"), 1);
  EXPECT_THROW(infer(NetworkBank::create({g.program.var_count() - 1, 3}, 1), g.program), ShapeError);
  EXPECT_THROW(infer(NetworkBank::create({g.program.var_count(), 2}, 1), g.program), ShapeError);
  EXPECT_NO_THROW(infer(NetworkBank::create({g.program.var_count() + 4, 3}, 1), g.program));
}

TEST(Whitebox, FeatureWidths) {
  Program p = parse(R"(a := 1
b := 2
z ~ normal(a, b)
c := z
d := add(z, c)
e := nl(d)
f := if (z > a) c else d
obs(normal(f, b), 0.5)
)");
  const std::size_t m = p.var_count() + 2;
  NetworkBank bank = NetworkBank::create({m, 1}, 1);
  std::vector<std::size_t> widths;
  for (const auto& cmd : p.commands) widths.push_back(static_cast<std::size_t>(command_features(bank, cmd).size()));
  EXPECT_EQ(widths, (std::vector<std::size_t>{m + 1, m + 1, 3 * m, 2 * m, 3 * m, 3 * m, 5 * m, 2 * m + 1}));
}

TEST(Whitebox, SignedLogScaling) {
  NetworkBank raw = NetworkBank::create({3, 1}, 1);
  NetworkBank sl = NetworkBank::create({3, 1}, 1, ProcedureRegistry::builtin(), InputScaling::signed_log);
  EXPECT_EQ(raw.scale_input(-20.0), -20.0);
  EXPECT_NEAR(sl.scale_input(-20.0), -std::log(21.0), 1e-15);
  EXPECT_EQ(sl.scale_input(0.0), 0.0);
  EXPECT_EQ(scaling_from_string(to_string(InputScaling::signed_log)), InputScaling::signed_log);
}

TEST(Whitebox, ZeroBankPredictsTheSameForEveryProgram) {
  NetworkBank bank = NetworkBank::zeros({9, 1});
  InferResult a = infer(bank, generate(class_spec("gauss"), 1).program);
  InferResult b = infer(bank, generate(class_spec("gauss"), 2).program);
  EXPECT_EQ(a.posterior.mean, b.posterior.mean);
  EXPECT_EQ(a.posterior.variance, b.posterior.variance);
  EXPECT_TRUE(a.posterior.mean.isZero());
  EXPECT_EQ(a.posterior.variance, ad::Vector::Ones(1));
}

TEST(Whitebox, CreateIsSeeded) {
  NetworkBank a = NetworkBank::create({5, 1}, 9), b = NetworkBank::create({5, 1}, 9),
              c = NetworkBank::create({5, 1}, 10);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
    differs = differs || pa[i]->value != pc[i]->value;
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
}
