#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "wbi/error.hpp"
#include "wbi/progen.hpp"
#include "wbi/semantics.hpp"
#include "wbi/typeck.hpp"

using namespace wbi;

namespace {

// Kolmogorov-Smirnov distance of a sample from U(lo, hi).
double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return d;
}

std::size_t count_kind(const Program& p, CommandKind k) {
  return static_cast<std::size_t>(
      std::count_if(p.commands.begin(), p.commands.end(), [&](const auto& c) { return kind_of(c) == k; }));
}

}  // namespace

TEST(Progen, GaussTemplateShape) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Program p = generate(class_spec("gauss"), seed).program;
    EXPECT_EQ(count_kind(p, CommandKind::assign_const), 5u);
    EXPECT_EQ(count_kind(p, CommandKind::sample), 1u);
    EXPECT_EQ(count_kind(p, CommandKind::call), 2u);
    EXPECT_EQ(count_kind(p, CommandKind::observe), 1u);
    EXPECT_EQ(p.commands.size(), 9u);
  }
}

TEST(Progen, FixedSeedIsByteIdentical) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls))
      EXPECT_EQ(print(generate(spec, 77).program), print(generate(spec, 77).program)) << spec.label();
}

TEST(Progen, TypeCounts) {
  EXPECT_EQ(class_specs("ext1").size(), 12u);
  EXPECT_EQ(class_specs("ext2").size(), 5u);
  EXPECT_EQ(class_specs("mulmod").size(), 3u);
  EXPECT_EQ(class_names().size(), 10u);
  EXPECT_THROW(class_specs("nope"), Error);
  EXPECT_THROW(class_spec("ext1", 13), Error);
  EXPECT_EQ(class_spec("ext1", ext1_type(2, 3)).label(), "ext1/7");
}

TEST(Progen, TenThousandProgramsPerClassAreSound) {
  for (const auto& cls : class_names()) {
    auto specs = class_specs(cls);
    std::size_t failures = 0;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      const ClassSpec& spec = specs[i % specs.size()];
      GeneratedProgram g = generate(spec, i);
      try {
        check_program(g.program);
        if (!std::isfinite(log_density(g.program, g.latents))) ++failures;
      } catch (const Error&) {
        ++failures;
      }
    }
    EXPECT_EQ(failures, 0u) << cls;
  }
}

TEST(Progen, ThetaMatchesDeclaredBounds) {
  for (const auto& cls : class_names()) {
    const ClassSpec spec = class_specs(cls).front();
    const std::size_t k = spec.theta.size();
    std::vector<std::vector<double>> draws(k);
    for (std::uint64_t s = 0; s < 10000; ++s) {
      GeneratedProgram g = generate(spec, s);
      for (std::size_t i = 0; i < k; ++i)
        draws[i].push_back(spec.theta[i].squared ? std::sqrt(g.theta[i]) : g.theta[i]);
    }
    for (std::size_t i = 0; i < k; ++i) {
      const auto& t = spec.theta[i];
      // Squared parameters are drawn with lo >= 0, so sqrt recovers the draw.
      ASSERT_GE(t.squared ? t.lo : 0.0, 0.0);
      EXPECT_LT(ks_uniform(draws[i], t.lo, t.hi), 1.628 / std::sqrt(10000.0)) << cls << " theta " << i + 1;
    }
  }
}

TEST(Progen, MilkyoHasTenObservations) {
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(generate(class_spec("milkyo"), s).program.observe_count(), 10u);
  EXPECT_EQ(generate(class_spec("milky"), 0).program.observe_count(), 2u);
}

TEST(Progen, GaussLatentUsesClippedUniform) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    GeneratedProgram g = generate(class_spec("gauss"), s);
    const double half = 2.0 * std::sqrt(g.theta[1]);
    EXPECT_LE(std::abs(g.latents[0] - g.theta[0]), half + 1e-12);
  }
}

TEST(Progen, VariancesPositive) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls))
      for (std::uint64_t s = 0; s < 50; ++s)
        EXPECT_TRUE(lint_nonpositive_variances(generate(spec, s).program).empty()) << spec.label();
}

TEST(Corpus, GaussFortyTen) {
  GeneratedCorpus c = generate_corpus({class_spec("gauss")}, {class_spec("gauss")}, 40, 10, 3);
  ASSERT_EQ(c.train.size(), 40u);
  ASSERT_EQ(c.test.size(), 10u);
  std::set<std::string> texts;
  for (const auto* split : {&c.train, &c.test})
    for (const auto& g : *split) {
      EXPECT_NO_THROW(check_program(g.program));
      texts.insert(print(g.program));
    }
  EXPECT_EQ(texts.size(), 50u);
}

TEST(Corpus, Ext1GraphHoldOut) {
  std::vector<ClassSpec> train, test;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 4; ++j) (j == 1 ? test : train).push_back(class_spec("ext1", ext1_type(i, j)));
  GeneratedCorpus c = generate_corpus(train, test, 60, 12, 1, true);
  for (const auto& g : c.train) EXPECT_NE((g.type - 1) % 4, 0) << g.type;
  for (const auto& g : c.test) EXPECT_EQ((g.type - 1) % 4, 0) << g.type;
  EXPECT_THROW(generate_corpus(train, {train[0]}, 5, 5, 1, true), Error);
  EXPECT_THROW(generate_corpus({}, test, 5, 5, 1), Error);
}

TEST(Corpus, MulmodLastTypeTest) {
  GeneratedCorpus c = generate_corpus(class_specs("mulmod"), {class_spec("mulmod", 3)}, 30, 6, 2);
  std::set<int> train_types;
  for (const auto& g : c.train) train_types.insert(g.type);
  EXPECT_EQ(train_types, (std::set<int>{1, 2, 3}));
  for (const auto& g : c.test) EXPECT_EQ(g.type, 3);
  EXPECT_EQ(c.test.front().program.latent_count(), c.train.front().program.latent_count());
}

TEST(ClassSpecJson, RoundTripAndInstantiate) {
  for (const auto& cls : class_names()) {
    ClassSpec s = class_specs(cls).back();
    ClassSpec back = class_spec_from_json(to_json(s));
    EXPECT_EQ(back.label(), s.label());
    EXPECT_EQ(back.program_template, s.program_template);
    EXPECT_EQ(back.overrides, s.overrides);
    EXPECT_EQ(print(generate(back, 4).program), print(generate(s, 4).program));
  }
  ClassSpec toy = class_spec_from_json(nlohmann::json::parse(
      R"({"name":"toy","theta":[[1,2],[0,3,true]],"template":"a := {1}\nb := {2}\nz ~ normal(a, b)\n"})"));
  EXPECT_EQ(instantiate(toy, {1.5, 4.0}), "a := 1.5\nb := 4.0\nz ~ normal(a, b)\n");
  EXPECT_THROW(instantiate(toy, {1.5}), Error);
}
