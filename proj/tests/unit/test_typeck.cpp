#include <gtest/gtest.h>

#include "wbi/error.hpp"
#include "wbi/lang.hpp"
#include "wbi/progen.hpp"
#include "wbi/typeck.hpp"

using namespace wbi;

namespace {

std::vector<std::string> names_of(const Program& p, const std::vector<VarId>& vs) {
  std::vector<std::string> out;
  for (VarId v : vs) out.push_back(p.name(v));
  return out;
}

}  // namespace

TEST(Typeck, ConstantAssignmentExtendsV) {
  Program p = parse_syntax("v0 := 1.0\n");
  TypingState st = check_command({}, p.commands[0], 0, p.var_names);
  EXPECT_TRUE(st.latents.empty());
  EXPECT_EQ(st.assigned.size(), 1u);
  EXPECT_TRUE(st.assigned.count(VarId{0}));
  EXPECT_TRUE(st.observations.empty());
}

TEST(Typeck, UseBeforeDefine) {
  Program p = parse_syntax("v2 := 1\nz ~ normal(v1, v2)\n");
  try {
    check_program(p);
    FAIL();
  } catch (const TypeError& e) {
    EXPECT_EQ(e.kind(), TypeErrorKind::use_before_define);
    EXPECT_EQ(e.var(), "v1");
    EXPECT_EQ(e.command_index(), 1u);
  }
}

TEST(Typeck, ObserveAppendsToAlpha) {
  Program p = parse_syntax("u := 1\nz1 ~ normal(u, u)\nobs(normal(z1, u), 3.0)\n");
  TypingState st;
  st = check_command(st, p.commands[0], 0);
  st = check_command(st, p.commands[1], 1);
  TypingState after = check_command(st, p.commands[2], 2);
  EXPECT_EQ(after.latents, st.latents);
  EXPECT_EQ(after.assigned, st.assigned);
  EXPECT_EQ(after.observations, std::vector<double>{3.0});
}

TEST(Typeck, ClusteringTriple) {
  Program p = parse_syntax(R"(u := 0
v := 5
w := 1
z1 ~ normal(u, v)
z2 ~ normal(u, v)
z3 ~ normal(u, w)
mu3 := if (z3 > u) z1 else z2
obs(normal(mu3, w), -1.9)
z4 ~ normal(u, w)
mu4 := if (z4 > u) z1 else z2
obs(normal(mu4, w), -2.2)
z5 ~ normal(u, w)
mu5 := if (z5 > u) z1 else z2
obs(normal(mu5, w), 2.4)
z6 ~ normal(u, w)
mu6 := if (z6 > u) z1 else z2
obs(normal(mu6, w), 2.2)
)");
  TypingState st = check_program(p);
  EXPECT_EQ(names_of(p, st.latents), (std::vector<std::string>{"z1", "z2", "z3", "z4", "z5", "z6"}));
  EXPECT_EQ(st.observations, (std::vector<double>{-1.9, -2.2, 2.4, 2.2}));
}

TEST(Typeck, MilkyWayTriple) {
  Program p = parse_syntax(R"(one := 1
t := 2
f := 5
ten := 10
z1 ~ normal(f, ten)
mass1 := z1 * t
z2 ~ normal(mass1, f)
obs(normal(z2, one), 10)
mass2 := z1 + f
z3 ~ normal(mass2, t)
obs(normal(z3, one), 3)
)");
  TypingState st = check_program(p);
  EXPECT_EQ(names_of(p, st.latents), (std::vector<std::string>{"z1", "z2", "z3"}));
  EXPECT_EQ(st.observations, (std::vector<double>{10.0, 3.0}));
}

TEST(Typeck, EmptyProgram) {
  TypingState st = check_program(Program{});
  EXPECT_TRUE(st.latents.empty());
  EXPECT_TRUE(st.assigned.empty());
  EXPECT_TRUE(st.observations.empty());
}

TEST(Typeck, ReassignmentOfLatentOrConstant) {
  EXPECT_THROW(check_program(parse_syntax("a := 1\na := 2\n")), TypeError);
  try {
    check_program(parse_syntax("a := 1\nz ~ normal(a, a)\nz := a\n"));
    FAIL();
  } catch (const TypeError& e) {
    EXPECT_EQ(e.kind(), TypeErrorKind::reassignment);
    EXPECT_EQ(e.var(), "z");
    EXPECT_EQ(e.command_index(), 2u);
  }
}

TEST(Typeck, GeneratedProgramsTypeCheckWithMatchingCounts) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls))
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Program p = generate(spec, seed).program;
        TypingState st = check_program(p);
        EXPECT_EQ(st.latents.size(), p.latent_count());
        EXPECT_EQ(st.observations.size(), p.observe_count());
        EXPECT_EQ(st.latents, p.latent_order);
      }
}

TEST(Typeck, OrderSensitive) {
  // Swapping a definition past its first use must fail.
  Program p = parse_syntax("a := 1\nb := 2\nz ~ normal(a, b)\n");
  EXPECT_NO_THROW(check_program(p));
  std::swap(p.commands[1], p.commands[2]);
  EXPECT_THROW(check_program(p), TypeError);
  EXPECT_NO_THROW(check_program(parse_syntax("b := 2\na := 1\nz ~ normal(a, b)\n")));
}
