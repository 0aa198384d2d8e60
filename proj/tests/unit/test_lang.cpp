#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "support.hpp"
#include "wbi/error.hpp"
#include "wbi/lang.hpp"
#include "wbi/progen.hpp"
#include "wbi/semantics.hpp"

using namespace wbi;

namespace {

const char* kMilky = R"(one := 1
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
)";

const char* kCluster = R"(u := 0
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
)";

VarId var(const Program& p, const std::string& name) {
  for (std::uint32_t i = 0; i < p.var_names.size(); ++i)
    if (p.var_names[i] == name) return VarId{i};
  throw std::runtime_error("no variable " + name);
}

// Renames every variable through a random bijection, keeping commands.
Program rename(const Program& p, std::uint64_t seed) {
  Program q = p;
  std::vector<std::size_t> perm(p.var_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) q.var_names[i] = "r" + std::to_string(perm[i]);
  return q;
}

// Multiset of (in-degree, out-degree, is-latent) signatures: a cheap
// isomorphism invariant.
std::multiset<std::tuple<std::size_t, std::size_t, bool>> signature(const Program& p) {
  DependencyGraph g = dependency_graph(p);
  std::vector<bool> latent(g.node_count(), false);
  for (VarId v : p.latent_order) latent[v.index] = true;
  std::multiset<std::tuple<std::size_t, std::size_t, bool>> out;
  for (std::size_t v = 0; v < g.node_count(); ++v)
    out.insert({g.parents[v].size(), g.children[v].size(), latent[v]});
  return out;
}

}  // namespace

TEST(Parse, SingleSample) {
  Program p = parse("u := 0\nv := 1\nz1 ~ normal(u, v)\n");
  ASSERT_EQ(p.commands.size(), 3u);
  const auto& s = std::get<Sample>(p.commands[2]);
  EXPECT_EQ(p.name(s.target), "z1");
  EXPECT_EQ(p.name(s.mean), "u");
  EXPECT_EQ(p.name(s.variance), "v");
}

TEST(Parse, MilkyWay) {
  Program p = parse(kMilky);
  EXPECT_EQ(p.latent_count(), 3u);
  EXPECT_EQ(p.obs_values, (std::vector<double>{10.0, 3.0}));
}

TEST(Parse, FixtureFilesParse) {
  Program m = parse(read_file(std::string(WBI_PROGRAMS_DIR) + "/milky_way.wppl"));
  EXPECT_EQ(m, parse(kMilky));
  Program c = parse(read_file(std::string(WBI_PROGRAMS_DIR) + "/clustering.wppl"));
  EXPECT_EQ(c, parse(kCluster));
}

TEST(Parse, ReassignmentRejected) {
  EXPECT_THROW(parse("a := 0\nb := 1\nc := 2\nz1 ~ normal(a, b)\nz1 := c\n"), TypeError);
}

TEST(Parse, SyntaxErrorCarriesPosition) {
  try {
    parse("a := 0\nb := a +\n");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Parse, UnknownProcedureAndArity) {
  EXPECT_THROW(parse("a := 1\nb := frobnicate(a)\n"), SyntaxError);
  EXPECT_THROW(parse("a := 1\nb := rosenbrock(a)\n"), SyntaxError);
  EXPECT_THROW(parse("a := 1\nb := nl(a, a)\n"), SyntaxError);
}

TEST(Parse, CommentsAndAllCommandForms) {
  Program p = parse(R"(// header
a := -1.5e0  // literal
b := a
c := add(a, b)
d := nl(c)
z ~ normal(a, c)
e := if (z > a) b else c
obs(normal(e, d), 0.25)
)");
  ASSERT_EQ(p.commands.size(), 7u);
  EXPECT_EQ(kind_of(p.commands[0]), CommandKind::assign_const);
  EXPECT_EQ(kind_of(p.commands[1]), CommandKind::assign_var);
  EXPECT_EQ(kind_of(p.commands[2]), CommandKind::call);
  EXPECT_EQ(kind_of(p.commands[3]), CommandKind::call);
  EXPECT_EQ(kind_of(p.commands[4]), CommandKind::sample);
  EXPECT_EQ(kind_of(p.commands[5]), CommandKind::if_gt);
  EXPECT_EQ(kind_of(p.commands[6]), CommandKind::observe);
  EXPECT_DOUBLE_EQ(std::get<AssignConst>(p.commands[0]).value, -1.5);
}

TEST(Parse, RoundTripOnGeneratedPrograms) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls))
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Program p = generate(spec, seed).program;
        Program back = parse(print(p));
        EXPECT_EQ(print(back), print(p)) << spec.label() << " seed " << seed;
        EXPECT_TRUE(canonicalise(back) == p) << spec.label() << " seed " << seed;
      }
}

TEST(Parse, RealsRoundTripExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    Program p = parse("a := " + format_real(x) + "\n");
    EXPECT_EQ(std::get<AssignConst>(p.commands[0]).value, x);
  }
}

TEST(Canonicalise, Idempotent) {
  for (const auto& cls : class_names()) {
    Program c = canonicalise(generate(class_spec(cls, cls == "ext1" || cls == "ext2" || cls == "mulmod" ? 1 : 0), 11).program);
    EXPECT_EQ(canonicalise(c), c) << cls;
  }
}

TEST(Canonicalise, ClusteringGraphIsomorphic) {
  Program p = parse(kCluster);
  Program c = canonicalise(p);
  EXPECT_EQ(c.var_count(), p.var_count());
  EXPECT_EQ(c.latent_count(), 6u);
  EXPECT_EQ(dependency_graph(c).edge_count(), dependency_graph(p).edge_count());
  EXPECT_EQ(signature(c), signature(p));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(c.name(c.latent_order[i]), "z" + std::to_string(i));
  // Same density up to the latent relabelling implied by the sampling order.
  std::vector<double> z = {0.3, -1.0, 0.2, -0.4, 1.1, 0.9};
  EXPECT_DOUBLE_EQ(log_density(c, z), log_density(p, z));
}

TEST(Canonicalise, AlphaEquivalentProgramsAgree) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls)) {
      Program p = generate(spec, 5).program;
      for (std::uint64_t s = 0; s < 3; ++s) EXPECT_EQ(canonicalise(rename(p, s)), canonicalise(p)) << spec.label();
    }
}

TEST(DependencyGraph, MilkyWayChains) {
  Program p = parse(kMilky);
  DependencyGraph g = dependency_graph(p);
  auto v = [&](const char* n) { return static_cast<std::size_t>(var(p, n).index); };
  const std::size_t x1 = p.var_count(), x2 = p.var_count() + 1;
  EXPECT_TRUE(g.has_edge(v("z1"), v("mass1")));
  EXPECT_TRUE(g.has_edge(v("mass1"), v("z2")));
  EXPECT_TRUE(g.has_edge(v("z2"), x1));
  EXPECT_TRUE(g.has_edge(v("z1"), v("mass2")));
  EXPECT_TRUE(g.has_edge(v("mass2"), v("z3")));
  EXPECT_TRUE(g.has_edge(v("z3"), x2));
  EXPECT_FALSE(g.has_edge(v("z2"), x2));
  EXPECT_TRUE(g.is_acyclic());
}

TEST(DependencyGraph, SingleConstantIsIsolated) {
  Program p = parse("v0 := 1.0\n");
  DependencyGraph g = dependency_graph(p);
  EXPECT_EQ(g.node_count(), 1u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(DependencyGraph, Ext1ChainType) {
  Program p = generate(class_spec("ext1", ext1_type(1, 1)), 3).program;
  DependencyGraph g = dependency_graph(p);
  std::vector<std::size_t> rand = random_nodes(p, g);
  // z0 -> z1 -> z2 -> z3 -> x1: the random nodes induce a simple path.
  ASSERT_EQ(rand.size(), 5u);
  std::set<std::size_t> in(rand.begin(), rand.end());
  std::size_t edges = 0, heads = 0, tails = 0;
  for (std::size_t u : rand) {
    std::size_t out_deg = 0, in_deg = 0;
    for (std::size_t c : g.children[u]) out_deg += in.count(c);
    for (std::size_t q : g.parents[u]) in_deg += in.count(q);
    EXPECT_LE(out_deg, 1u);
    EXPECT_LE(in_deg, 1u);
    edges += out_deg;
    heads += in_deg == 0;
    tails += out_deg == 0;
  }
  EXPECT_EQ(edges, 4u);
  EXPECT_EQ(heads, 1u);
  EXPECT_EQ(tails, 1u);
  EXPECT_GE(rand.back(), g.var_count);  // the observation ends the path
}

TEST(DependencyGraph, AcyclicAndLatentBound) {
  for (const auto& cls : class_names())
    for (const auto& spec : class_specs(cls)) {
      Program p = generate(spec, 1).program;
      EXPECT_TRUE(dependency_graph(p).is_acyclic());
      EXPECT_LE(p.latent_count(), p.var_count());
    }
}

TEST(OneHot, Basics) {
  EXPECT_EQ(one_hot(VarId{0}, 3), (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(one_hot(VarId{2}, 3), (std::vector<double>{0, 0, 1}));
  std::vector<double> acc(5, 0.0);
  for (std::uint32_t i = 0; i < 5; ++i) {
    auto h = one_hot(VarId{i}, 5);
    for (std::size_t k = 0; k < 5; ++k) acc[k] += h[k];
  }
  EXPECT_EQ(acc, std::vector<double>(5, 1.0));
  EXPECT_THROW(one_hot(VarId{3}, 3), ShapeError);
}

TEST(ProgramHash, StableAndDiscriminating) {
  Program a = generate(class_spec("gauss"), 1).program;
  Program b = generate(class_spec("gauss"), 2).program;
  EXPECT_EQ(program_hash(a), program_hash(parse(print(a))));
  EXPECT_NE(program_hash(a), program_hash(b));
}
