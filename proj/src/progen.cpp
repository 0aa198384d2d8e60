#include "wbi/progen.hpp"

#include <random>
#include <set>
#include <sstream>

#include "wbi/error.hpp"
#include "wbi/rng.hpp"
#include "wbi/semantics.hpp"

namespace wbi {

namespace {

ThetaSpec U(double lo, double hi) { return {lo, hi, false}; }
ThetaSpec U2(double lo, double hi) { return {lo, hi, true}; }

// --- fixed-structure classes ---------------------------------------------

ClassSpec gauss() {
  return {"gauss", 0,
          {U(-5, 5), U2(0, 20), U(-3, 3), U(-10, 10), U2(0.5, 10)},
          R"(m_z := {1}
v_z := {2}
c1 := {3}
c2 := {4}
v_x := {5}
z1 ~ normal(m_z, v_z)
z2 := z1 * c1
z3 := z2 + c2
obs(normal(z3, v_x), 0)
)",
          {{"z1", 2.0}}};
}

ClassSpec hierl() {
  return {"hierl", 0,
          {U(-5, 5), U2(0, 50), U2(0, 10), U2(0, 10), U2(0.5, 10), U2(0.5, 10)},
          R"(m_g := {1}
v_g := {2}
v_t1 := {3}
v_t2 := {4}
v_x1 := {5}
v_x2 := {6}
g ~ normal(m_g, v_g)
t1 ~ normal(g, v_t1)
t2 ~ normal(g, v_t2)
obs(normal(t1, v_x1), 0)
obs(normal(t2, v_x2), 0)
)",
          {}};
}

ClassSpec hierd() {
  return {"hierd", 0,
          {U(-10, 10), U2(0, 100), U2(0, 10), U2(0, 10), U(-5, 5), U2(0, 10), U(-5, 5), U(-5, 5),
           U2(0.5, 10), U2(0.5, 10)},
          R"(m_a0 := {1}
v_a0 := {2}
v_a1 := {3}
v_a2 := {4}
m_b := {5}
v_b := {6}
d1 := {7}
d2 := {8}
v_x1 := {9}
v_x2 := {10}
a0 ~ normal(m_a0, v_a0)
a1 ~ normal(a0, v_a1)
a2 ~ normal(a0, v_a2)
b ~ normal(m_b, v_b)
t1 := b * d1
t2 := a1 + t1
obs(normal(t2, v_x1), 0)
t3 := b * d2
t4 := a2 + t3
obs(normal(t4, v_x2), 0)
)",
          {{"a0", 2.0}, {"a1", 2.0}, {"a2", 2.0}, {"b", 2.0}}};
}

ClassSpec cluster() {
  std::string text = R"(m_g1 := {1}
v_g1 := {2}
m_g2 := {3}
v_g2 := {4}
v_x := {5}
g1 ~ normal(m_g1, v_g1)
g2 ~ normal(m_g2, v_g2)
zero := 0
hund := 100
)";
  for (int k = 1; k <= 5; ++k) {
    const std::string t = "t" + std::to_string(k), m = "m" + std::to_string(k);
    text += t + " ~ normal(zero, hund)\n";
    text += m + " := if (" + t + " > zero) g1 else g2\n";
    text += "obs(normal(" + m + ", v_x), 0)\n";
  }
  return {"cluster", 0, {U(-15, 15), U2(0.5, 50), U(-15, 15), U2(0.5, 50), U2(0.5, 10)}, text, {}};
}

ClassSpec milky(bool many) {
  const std::string o = many ? "[0, 0, 0, 0, 0]" : "0";
  return {many ? "milkyo" : "milky", 0,
          {U(-10, 10), U2(0, 30), U(-2, 2), U2(0, 10), U(-5, 5), U2(0, 10), U2(0.5, 10),
           U2(0.5, 10)},
          R"(m_mass := {1}
v_mass := {2}
c1 := {3}
v_g1 := {4}
c2 := {5}
v_g2 := {6}
v_x1 := {7}
v_x2 := {8}
mass ~ normal(m_mass, v_mass)
mass1 := mass * c1
g1 ~ normal(mass1, v_g1)
mass2 := mass + c2
g2 ~ normal(mass2, v_g2)
obs(normal(g1, v_x1), )" + o + R"()
obs(normal(g2, v_x2), )" + o + R"()
)",
          {}};
}

ClassSpec rb() {
  return {"rb", 0,
          {U(-8, 8), U2(0, 5), U(-8, 8), U2(0, 5), U2(0.5, 10)},
          R"(m_z1 := {1}
v_z1 := {2}
m_z2 := {3}
v_z2 := {4}
v_x := {5}
z1 ~ normal(m_z1, v_z1)
z2 ~ normal(m_z2, v_z2)
r := rosenbrock(z1, z2)
obs(normal(r, v_x), 0)
)",
          {{"z1", 1.5}, {"z2", 1.5}}};
}

// --- tree-structured classes -----------------------------------------------

// Nodes z0..zK; z0 is the root with a constant prior, node k > 0 has
// parent[k - 1]. Node `det` is `proc(parent)` instead of a sample.
struct Tree {
  std::vector<int> parent;
  std::vector<int> observed;  // parents of x1, x2, ...
  int det = -1;
  std::string proc;
};

struct TreeTheta {
  ThetaSpec mean, root_var, latent_var, obs_var;
};

ClassSpec tree_spec(const std::string& name, int type, const Tree& t, const TreeTheta& th) {
  ClassSpec spec;
  spec.name = name;
  spec.type = type;
  std::ostringstream text;
  int hole = 0;
  auto constant = [&](const std::string& var, ThetaSpec ts) {
    spec.theta.push_back(ts);
    text << var << " := {" << ++hole << "}\n";
  };
  const int nodes = static_cast<int>(t.parent.size()) + 1;
  constant("m_z0", th.mean);
  constant("v_z0", th.root_var);
  for (int k = 1; k < nodes; ++k)
    if (k != t.det) constant("v_z" + std::to_string(k), th.latent_var);
  for (std::size_t j = 0; j < t.observed.size(); ++j)
    constant("v_x" + std::to_string(j + 1), th.obs_var);

  text << "z0 ~ normal(m_z0, v_z0)\n";
  spec.overrides["z0"] = 2.0;
  for (int k = 1; k < nodes; ++k) {
    const std::string z = "z" + std::to_string(k);
    const std::string p = "z" + std::to_string(t.parent[static_cast<std::size_t>(k - 1)]);
    if (k == t.det) {
      text << z << " := " << t.proc << "(" << p << ")\n";
    } else {
      text << z << " ~ normal(" << p << ", v_" << z << ")\n";
      spec.overrides[z] = 2.0;
    }
  }
  for (std::size_t j = 0; j < t.observed.size(); ++j)
    text << "obs(normal(z" << t.observed[j] << ", v_x" << j + 1 << "), 0)\n";
  spec.program_template = text.str();
  return spec;
}

std::vector<ClassSpec> ext1() {
  const std::vector<Tree> graphs = {
      {{0, 1, 2}, {3}, -1, ""},
      {{0, 1, 1}, {2, 3}, -1, ""},
      {{0, 0, 1}, {3, 2}, -1, ""},
      {{0, 0, 0}, {1, 2, 3}, -1, ""},
  };
  const TreeTheta th{U(-5, 5), U2(0, 20), U2(0, 20), U2(0.5, 10)};
  std::vector<ClassSpec> out;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 4; ++j) {
      Tree t = graphs[static_cast<std::size_t>(j - 1)];
      t.det = i;
      t.proc = "nl";
      out.push_back(tree_spec("ext1", ext1_type(i, j), t, th));
    }
  return out;
}

std::vector<ClassSpec> ext2() {
  const std::vector<Tree> graphs = {
      {{0, 0, 0, 1, 1, 2}, {4, 5, 6, 3}, -1, ""},
      {{0, 0, 0, 1, 2, 3}, {4, 5, 6}, -1, ""},
      {{0, 0, 1, 1, 2, 2}, {3, 4, 5, 6}, -1, ""},
      {{0, 0, 0, 0, 1, 2}, {5, 6, 3, 4}, -1, ""},
      {{0, 0, 1, 1, 1, 2}, {3, 4, 5, 6}, -1, ""},
  };
  const TreeTheta th{U(-5, 5), U2(0, 10), U2(0, 10), U2(0, 10)};
  std::vector<ClassSpec> out;
  for (int j = 1; j <= 5; ++j) {
    Tree t = graphs[static_cast<std::size_t>(j - 1)];
    t.det = 2;
    t.proc = "nl";
    out.push_back(tree_spec("ext2", j, t, th));
  }
  return out;
}

std::vector<ClassSpec> mulmod() {
  const std::vector<Tree> graphs = {
      {{0, 1}, {2}, 2, "mm"},
      {{0, 1}, {2}, 1, "mm"},
      {{0, 0}, {1, 2}, 2, "mm"},
  };
  const TreeTheta th{U(-5, 5), U2(0, 20), U2(0, 20), U2(0.5, 10)};
  std::vector<ClassSpec> out;
  for (int j = 1; j <= 3; ++j) out.push_back(tree_spec("mulmod", j, graphs[static_cast<std::size_t>(j - 1)], th));
  return out;
}

double draw_theta(const ThetaSpec& ts, Rng& rng) {
  std::uniform_real_distribution<double> u(ts.lo, ts.hi);
  double x;
  do x = u(rng);
  while (x == ts.lo);  // open interval
  return ts.squared ? x * x : x;
}

}  // namespace

std::string ClassSpec::label() const { return type == 0 ? name : name + "/" + std::to_string(type); }

std::vector<std::string> class_names() {
  return {"gauss", "hierl", "hierd", "cluster", "milky", "milkyo", "rb", "ext1", "ext2", "mulmod"};
}

std::vector<ClassSpec> class_specs(const std::string& name) {
  if (name == "gauss") return {gauss()};
  if (name == "hierl") return {hierl()};
  if (name == "hierd") return {hierd()};
  if (name == "cluster") return {cluster()};
  if (name == "milky") return {milky(false)};
  if (name == "milkyo") return {milky(true)};
  if (name == "rb") return {rb()};
  if (name == "ext1") return ext1();
  if (name == "ext2") return ext2();
  if (name == "mulmod") return mulmod();
  throw Error("unknown program class '" + name + "'");
}

ClassSpec class_spec(const std::string& name, int type) {
  auto specs = class_specs(name);
  if (specs.size() == 1 && (type == 0 || type == 1)) return specs.front();
  for (auto& s : specs)
    if (s.type == type) return s;
  throw Error("class '" + name + "' has no type " + std::to_string(type));
}

int ext1_type(int position, int graph) {
  if (position < 1 || position > 3 || graph < 1 || graph > 4) throw Error("no such ext1 type");
  return (position - 1) * 4 + graph;
}

ClassSpec class_spec_from_json(const nlohmann::json& j) {
  ClassSpec s;
  s.name = j.at("name");
  s.type = j.value("type", 0);
  for (const auto& t : j.at("theta")) s.theta.push_back({t.at(0), t.at(1), t.size() > 2 && t.at(2).get<bool>()});
  s.program_template = j.at("template");
  if (j.contains("overrides"))
    for (const auto& [k, v] : j.at("overrides").items()) s.overrides[k] = v.get<double>();
  return s;
}

nlohmann::json to_json(const ClassSpec& s) {
  nlohmann::json theta = nlohmann::json::array();
  for (const auto& t : s.theta) theta.push_back({t.lo, t.hi, t.squared});
  return {{"name", s.name},
          {"type", s.type},
          {"theta", theta},
          {"template", s.program_template},
          {"overrides", s.overrides}};
}

std::string instantiate(const ClassSpec& spec, const std::vector<double>& theta) {
  const std::string& t = spec.program_template;
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '{') {
      out += t[i];
      continue;
    }
    const auto close = t.find('}', i);
    if (close == std::string::npos) throw Error("unterminated hole in template");
    const int k = std::stoi(t.substr(i + 1, close - i - 1));
    if (k < 1 || static_cast<std::size_t>(k) > theta.size()) throw Error("template hole out of range");
    out += format_real(theta[static_cast<std::size_t>(k - 1)]);
    i = close;
  }
  return out;
}

GeneratedProgram generate(const ClassSpec& spec, std::uint64_t seed) {
  Rng rng = derive_rng(seed, {stage::generate});
  GeneratedProgram g;
  g.class_label = spec.label();
  g.type = spec.type;
  g.seed = seed;
  for (const auto& ts : spec.theta) g.theta.push_back(draw_theta(ts, rng));

  Program raw = parse(instantiate(spec, g.theta));
  ClippedUniformOverrides overrides;
  for (const auto& [name, k] : spec.overrides) {
    bool found = false;
    for (std::uint32_t v = 0; v < raw.var_names.size(); ++v)
      if (raw.var_names[v] == name) overrides[v] = k, found = true;
    if (!found) throw Error("override names unknown variable '" + name + "'");
  }
  Simulation sim = simulate(raw, rng, overrides);
  g.latents = sim.latents;
  g.program = canonicalise(with_observations(std::move(raw), sim.observations));
  return g;
}

GeneratedCorpus generate_corpus(const std::vector<ClassSpec>& train_types,
                                const std::vector<ClassSpec>& test_types, std::size_t train_count,
                                std::size_t test_count, std::uint64_t seed, bool disjoint_types) {
  if ((train_count && train_types.empty()) || (test_count && test_types.empty()))
    throw Error("no program types to draw from");
  if (disjoint_types)
    for (const auto& a : train_types)
      for (const auto& b : test_types)
        if (a.label() == b.label()) throw Error("type " + a.label() + " is in both splits");

  GeneratedCorpus corpus;
  std::set<std::string> seen;
  auto fill = [&](const std::vector<ClassSpec>& types, std::size_t count, std::uint64_t split,
                  std::vector<GeneratedProgram>& out) {
    std::uint64_t attempt = 0;
    while (out.size() < count) {
      const ClassSpec& spec = types[out.size() % types.size()];
      const std::uint64_t s = derive_rng(seed, {stage::split, split, attempt++})();
      GeneratedProgram g = generate(spec, s);
      if (seen.insert(print(g.program)).second) out.push_back(std::move(g));
    }
  };
  fill(train_types, train_count, 0, corpus.train);
  fill(test_types, test_count, 1, corpus.test);
  return corpus;
}

}  // namespace wbi
