#include "wbi/procedures.hpp"

#include <cmath>
#include <numbers>

#include "wbi/error.hpp"

namespace wbi {

namespace procs {

double rosenbrock(double z1, double z2) {
  const double a = z1 - 1.0;
  const double b = z2 - z1 * z1;
  return 0.05 * a * a + 0.005 * b * b;
}

double nl(double x) { return 50.0 / std::numbers::pi * std::atan(x / 10.0); }

double mm(double x) {
  const double x3 = x * x * x;
  return 100.0 * x3 / (10.0 + x3 * x);
}

}  // namespace procs

namespace {

ProcedureRegistry make_builtin() {
  ProcedureRegistry reg;
  reg.add({"add", 2, [](double a, double b) { return a + b; },
           [](double, double) { return std::array<double, 2>{1.0, 1.0}; }});
  reg.add({"mul", 2, [](double a, double b) { return a * b; },
           [](double a, double b) { return std::array<double, 2>{b, a}; }});
  reg.add({"rosenbrock", 2, procs::rosenbrock, [](double z1, double z2) {
             const double b = z2 - z1 * z1;
             return std::array<double, 2>{0.1 * (z1 - 1.0) - 0.02 * z1 * b, 0.01 * b};
           }});
  reg.add({"nl", 1, [](double x, double) { return procs::nl(x); },
           [](double x, double) {
             // d/dx 50/pi * atan(x/10) = 5/pi / (1 + x^2/100)
             return std::array<double, 2>{5.0 / std::numbers::pi / (1.0 + x * x / 100.0), 0.0};
           }});
  reg.add({"mm", 1, [](double x, double) { return procs::mm(x); },
           [](double x, double) {
             const double x2 = x * x;
             const double d = 10.0 + x2 * x2;
             return std::array<double, 2>{100.0 * x2 * (30.0 - x2 * x2) / (d * d), 0.0};
           }});
  return reg;
}

}  // namespace

const ProcedureRegistry& ProcedureRegistry::builtin() {
  static const ProcedureRegistry reg = make_builtin();
  return reg;
}

void ProcedureRegistry::add(Procedure proc) {
  if (proc.arity != 1 && proc.arity != 2)
    throw Error("procedure '" + proc.name + "' must take one or two arguments");
  if (procs_.contains(proc.name)) throw Error("procedure '" + proc.name + "' already registered");
  auto name = proc.name;
  procs_.emplace(std::move(name), std::move(proc));
}

const Procedure* ProcedureRegistry::find(const std::string& name) const {
  auto it = procs_.find(name);
  return it == procs_.end() ? nullptr : &it->second;
}

const Procedure& ProcedureRegistry::at(const std::string& name) const {
  if (auto* p = find(name)) return *p;
  throw Error("unknown procedure '" + name + "'");
}

std::vector<std::string> ProcedureRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : procs_) out.push_back(name);
  return out;
}

}  // namespace wbi
