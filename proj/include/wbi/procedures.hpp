#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace wbi {

/// A pure real function of one or two arguments together with its partial
/// derivatives. For unary procedures the second argument is ignored and its
/// partial is zero.
struct Procedure {
  std::string name;
  int arity = 2;
  std::function<double(double, double)> fn;
  std::function<std::array<double, 2>(double, double)> grad;
};

/// Registry of the deterministic procedures a program may call.
///
/// `builtin()` holds add, mul, rosenbrock, nl and mm. Further procedures can be
/// added to a copy through `add()`.
class ProcedureRegistry {
 public:
  static const ProcedureRegistry& builtin();

  /// Registers `proc`. Throws wbi::Error if the name is already taken or the
  /// arity is not 1 or 2.
  void add(Procedure proc);

  const Procedure* find(const std::string& name) const;
  const Procedure& at(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }

  /// Procedure names in lexicographic order.
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Procedure> procs_;
};

namespace procs {
double rosenbrock(double z1, double z2);
double nl(double x);
double mm(double x);
}  // namespace procs

}  // namespace wbi
