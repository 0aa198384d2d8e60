#pragma once

// Independent oracles shared by the unit and acceptance tests. Nothing here
// calls the code under test except to read program structure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "wbi/io.hpp"
#include "wbi/progen.hpp"

namespace wbi::test {

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

/// Closed form for z ~ N(m, v), o ~ N(c1 z + c2, vx).
struct GaussConjugate {
  double m, v, c1, c2, vx, o;

  double post_var() const { return 1.0 / (1.0 / v + c1 * c1 / vx); }
  double post_mean() const { return post_var() * (m / v + c1 * (o - c2) / vx); }
  double evidence() const { return normal_pdf(o, c1 * m + c2, c1 * c1 * v + vx); }
};

/// The gauss template substitutes theta as (m, v, c1, c2, vx); the one
/// observation is spliced into the program.
inline GaussConjugate gauss_oracle(const GeneratedProgram& g) {
  return {g.theta[0], g.theta[1], g.theta[2], g.theta[3], g.theta[4], g.program.obs_values.at(0)};
}

/// Mixed relative error: |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at x along coordinate i.
inline double central_diff(const std::function<double(std::vector<double>)>& f,
                           std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline std::string temp_dir(const std::string& tag) {
  std::string base = "/tmp/wbi-test-" + tag;
  std::string cmd = "rm -rf '" + base + "' && mkdir -p '" + base + "'";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("cannot create " + base);
  return base;
}

}  // namespace wbi::test
