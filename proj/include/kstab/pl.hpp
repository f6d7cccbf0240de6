#pragma once

#include "kstab/polytope.hpp"

#include <optional>
#include <string>

namespace kstab {

// value = max over pieces; convex, rational
struct PLConvexFn {
  std::vector<AffineFn> pieces;
  Polytope domain;

  Rational operator()(const RVec& x) const;
  double eval(const double* x) const;
  Rational min_value() const;
  Rational max_value() const;
  Rational average() const;
  int dim() const { return domain.dim; }
};

enum class Normalization { raw, min_zero, average_zero };
const char* norm_name(Normalization n);

// f = shift - g is the height function of the Cayley polytope Q
struct ToricTestConfig {
  Polytope base;
  PLConvexFn g;
  Rational shift;
  Polytope cayley;
  bool trivial = false;
  Normalization norm = Normalization::raw;
};

// irredundant pieces only: throws NotConvex otherwise
PLConvexFn make_pl(const Polytope& P, std::vector<AffineFn> pieces);
// drops pieces that never attain the max on a full-dimensional region
PLConvexFn make_pl_pruned(const Polytope& P, std::vector<AffineFn> pieces);

ToricTestConfig make_config(const Polytope& P, const PLConvexFn& g,
                            std::optional<Rational> shift = std::nullopt);
ToricTestConfig normalize(const ToricTestConfig& cfg, Normalization mode);
// g -> g + c with the shift moved along, so Q is translated vertically
ToricTestConfig add_constant(const ToricTestConfig& cfg, const Rational& c);
// g -> d g, auto shift, same normalization mode
ToricTestConfig scale_config(const ToricTestConfig& cfg, const Rational& d);

// full-dimensional region where piece i is the max, if any
std::optional<Polytope> linearity_region(const Polytope& P, const std::vector<AffineFn>& pieces,
                                         size_t i);

// log-sum-exp smoothing (1/beta) log sum exp(beta * piece)
double smooth_eval(const PLConvexFn& g, const double* x, double beta);
// value, gradient and Hessian of the smoothing at x
void smooth_eval_d2(const PLConvexFn& g, const double* x, double beta, double& val,
                    double* grad, double* hess);

}  // namespace kstab
