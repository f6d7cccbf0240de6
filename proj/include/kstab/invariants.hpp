#pragma once

#include "kstab/io.hpp"
#include "kstab/pl.hpp"

#include <string>

namespace kstab {

enum class Provenance { boundary_formula, mixed_volume, both_agree };
const char* provenance_name(Provenance p);

struct InvariantReport {
  Rational df;
  Rational minimum_norm;
  Rational slope_mu;
  Rational am_top;  // [Omega]^{n+1} relative to the product with the same shift
  Rational c_n;
  Normalization normalization_note = Normalization::raw;
  Provenance df_provenance = Provenance::boundary_formula;
  Provenance minimum_norm_provenance = Provenance::mixed_volume;
  Provenance am_top_provenance = Provenance::mixed_volume;
  Provenance slope_mu_provenance = Provenance::boundary_formula;
};

Rational slope_mu(const Polytope& P);

// boundary functional  int_dP g dsigma - a int_P g dmu,  a = Vol_sigma(dP)/Vol(P)
Rational boundary_functional(const Polytope& P, const std::vector<AffineFn>& g);
// intersection-theoretic evaluation on Q (top facets measured with t-coefficient 1)
Rational df_cayley(const ToricTestConfig& cfg);
// ratio of the Q evaluation to the boundary functional on the reference cube
// configuration; cached per dimension
Rational calibration_constant(int n);

Rational donaldson_futaki(const ToricTestConfig& cfg);
// both pathways; provenance both_agree iff identical
Rational donaldson_futaki(const ToricTestConfig& cfg, Provenance& prov);

Rational minimum_norm(const ToricTestConfig& cfg);
Rational minimum_norm(const ToricTestConfig& cfg, Provenance& prov);
Rational am_top(const ToricTestConfig& cfg, Provenance& prov);

Rational chow_weight(const ToricTestConfig& cfg, const RVec& v);

struct TwistedWeights {
  Rational gamma;
  Rational j_weight;
  Rational twisted_df;
};
TwistedWeights twisted_weights(const ToricTestConfig& cfg, const Polytope& P_alpha);

struct BlowupSeries {
  RVec epsilons;
  RVec df;            // DF of the chopped configuration at each epsilon
  RVec poly;          // monomial coefficients of DF(eps) Vol(P_eps)/Vol(P)
  Rational coefficient;  // eps^{n-1} coefficient of DF(eps) - DF(0)
  Rational predicted;    // -n(n-1) Ch_v
  Rational chow;
  bool match = false;
};
// needs at least 2n distinct positive epsilons
BlowupSeries blowup_expansion(const ToricTestConfig& cfg, const RVec& v, const RVec& epsilons);

InvariantReport invariant_report(const ToricTestConfig& cfg);
json report_json(const InvariantReport& r);
json blowup_json(const BlowupSeries& s);
json twisted_json(const TwistedWeights& t);

}  // namespace kstab
