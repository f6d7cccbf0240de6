#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <string>
#include <vector>

namespace kstab {

using Rational = boost::multiprecision::mpq_rational;
using Integer = boost::multiprecision::mpz_int;
using RVec = std::vector<Rational>;
using RMat = std::vector<RVec>;

// always "p/q", so integers read "k/1"
std::string to_string(const Rational& r);
Rational parse_rational(const std::string& s);
double to_double(const Rational& r);

Rational dot(const RVec& a, const RVec& b);
RVec add(const RVec& a, const RVec& b);
RVec sub(const RVec& a, const RVec& b);
RVec scale(const RVec& a, const Rational& s);

// scale a rational vector to the primitive integer vector on the same ray
RVec primitive(const RVec& v);
std::vector<double> to_doubles(const RVec& v);

// exact Gaussian elimination helpers
int rank(RMat m);
Rational det(RMat m);
// solves A x = b for square nonsingular A; returns false when singular
bool solve(RMat a, RVec b, RVec& x);
// one nonzero vector of the nullspace of an (n-1) x n matrix of rank n-1
RVec nullvector(const RMat& rows, int n);

// monomial coefficients of the interpolating polynomial through (xs[i], ys[i])
RVec interpolate(const RVec& xs, const RVec& ys);

}  // namespace kstab
