#pragma once

#include "kstab/rational.hpp"

#include <vector>

namespace kstab {

// <normal, x> <= offset, normal primitive integer
struct Halfspace {
  RVec normal;
  Rational offset;
};

struct Facet {
  int halfspace = 0;
  std::vector<int> verts;
};

struct Polytope {
  int dim = 0;
  std::vector<Halfspace> halfspaces;  // one per facet, same order as facets
  std::vector<RVec> vertices;          // sorted lexicographically
  std::vector<Facet> facets;
  std::vector<std::vector<int>> vertex_facets;
  bool delzant = false;

  int find_vertex(const RVec& v) const;
  bool contains(const RVec& x) const;
};

struct VolumeData {
  Rational volume;
  Rational boundary_sigma_volume;
  RVec barycenter;
  std::vector<Rational> per_facet_sigma;
};

struct AffineFn {
  RVec gradient;
  Rational constant;

  Rational operator()(const RVec& x) const { return dot(gradient, x) + constant; }
  double eval(const double* x) const;
  bool operator==(const AffineFn& o) const {
    return gradient == o.gradient && constant == o.constant;
  }
};

enum class Region { interior, boundary };

Polytope from_halfspaces(int dim, std::vector<Halfspace> hs);
Polytope from_vertices(int dim, const std::vector<RVec>& pts);
// both representations given: they must agree
Polytope from_both(int dim, std::vector<Halfspace> hs, const std::vector<RVec>& pts);

VolumeData volume_data(const Polytope& P);
Rational volume(const Polytope& P);
// simplices of a pulling triangulation from the lowest vertex, as vertex index lists
std::vector<std::vector<int>> triangulate(const Polytope& P);

// sigma-measure of facet f when the facet is cut out by <normal, x> = const
Rational facet_measure(const Polytope& P, int f, const RVec& normal);

// integral of max(pieces) over P (dmu) or over its boundary (dsigma)
Rational integrate(const Polytope& P, const std::vector<AffineFn>& pieces, Region region);
Rational integrate(const Polytope& P, const AffineFn& fn, Region region);

// bodies given by point sets, possibly lower dimensional; all in dimension d
Rational mixed_volume(const std::vector<std::vector<RVec>>& bodies, int d);
Rational mixed_volume(const std::vector<const Polytope*>& bodies);
// volume of the convex hull of a point set, 0 when not full dimensional
Rational hull_volume(const std::vector<RVec>& pts, int d);

// blow up the torus-fixed point at vertex v: cut at lattice distance eps
Polytope corner_chop(const Polytope& P, const RVec& v, const Rational& eps);

// helpers shared with other modules
Polytope translate(const Polytope& P, const RVec& t);
Polytope dilate(const Polytope& P, const Rational& s);
std::vector<RVec> embed_flat(const std::vector<RVec>& pts);  // x -> (x, 0)

}  // namespace kstab
