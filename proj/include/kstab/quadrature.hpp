#pragma once

#include "kstab/polytope.hpp"

#include <vector>

namespace kstab {

// Gauss-Legendre rule on [0, 1]
struct Rule1D {
  std::vector<double> x, w;
};
const Rule1D& gauss_legendre(int q);

// flat list of nodes (dim doubles each) with weights summing to the volume covered
struct Grid {
  int dim = 0;
  std::vector<double> pts;
  std::vector<double> wts;
  size_t size() const { return wts.size(); }
  const double* point(size_t i) const { return pts.data() + i * dim; }
};

using DSimplex = std::vector<std::vector<double>>;  // dim + 1 vertices

// collapsed-coordinate (Duffy) tensor rule on each simplex
void add_simplex_nodes(Grid& g, const DSimplex& s, int q);

Grid polytope_grid(const Polytope& P, int q);

}  // namespace kstab
