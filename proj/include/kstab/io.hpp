#pragma once

#include "kstab/pl.hpp"

#include <json.hpp>

namespace kstab {

using json = nlohmann::ordered_json;

json rational_json(const Rational& r);
// accepts "p/q" strings or JSON integers
Rational rational_from(const json& j);
json rvec_json(const RVec& v);
RVec rvec_from(const json& j);

json polytope_to_json(const Polytope& P);
// either or both of "halfspaces", "vertices" may be given
Polytope polytope_from_json(const json& j);

json config_to_json(const ToricTestConfig& cfg);
// "shift" may be "auto" or absent
ToricTestConfig config_from_json(const json& j);
std::vector<AffineFn> pieces_from_json(const json& j, int dim);

Normalization normalization_from(const std::string& s);

}  // namespace kstab
