#include "kstab/io.hpp"
#include "kstab/errors.hpp"

namespace kstab {

json rational_json(const Rational& r) { return to_string(r); }

Rational rational_from(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  throw Error(Err::ParseError, "expected a rational \"p/q\", got " + j.dump());
}

json rvec_json(const RVec& v) {
  json a = json::array();
  for (auto& r : v) a.push_back(rational_json(r));
  return a;
}

RVec rvec_from(const json& j) {
  if (!j.is_array()) throw Error(Err::ParseError, "expected an array, got " + j.dump());
  RVec v;
  for (auto& e : j) v.push_back(rational_from(e));
  return v;
}

json polytope_to_json(const Polytope& P) {
  json j;
  j["dim"] = P.dim;
  json hs = json::array();
  for (auto& h : P.halfspaces) hs.push_back(json::array({rvec_json(h.normal), rational_json(h.offset)}));
  j["halfspaces"] = hs;
  json vs = json::array();
  for (auto& v : P.vertices) vs.push_back(rvec_json(v));
  j["vertices"] = vs;
  return j;
}

Polytope polytope_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dim")) throw Error(Err::ParseError, "polytope needs \"dim\"");
  int d = j["dim"].get<int>();
  if (d < 1) throw Error(Err::ValidationError, "dim must be positive");
  std::vector<Halfspace> hs;
  std::vector<RVec> vs;
  if (j.contains("halfspaces"))
    for (auto& h : j["halfspaces"]) {
      if (!h.is_array() || h.size() != 2) throw Error(Err::ParseError, "halfspace must be [normal, offset]");
      Halfspace x{rvec_from(h[0]), rational_from(h[1])};
      if ((int)x.normal.size() != d) throw Error(Err::DimensionMismatch, "halfspace normal length");
      hs.push_back(x);
    }
  if (j.contains("vertices"))
    for (auto& v : j["vertices"]) {
      vs.push_back(rvec_from(v));
      if ((int)vs.back().size() != d) throw Error(Err::DimensionMismatch, "vertex length");
    }
  if (hs.empty() && vs.empty()) throw Error(Err::ParseError, "polytope needs halfspaces or vertices");
  if (vs.empty()) return from_halfspaces(d, hs);
  if (hs.empty()) return from_vertices(d, vs);
  return from_both(d, hs, vs);
}

std::vector<AffineFn> pieces_from_json(const json& j, int dim) {
  if (!j.is_array()) throw Error(Err::ParseError, "\"pl\" must be an array of pieces");
  std::vector<AffineFn> out;
  for (auto& p : j) {
    // [[gradient...], constant] or [g1, ..., gn, constant]
    AffineFn f;
    if (p.is_array() && p.size() == 2 && p[0].is_array()) {
      f.gradient = rvec_from(p[0]);
      f.constant = rational_from(p[1]);
    } else {
      RVec all = rvec_from(p);
      if (all.empty()) throw Error(Err::ParseError, "empty piece");
      f.constant = all.back();
      all.pop_back();
      f.gradient = all;
    }
    if ((int)f.gradient.size() != dim) throw Error(Err::DomainMismatch, "piece gradient length");
    out.push_back(f);
  }
  return out;
}

Normalization normalization_from(const std::string& s) {
  if (s == "raw") return Normalization::raw;
  if (s == "min_zero") return Normalization::min_zero;
  if (s == "average_zero") return Normalization::average_zero;
  throw Error(Err::ValidationError, "unknown normalization '" + s + "'");
}

json config_to_json(const ToricTestConfig& cfg) {
  json j;
  j["polytope"] = polytope_to_json(cfg.base);
  json pl = json::array();
  for (auto& p : cfg.g.pieces) pl.push_back(json::array({rvec_json(p.gradient), rational_json(p.constant)}));
  j["pl"] = pl;
  j["shift"] = rational_json(cfg.shift);
  j["normalization"] = norm_name(cfg.norm);
  j["trivial"] = cfg.trivial;
  return j;
}

ToricTestConfig config_from_json(const json& j) {
  if (!j.is_object() || !j.contains("polytope") || !j.contains("pl"))
    throw Error(Err::ParseError, "config needs \"polytope\" and \"pl\"");
  Polytope P = polytope_from_json(j["polytope"]);
  PLConvexFn g = make_pl(P, pieces_from_json(j["pl"], P.dim));
  std::optional<Rational> shift;
  if (j.contains("shift") && !(j["shift"].is_string() && j["shift"] == "auto"))
    shift = rational_from(j["shift"]);
  auto cfg = make_config(P, g, shift);
  if (j.contains("normalization"))
    cfg = normalize(cfg, normalization_from(j["normalization"].get<std::string>()));
  return cfg;
}

}  // namespace kstab
