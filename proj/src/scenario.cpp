#include "kstab/scenario.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace kstab {

namespace {

[[noreturn]] void invalid(const std::string& m) { throw Error(Err::ValidationError, m); }

std::string num(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

std::string short_num(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

int vertex_index(const Polytope& P, const RVec& v) {
  for (size_t i = 0; i < P.vertices.size(); ++i)
    if (P.vertices[i] == v) return (int)i;
  return -1;
}

RVec checked_vertex(const Polytope& P, const json& j, const std::string& where) {
  RVec v = rvec_from(j);
  if ((int)v.size() != P.dim) invalid(where + ": vertex has the wrong dimension");
  if (vertex_index(P, v) < 0) invalid(where + ": " + j.dump() + " is not a vertex of the polytope");
  return v;
}

std::optional<TheoremKind> kind_from(const std::string& s) {
  for (auto k : {TheoremKind::AM, TheoremKind::DF, TheoremKind::MINNORM, TheoremKind::JALPHA, TheoremKind::POINT})
    if (s == theorem_name(k)) return k;
  return std::nullopt;
}

// "POINT" alone expands to every vertex
std::vector<Theorem> theorems_from(const Scenario& sc, const json& arr) {
  if (!arr.is_array() || arr.empty()) invalid("slopes: \"theorems\" must be a nonempty array");
  std::vector<Theorem> out;
  for (auto& t : arr) {
    std::string name = t.is_string() ? t.get<std::string>() : t.at("kind").get<std::string>();
    auto k = kind_from(name);
    if (!k) invalid("slopes: unknown theorem '" + name + "'");
    Theorem th;
    th.kind = *k;
    if (*k == TheoremKind::JALPHA) {
      if (!sc.alpha) invalid("slopes: JALPHA needs a scenario \"alpha\" polytope");
      th.alpha = sc.alpha;
    }
    if (*k == TheoremKind::POINT) {
      if (t.is_object() && t.contains("vertex")) {
        th.vertex = checked_vertex(sc.cfg.base, t["vertex"], "slopes");
      } else {
        for (auto& v : sc.cfg.base.vertices) {
          th.vertex = v;
          out.push_back(th);
        }
        continue;
      }
    }
    out.push_back(th);
  }
  return out;
}

void check_schedule(const json& s) {
  if (!s.is_object()) invalid("\"schedule\" must be an object");
  if (s.contains("taus")) {
    auto t = s["taus"].get<std::vector<double>>();
    for (size_t i = 0; i < t.size(); ++i) {
      if (!(t[i] >= 0)) invalid("schedule: taus must be nonnegative");
      if (i && !(t[i] > t[i - 1])) throw Error(Err::NonMonotoneTau, "schedule: taus must be strictly increasing");
    }
  }
  if (s.contains("beta0") && !(s["beta0"].get<double>() > 0)) invalid("schedule: beta0 must be positive");
  if (s.contains("tol") && !(s["tol"].get<double>() > 0)) invalid("schedule: tol must be positive");
  if (s.contains("quad_order") && s["quad_order"].get<int>() < 1) invalid("schedule: quad_order must be >= 1");
}

Schedule schedule_from(const json& params, const RunOptions& opt) {
  Schedule sch;
  if (params.contains("schedule")) {
    const json& s = params["schedule"];
    if (s.contains("taus")) sch.taus = s["taus"].get<std::vector<double>>();
    if (s.contains("beta0")) sch.beta0 = s["beta0"].get<double>();
    if (s.contains("tol")) sch.tol = s["tol"].get<double>();
    if (s.contains("quad_order")) sch.box.quad_order = s["quad_order"].get<int>();
    if (s.contains("max_nodes")) sch.box.max_nodes = s["max_nodes"].get<size_t>();
    if (s.contains("point_radius")) sch.point_radius = s["point_radius"].get<double>();
  }
  if (opt.quad_order) sch.box.quad_order = *opt.quad_order;
  if (opt.tau_max) {
    double T = *opt.tau_max;
    std::erase_if(sch.taus, [&](double t) { return t > T; });
    if (sch.taus.empty() || sch.taus.back() < T) sch.taus.push_back(T);
  }
  return sch;
}

void validate_task(const Scenario& sc, const TaskSpec& t) {
  const json& p = t.params;
  if (p.contains("schedule")) check_schedule(p["schedule"]);
  if (t.type == "invariants") return;
  if (t.type == "slopes") {
    if (!p.contains("theorems")) invalid("slopes: missing \"theorems\"");
    theorems_from(sc, p["theorems"]);
    return;
  }
  if (t.type == "blowup") {
    if (!p.contains("vertex")) invalid("blowup: missing \"vertex\"");
    checked_vertex(sc.cfg.base, p["vertex"], "blowup");
    if (p.contains("epsilons")) {
      RVec e = rvec_from(p["epsilons"]);
      for (auto& x : e)
        if (x <= 0) invalid("blowup: epsilons must be positive");
      if ((int)e.size() < 2 * sc.cfg.base.dim) invalid("blowup: need at least 2n epsilons");
    }
    return;
  }
  if (t.type == "scan") {
    if (p.contains("points"))
      for (auto& q : p["points"])
        if ((int)q.get<std::vector<double>>().size() != sc.cfg.base.dim) invalid("scan: point dimension");
    if (p.contains("random_points") && p["random_points"].get<int>() < 0) invalid("scan: random_points < 0");
    return;
  }
  if (t.type == "l1") return;
  throw Error(Err::ParseError, "unknown task type '" + t.type + "'");
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(Err::IoError, "cannot open " + p.string() + " for writing");
  f << s;
  f.close();
  if (!f) throw Error(Err::IoError, "write failed for " + p.string());
}

std::string verdict_csv(const Verdict& v) {
  std::string s = "tau,value,rate,err_estimate\n";
  for (auto& t : v.trace) s += num(t.tau) + "," + num(t.value) + "," + num(t.rate) + "," + num(t.err) + "\n";
  return s;
}

bool sandwich(const std::vector<PathPoint>& st) {
  for (auto& p : st) {
    double n = p.dim, d = p.i_val - p.j_val;
    if (p.j_val < -1e-9 || p.i_val < -1e-9 || d < p.j_val / n - 1e-9 || d > n * p.j_val + 1e-9) return false;
  }
  return true;
}

std::string timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char b[32];
  std::strftime(b, sizeof b, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return b;
}

std::vector<std::vector<double>> random_interior(const Polytope& P, int count, uint64_t seed) {
  std::vector<double> lo(P.dim, 1e300), hi(P.dim, -1e300);
  for (auto& v : P.vertices)
    for (int k = 0; k < P.dim; ++k) {
      double x = to_double(v[k]);
      lo[k] = std::min(lo[k], x);
      hi[k] = std::max(hi[k], x);
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<std::vector<double>> out;
  for (int tries = 0; (int)out.size() < count && tries < 1000 * count; ++tries) {
    std::vector<double> x(P.dim);
    for (int k = 0; k < P.dim; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * U(rng);
    bool inside = true;
    for (auto& h : P.halfspaces) {
      double s = to_double(h.offset);  // slack of <n, x> <= offset
      for (int k = 0; k < P.dim; ++k) s -= to_double(h.normal[k]) * x[k];
      // keep away from facets where the Legendre map blows up
      if (s < 1e-3) inside = false;
    }
    if (inside) out.push_back(x);
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '&') o += "&amp;";
    else if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '"') o += "&quot;";
    else o += c;
  }
  return o;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Err::ParseError, "byte " + std::to_string(e.byte) + ": " + e.what());
  }
  Scenario sc;
  try {
    if (!j.is_object()) throw Error(Err::ParseError, "scenario must be a JSON object");
    if (!j.contains("name") || !j["name"].is_string()) throw Error(Err::ParseError, "scenario needs a string \"name\"");
    sc.name = j["name"].get<std::string>();
    sc.cfg = config_from_json(j);
    // invariants need a normalized g; min_zero unless the scenario says otherwise
    if (!j.contains("normalization")) sc.cfg = normalize(sc.cfg, Normalization::min_zero);
    if (j.contains("alpha") && !j["alpha"].is_null()) sc.alpha = polytope_from_json(j["alpha"]);
    if (sc.alpha && sc.alpha->dim != sc.cfg.base.dim) invalid("alpha polytope dimension differs");
    if (j.contains("output_dir")) sc.output_dir = j["output_dir"].get<std::string>();
    if (!j.contains("tasks") || !j["tasks"].is_array()) throw Error(Err::ParseError, "scenario needs a \"tasks\" array");
    if (j["tasks"].empty()) invalid("task list is empty");
    for (auto& t : j["tasks"]) {
      TaskSpec ts;
      if (t.is_string()) {
        ts.type = t.get<std::string>();
        ts.params = json::object();
      } else {
        ts.type = t.at("type").get<std::string>();
        ts.params = t;
      }
      if (ts.type == "stoppa") ts.type = "blowup";  // schema alias
      sc.tasks.push_back(ts);
    }
    for (auto& t : sc.tasks) validate_task(sc, t);
  } catch (const json::exception& e) {
    throw Error(Err::ParseError, std::string("schema: ") + e.what());
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Err::IoError, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

std::string slope_svg(const Verdict& v, const std::string& title) {
  const double W = 640, H = 400, L = 80, Rm = 20, T = 40, B = 50;
  double ex = to_double(v.exact);
  double x0 = 0, x1 = 1, y0 = ex, y1 = ex;
  if (!v.trace.empty()) {
    x0 = v.trace.front().tau;
    x1 = v.trace.back().tau;
  }
  if (x1 <= x0) x1 = x0 + 1;
  for (auto& t : v.trace) {
    y0 = std::min(y0, t.rate);
    y1 = std::max(y1, t.rate);
  }
  double span = y1 - y0, pad = span > 0 ? 0.08 * span : 1e-3 * (1 + std::abs(ex));
  y0 -= pad;
  y1 += pad;
  auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - Rm); };
  auto Y = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto f = [](double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", x);
    return std::string(b);
  };
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) + "</text>\n";
  s += "<line x1=\"" + f(L) + "\" y1=\"" + f(H - B) + "\" x2=\"" + f(W - Rm) + "\" y2=\"" + f(H - B) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f(L) + "\" y1=\"" + f(T) + "\" x2=\"" + f(L) + "\" y2=\"" + f(H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    s += "<text x=\"" + f(X(xv)) + "\" y=\"" + f(H - B + 18) + "\" text-anchor=\"middle\">" + short_num(xv) +
         "</text>\n";
    s += "<text x=\"" + f(L - 6) + "\" y=\"" + f(Y(yv) + 4) + "\" text-anchor=\"end\">" + short_num(yv) +
         "</text>\n";
    s += "<line x1=\"" + f(L - 3) + "\" y1=\"" + f(Y(yv)) + "\" x2=\"" + f(L) + "\" y2=\"" + f(Y(yv)) +
         "\" stroke=\"black\"/>\n";
  }
  s += "<text x=\"" + f((L + W - Rm) / 2) + "\" y=\"" + f(H - 12) + "\" text-anchor=\"middle\">tau</text>\n";
  s += "<text x=\"16\" y=\"" + f((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       f((T + H - B) / 2) + ")\">d/dtau " + xml_escape(v.theorem) + "</text>\n";
  s += "<line x1=\"" + f(L) + "\" y1=\"" + f(Y(ex)) + "\" x2=\"" + f(W - Rm) + "\" y2=\"" + f(Y(ex)) +
       "\" stroke=\"firebrick\" stroke-dasharray=\"6 4\"/>\n";
  s += "<text x=\"" + f(W - Rm - 4) + "\" y=\"" + f(Y(ex) - 6) + "\" text-anchor=\"end\" fill=\"firebrick\">exact " +
       to_string(v.exact) + "</text>\n";
  if (!v.trace.empty()) {
    s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < v.trace.size(); ++i)
      s += (i ? " " : "") + f(X(v.trace[i].tau)) + "," + f(Y(v.trace[i].rate));
    s += "\"/>\n";
    for (auto& t : v.trace)
      s += "<circle cx=\"" + f(X(t.tau)) + "\" cy=\"" + f(Y(t.rate)) + "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

RunResult run_scenario(const Scenario& sc, const RunOptions& opt) {
  RunResult res;
  res.out_dir = opt.out ? *opt.out : !sc.output_dir.empty() ? sc.output_dir : "kstab-out/" + sc.name;
  fs::path root(res.out_dir);
  std::error_code ec;
  fs::create_directories(root / "traces", ec);
  if (!ec) fs::create_directories(root / "plots", ec);
  if (ec) throw Error(Err::IoError, "cannot create " + res.out_dir + ": " + ec.message());

  auto emit = [&](const std::string& rel, const std::string& body) {
    write_file(root / rel, body);
    res.files.push_back(rel);
    return rel;
  };

  json report;
  report["schema_version"] = 1;
  report["tool"] = "kstab";
  report["scenario"] = sc.name;
  report["timestamp"] = timestamp();
  report["seed"] = opt.seed;
  json ov = json::object();
  if (opt.tau_max) ov["tau_max"] = *opt.tau_max;
  if (opt.quad_order) ov["quad_order"] = *opt.quad_order;
  report["overrides"] = ov;
  report["config"] = config_to_json(sc.cfg);
  if (sc.alpha) report["alpha"] = polytope_to_json(*sc.alpha);
  json tasks = json::array();

  for (size_t k = 0; k < sc.tasks.size(); ++k) {
    const TaskSpec& t = sc.tasks[k];
    const json& p = t.params;
    char pre[16];
    std::snprintf(pre, sizeof pre, "%02zu_", k);
    json out;
    out["type"] = t.type;
    if (t.type == "invariants") {
      out["report"] = report_json(invariant_report(sc.cfg));
      if (sc.alpha) out["twisted"] = twisted_json(twisted_weights(sc.cfg, *sc.alpha));
    } else if (t.type == "slopes") {
      Schedule sch = schedule_from(p, opt);
      auto ths = theorems_from(sc, p["theorems"]);
      auto vs = verify_theorems(sc.cfg, ths, sch);
      json arr = json::array();
      bool ok = true;
      for (size_t i = 0; i < vs.size(); ++i) {
        const Verdict& v = vs[i];
        json vj = verdict_json(v);
        std::string stem = pre + v.theorem;
        if (v.kind == TheoremKind::POINT) {
          vj["vertex"] = rvec_json(ths[i].vertex);
          stem += "_v" + std::to_string(vertex_index(sc.cfg.base, ths[i].vertex));
        }
        if (!v.states.empty()) vj["sandwich"] = sandwich(v.states);
        vj["csv"] = emit("traces/" + stem + ".csv", verdict_csv(v));
        vj["svg"] = emit("plots/" + stem + ".svg", slope_svg(v, sc.name + ": " + v.theorem + " slope"));
        ok = ok && v.pass;
        arr.push_back(vj);
      }
      out["schedule"] = {{"taus", sch.taus}, {"beta0", sch.beta0}, {"quad_order", sch.box.quad_order}};
      out["verdicts"] = arr;
      out["pass"] = ok;
      res.all_pass = res.all_pass && ok;
    } else if (t.type == "blowup") {
      RVec v = rvec_from(p["vertex"]);
      RVec eps = p.contains("epsilons") ? rvec_from(p["epsilons"])
                                        : RVec{Rational(1, 100), Rational(1, 50), Rational(1, 25), Rational(1, 10)};
      auto bs = blowup_expansion(sc.cfg, v, eps);
      out["vertex"] = rvec_json(v);
      out["series"] = blowup_json(bs);
      out["pass"] = bs.match;
      res.all_pass = res.all_pass && bs.match;
    } else if (t.type == "scan") {
      auto vr = scan_vertices(sc.cfg);
      Rational mn = minimum_norm(sc.cfg);
      bool consistent = vr.destabilizing == (mn > 0);
      out["vertices"] = destabilizer_json(vr);
      out["minimum_norm"] = rational_json(mn);
      out["consistent"] = consistent;
      std::vector<std::vector<double>> pts;
      if (p.contains("points")) pts = p["points"].get<std::vector<std::vector<double>>>();
      int nr = p.value("random_points", 0);
      auto rp = random_interior(sc.cfg.base, nr, opt.seed);
      pts.insert(pts.end(), rp.begin(), rp.end());
      if (!pts.empty()) out["points"] = destabilizer_json(scan_points(sc.cfg, pts, schedule_from(p, opt)));
      out["pass"] = consistent;
      res.all_pass = res.all_pass && consistent;
    } else if (t.type == "l1") {
      Schedule sch = schedule_from(p, opt);
      ToricTestConfig c = normalize(sc.cfg, Normalization::average_zero);
      auto pts = schedule_paths(c, std::nullopt, sch);
      auto l1 = l1_norm_path(c, pts);
      Rational ex = l1_exact(c);
      double tol = sch.tol ? *sch.tol : 1e-2;
      bool ok = std::abs(l1.limit - to_double(ex)) <= tol * (1 + std::abs(to_double(ex)));
      out["exact"] = rational_json(ex);
      out["decimal"] = to_double(ex);
      out["limit"] = l1.limit;
      out["length"] = l1.length;
      out["tol"] = tol;
      out["pass"] = ok;
      std::string csv = "tau,l1_density,length,err_estimate\n";
      for (auto& q : pts) csv += num(q.tau) + "," + num(q.l1_density) + "," + num(q.length) + "," + num(q.err) + "\n";
      out["csv"] = emit(std::string("traces/") + pre + "l1.csv", csv);
      std::ostringstream fc;
      write_trace_csv(fc, pts);
      out["functionals_csv"] = emit(std::string("traces/") + pre + "functionals.csv", fc.str());
      res.all_pass = res.all_pass && ok;
    }
    tasks.push_back(out);
  }
  report["tasks"] = tasks;
  report["status"] = res.all_pass ? "pass" : "fail";
  write_file(root / "report.json", report.dump(2) + "\n");
  res.files.push_back("report.json");
  res.report = std::move(report);
  return res;
}

}  // namespace kstab
