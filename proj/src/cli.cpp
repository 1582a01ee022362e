#include "covindex/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "covindex/cover.hpp"
#include "covindex/derive.hpp"
#include "covindex/error.hpp"
#include "covindex/inradius.hpp"
#include "covindex/parallel.hpp"
#include "covindex/study.hpp"

namespace covindex {

namespace {

using json = nlohmann::json;

json cover_params() {
  return {{"strategy", "cylinders"}, {"n", 2},          {"alpha", 0.5},
          {"beta", 1.0},             {"split", "alternating"}, {"complexity", 1},
          {"family", "coordinate"},  {"cover_file", ""}};
}

json derive_params() {
  return {{"w", 4}, {"delta", 0.05}, {"budget", 8}, {"cap", 64}, {"samples", 1000}};
}

json merged(json a, const json& b) {
  a.update(b);
  return a;
}

json all_strategies() { return json::array({"cylinders", "residue", "two-piece", "slabs"}); }

json range_list(std::size_t lo, std::size_t hi) {
  json a = json::array();
  for (std::size_t i = lo; i <= hi; ++i) a.push_back(i);
  return a;
}

[[noreturn]] void config_fail(const std::string& what) { throw ConfigError(what); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_fail("cannot read file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    config_fail("invalid JSON in " + path + ": " + e.what());
  }
}

bool command_needs_space(const std::string& command) { return command != "problem46"; }

// Type check of a parameter value against its default.
void check_param_type(const std::string& key, const json& def, const json& value) {
  auto fail_type = [&](const std::string& expect) {
    config_fail("parameter '" + key + "' must be " + expect);
  };
  if (def.is_null() || def.is_number_float()) {
    if (!(value.is_number() || (def.is_null() && value.is_null()))) fail_type("a number");
  } else if (def.is_number_integer()) {
    if (!value.is_number_integer()) fail_type("an integer");
    if (def.get<long long>() >= 0 && value.get<long long>() < 0) fail_type("a non-negative integer");
  } else if (def.is_string()) {
    if (!value.is_string()) fail_type("a string");
  } else if (def.is_boolean()) {
    if (!value.is_boolean()) fail_type("a boolean");
  } else if (def.is_array()) {
    if (!value.is_array()) fail_type("a list");
    json elem = def.empty() ? json(0.0) : def.front();
    for (const json& v : value) check_param_type(key, elem, v);
  }
}

std::uint64_t parse_unsigned(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) config_fail("parameter '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) config_fail("parameter '" + key + "' expects a number, got '" + s + "'");
  return v;
}

// Converts a flag string into JSON shaped like the default value. Integer
// lists also accept "a..b".
json parse_flag(const std::string& key, const json& def, const std::string& text) {
  if (def.is_array()) {
    json elem = def.empty() ? json(0.0) : def.front();
    json out = json::array();
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto dots = item.find("..");
      if (elem.is_number_integer() && dots != std::string::npos) {
        std::uint64_t lo = parse_unsigned(item.substr(0, dots), key);
        std::uint64_t hi = parse_unsigned(item.substr(dots + 2), key);
        if (hi < lo || hi - lo > 100000) config_fail("parameter '" + key + "' has a bad range: " + item);
        for (std::uint64_t i = lo; i <= hi; ++i) out.push_back(i);
      } else {
        out.push_back(parse_flag(key, elem, item));
      }
    }
    return out;
  }
  if (def.is_number_integer()) {
    if (def.get<long long>() < 0 && !text.empty() && text[0] == '-')
      return -static_cast<long long>(parse_unsigned(text.substr(1), key));
    return parse_unsigned(text, key);
  }
  if (def.is_number_float() || def.is_null()) return parse_double(text, key);
  if (def.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    config_fail("parameter '" + key + "' expects true or false");
  }
  return text;
}

std::string fmt(double v) { return format_number(v); }

std::string point_text(const Point& p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + fmt(p[i]);
  return s + "]";
}

struct Context {
  json cfg;  // resolved config
  std::shared_ptr<const BlockSpace> space;
  std::uint64_t seed = 1;
  const json& p() const { return cfg["params"]; }
  double tol(const char* key) const { return cfg["tolerances"][key].get<double>(); }
  std::size_t u(const char* key) const { return p()[key].get<std::size_t>(); }
  double d(const char* key) const { return p()[key].get<double>(); }
  std::string s(const char* key) const { return p()[key].get<std::string>(); }

  ReportRow row(const std::string& study) const {
    ReportRow r;
    r.study = study;
    if (space) {
      r.space = space->label();
      r.N = space->dim();
    }
    if (p().contains("k")) r.k = u("k");
    r.seed = seed;
    return r;
  }
};

struct Outcome {
  int exit_code = kExitOk;
  std::string message;
  void flag(int code, const std::string& what) {
    if (exit_code == kExitOk) {
      exit_code = code;
      message = what;
    }
  }
};

DeriveParams derive_from(const Context& c, double epsilon) {
  DeriveParams d;
  d.epsilon = epsilon;
  d.k = c.u("k");
  d.w = c.u("w");
  d.delta = c.d("delta");
  d.adversary_budget = c.u("budget");
  d.stage_cap = c.u("cap");
  d.cloud_samples = c.u("samples");
  d.seed = c.seed;
  return d;
}

Split split_from(const std::string& s) {
  if (s == "alternating") return Split::Alternating;
  if (s == "halves") return Split::Halves;
  config_fail("split must be alternating or halves");
}

NormalFamily family_from(const std::string& s) {
  if (s == "coordinate") return NormalFamily::Coordinate;
  if (s == "gaussian") return NormalFamily::Gaussian;
  config_fail("family must be coordinate or gaussian");
}

std::vector<Strategy> strategies_from(const json& list) {
  std::vector<Strategy> out;
  for (const json& s : list) {
    try {
      out.push_back(strategy_from_string(s.get<std::string>()));
    } catch (const Error& e) {
      config_fail(e.what());
    }
  }
  if (out.empty()) config_fail("at least one strategy is required");
  return out;
}

Covering build_cover(const Context& c) {
  if (!c.s("cover_file").empty()) {
    json j = read_json_file(c.s("cover_file"));
    if (j.contains("detail") && j["detail"].contains("covering")) j = j["detail"]["covering"];
    return covering_from_json(j);
  }
  const std::string strategy = c.s("strategy");
  const std::size_t n = c.u("n");
  if (strategy == "cylinders") return cylinder_cover(c.space, n);
  if (strategy == "residue") return residue_cover(c.space, n);
  if (strategy == "slabs") return slab_cover(c.space, n);
  if (strategy == "trivial") return trivial_cover(c.space);
  if (strategy == "two-piece")
    return two_piece_family(c.space, c.d("alpha"), c.d("beta"), split_from(c.s("split")));
  if (strategy == "random")
    return random_convex_cover(c.space, n, c.u("complexity"), c.seed, family_from(c.s("family")));
  config_fail("unknown cover strategy: " + strategy);
}

InradiusCertificate best_piece_certificate(const ConvexBody& piece, std::size_t k, std::size_t budget,
                                           std::uint64_t seed) {
  if (coordinate_supported(piece)) return inradius_coordinate(piece, k);
  return inradius_search(piece, k, budget, seed);
}

// ---------------------------------------------------------------- commands

Outcome cmd_cover_build(const Context& c, Report& rep) {
  Outcome out;
  Covering cov = build_cover(c);
  if (c.u("verify_samples") > 0)
    cov.certificate = verify_cover(cov, c.u("verify_samples"), c.seed, c.tol("verify"));
  const std::size_t k = c.u("k");
  double worst = 0.0;
  json certs = json::array();
  for (std::size_t j = 0; j < cov.pieces.size(); ++j) {
    InradiusCertificate cert = best_piece_certificate(cov.pieces[j], k, c.u("search_budget"), mix_seed(c.seed, j));
    worst = std::max(worst, cert.value);
    ReportRow r = c.row("cover-piece");
    r.n = j;
    r.upper = cert.value;
    r.kind = to_string(cert.kind);
    r.notes = "misses=" + std::to_string(cov.certificate.misses);
    rep.rows.push_back(r);
    certs.push_back(to_json(cert));
  }
  ReportRow s = c.row("cover");
  s.n = cov.pieces.size();
  s.upper = worst;
  s.kind = to_string(cov.certificate.status);
  s.notes = "construction=" + cov.construction + ";points=" + std::to_string(cov.certificate.points) +
            ";misses=" + std::to_string(cov.certificate.misses);
  rep.rows.push_back(s);
  rep.detail["covering"] = to_json(cov);
  rep.detail["inradius"] = certs;
  if (cov.certificate.status == CoverStatus::Failed)
    out.flag(kExitVerification, "cover certificate failed");
  return out;
}

Outcome cmd_cover_verify(const Context& c, Report& rep) {
  Outcome out;
  Covering cov = build_cover(c);
  CoverCertificate cert = verify_cover(cov, c.u("samples"), c.seed, c.tol("verify"));
  ReportRow r = c.row("cover-verify");
  r.n = cov.pieces.size();
  r.upper = cert.worst_margin;
  r.kind = to_string(cert.status);
  r.notes = "construction=" + cov.construction + ";points=" + std::to_string(cert.points) +
            ";misses=" + std::to_string(cert.misses) + ";replay=" + std::to_string(cert.replay_points) +
            ";replay_failures=" + std::to_string(cert.replay_failures);
  if (!cert.witness.empty()) r.notes += ";witness=" + point_text(cert.witness);
  rep.rows.push_back(r);
  rep.detail["certificate"] = to_json(cert);
  if (cert.status == CoverStatus::Failed) {
    std::string why = cert.misses > 0 ? std::to_string(cert.misses) + " uncovered samples"
                                      : "contradiction replay failed";
    out.flag(kExitVerification, "cover verification failed: " + why);
  }
  return out;
}

Outcome cmd_inradius(const Context& c, Report& rep) {
  ConvexBody body = ConvexBody::unit_ball(c.space);
  std::string source = "unit-ball";
  if (!c.s("body_file").empty()) {
    body = body_from_json(c.space, read_json_file(c.s("body_file")));
    source = "body-file";
  } else if (c.p()["piece"].get<long long>() >= 0) {
    Covering cov = build_cover(c);
    std::size_t j = c.p()["piece"].get<std::size_t>();
    if (j >= cov.pieces.size()) config_fail("piece index out of range");
    body = cov.pieces[j];
    source = cov.construction + "#" + std::to_string(j);
  }
  const std::string method = c.s("method");
  if (method != "all" && method != "exact" && method != "search" && method != "upper")
    config_fail("method must be all, exact, search or upper");
  const std::size_t k = c.u("k");
  json certs = json::array();
  auto emit = [&](const std::string& m, double value, const std::string& kind, const std::string& notes) {
    ReportRow r = c.row("inradius");
    r.upper = value;
    r.kind = kind;
    r.notes = "method=" + m + ";body=" + source + (notes.empty() ? "" : ";" + notes);
    rep.rows.push_back(r);
  };
  if ((method == "all" || method == "exact") && coordinate_supported(body)) {
    InradiusCertificate cert = inradius_coordinate(body, k);
    std::string dropped;
    for (std::size_t i : cert.subspace.dropped) dropped += (dropped.empty() ? "" : " ") + std::to_string(i);
    emit("exact", cert.value, to_string(cert.kind), "dropped=[" + dropped + "]");
    certs.push_back(to_json(cert));
  } else if (method == "exact") {
    config_fail("no exact solver for this body");
  }
  if (method == "all" || method == "search") {
    InradiusCertificate cert = inradius_search(body, k, c.u("search_budget"), c.seed);
    emit("search", cert.value, to_string(cert.kind), "");
    certs.push_back(to_json(cert));
  }
  if (method == "all" || method == "upper") {
    if (std::holds_alternative<QCylinder>(body.shape())) {
      emit("upper", inradius_upper_family(body, k), to_string(CertificateKind::UpperBound), "");
    } else if (method == "upper") {
      config_fail("the family upper bound applies to cylinder pieces only");
    }
  }
  rep.detail["certificates"] = certs;
  return {};
}

void stage_rows(const Context& c, Report& rep, const std::string& study, const DerivationTrace& t) {
  for (const StageRecord& s : t.records) {
    ReportRow r = c.row(study);
    r.n = s.stage;
    r.upper = s.radius;
    r.kind = "stage";
    r.notes = "eps=" + fmt(t.params.epsilon) + ";survivors=" + std::to_string(s.survivors) +
              ";killed=" + std::to_string(s.killed);
    rep.rows.push_back(r);
  }
}

std::string gz_text(const std::optional<std::size_t>& gz, std::size_t cap) {
  return gz ? std::to_string(*gz) : "Overflow(" + std::to_string(cap) + ")";
}

Outcome cmd_gz(const Context& c, Report& rep) {
  json traces = json::array();
  for (const json& e : c.p()["eps"]) {
    DeriveParams d = derive_from(c, e.get<double>());
    DerivationTrace t = gz_estimate(ConvexBody::unit_ball(c.space), d);
    stage_rows(c, rep, "gz-stage", t);
    ReportRow r = c.row("gz");
    if (t.gz) r.n = *t.gz;
    r.kind = t.gz ? "gz=" + std::to_string(*t.gz) : gz_text(t.gz, d.stage_cap);
    r.notes = "eps=" + fmt(d.epsilon);
    rep.rows.push_back(r);
    rep.footer.push_back("gz(eps=" + fmt(d.epsilon) + ") = " + gz_text(t.gz, d.stage_cap));
    json tj = to_json(t);
    tj.erase("grid");
    traces.push_back(tj);
    if (rep.footer.size() == 1) rep.footer.insert(rep.footer.begin(), "bias: " + t.bias_note);
  }
  rep.detail["traces"] = traces;
  return {};
}

Outcome cmd_inclusion_check(const Context& c, Report& rep) {
  Outcome out;
  Covering cov = build_cover(c);
  DeriveParams d = derive_from(c, c.d("eps"));
  CoverDerivationReport r = covering_derivation_check(cov, d);
  for (std::size_t m = 0; m < r.survivors_per_stage.size(); ++m) {
    ReportRow row = c.row("prop31-stage");
    row.n = m;
    row.kind = "stage";
    row.notes = "survivors=" + std::to_string(r.survivors_per_stage[m]) +
                ";min_count=" + std::to_string(r.min_count_per_stage[m]);
    rep.rows.push_back(row);
  }
  ReportRow s = c.row("prop31");
  s.n = cov.pieces.size();
  s.upper = r.max_piece_inradius;
  s.kind = "violations=" + std::to_string(r.violations.size());
  s.notes = "construction=" + cov.construction + ";eps=" + fmt(d.epsilon) +
            ";hypothesis=" + (r.hypothesis_holds ? "true" : "false") + ";gz=" + gz_text(r.gz, d.stage_cap) +
            ";samples=" + std::to_string(r.samples);
  rep.rows.push_back(s);
  rep.detail["report"] = to_json(r);
  if (r.hypothesis_holds && !r.violations.empty())
    out.flag(kExitAssertion, std::to_string(r.violations.size()) + " stage survivors lie in too few pieces");
  return out;
}

void add_fit_footer(Report& rep, const SlopeFit& fit) {
  rep.footer.push_back("slope=" + fmt(fit.slope) + " intercept=" + fmt(fit.intercept) +
                       " std_error=" + fmt(fit.std_error) + " points=" + std::to_string(fit.points));
  rep.detail["fit"] = to_json(fit);
}

Outcome upper_rows(const Context& c, Report& rep, const std::string& study, const ScalingReport& sr) {
  Outcome out;
  json rows = json::array();
  for (const ThetaEstimate& e : sr.rows) {
    ReportRow r = c.row(study);
    r.n = e.n;
    r.upper = e.upper;
    r.kind = e.kind;
    r.notes = e.notes;
    rep.rows.push_back(r);
    rows.push_back(to_json(e));
    double floor = c.tol("floor") / static_cast<double>(e.n);
    if (*e.upper < floor)
      out.flag(kExitAssertion, "upper estimate " + fmt(*e.upper) + " below " + fmt(floor) + " at n=" +
                                   std::to_string(e.n));
  }
  rep.detail["estimates"] = rows;
  if (sr.fit.points >= 2) add_fit_footer(rep, sr.fit);
  return out;
}

std::vector<std::size_t> size_list(const json& list, const char* key) {
  std::vector<std::size_t> out;
  for (const json& v : list) {
    if (v.get<std::size_t>() < 1) config_fail(std::string(key) + " values must be >= 1");
    out.push_back(v.get<std::size_t>());
  }
  if (out.empty()) config_fail(std::string(key) + " must not be empty");
  return out;
}

Outcome cmd_theta_upper(const Context& c, Report& rep) {
  auto sr = scaling_study(c.space, size_list(c.p()["n"], "n"), c.u("k"), strategies_from(c.p()["strategies"]),
                          c.seed);
  return upper_rows(c, rep, "theta-upper", sr);
}

Outcome cmd_scaling(const Context& c, Report& rep) {
  auto sr = scaling_study(c.space, size_list(c.p()["n"], "n"), c.u("k"), strategies_from(c.p()["strategies"]),
                          c.seed);
  Outcome out = upper_rows(c, rep, "scaling", sr);
  const json& expect = c.p()["expect_slope"];
  if (!expect.is_null()) {
    if (sr.fit.points < 2) config_fail("a slope check needs at least two n >= 2");
    double tol = c.tol("slope");
    bool ok = std::abs(sr.fit.slope - expect.get<double>()) <= tol;
    rep.footer.push_back("expected_slope=" + fmt(expect.get<double>()) + " tol=" + fmt(tol) +
                         (ok ? " ok" : " violated"));
    if (!ok) out.flag(kExitAssertion, "fitted slope " + fmt(sr.fit.slope) + " outside tolerance");
  }
  return out;
}

Outcome cmd_theta_lower(const Context& c, Report& rep) {
  ThetaLowerOptions opt;
  opt.complexity = c.u("complexity");
  opt.family = family_from(c.s("family"));
  for (const json& e : c.p()["eps"]) opt.eps_grid.push_back(e.get<double>());
  opt.derive = derive_from(c, 0.5);
  opt.search_budget = c.u("search_budget");
  json rows = json::array();
  for (std::size_t n : size_list(c.p()["n"], "n")) {
    ThetaEstimate e = theta_lower(c.space, n, c.u("k"), c.u("corpus"), c.seed, opt);
    ReportRow r = c.row("theta-lower");
    r.n = n;
    r.lower = e.lower;
    r.kind = e.kind;
    r.notes = e.notes;
    rep.rows.push_back(r);
    rows.push_back(to_json(e));
  }
  rep.detail["estimates"] = rows;
  return {};
}

Outcome cmd_two_piece_search(const Context& c, Report& rep) {
  Outcome out;
  std::vector<std::size_t> sweep;
  for (const json& v : c.p()["sweep"]) {
    if (v.get<std::size_t>() < 3) config_fail("sweep dimensions must be >= 3");
    sweep.push_back(v.get<std::size_t>());
  }
  if (c.u("N") < 3) config_fail("N must be >= 3");
  TwoPieceReport r = two_piece_search(c.u("N"), c.u("k"), c.u("iterations"), c.seed, sweep, c.u("disk_corpus"));
  auto base = [&](const std::string& study, std::size_t N) {
    ReportRow row = c.row(study);
    row.space = "l2";
    row.N = N;
    row.n = 2;
    return row;
  };
  ReportRow best = base("problem46", r.N);
  best.upper = r.best.value;
  best.kind = "upper/Exact";
  best.notes = "alpha=" + fmt(r.best.alpha) + ";beta=" + fmt(r.best.beta) +
               ";split=" + (r.best.split == Split::Alternating ? "alternating" : "halves") +
               ";gap_to_reference=" + fmt(r.gap_to_reference) + ";verify_misses=" + std::to_string(r.verify_misses);
  rep.rows.push_back(best);
  for (const auto& [N, v] : r.sweep) {
    ReportRow row = base("problem46-sweep", N);
    row.upper = v;
    row.kind = "upper/Exact";
    rep.rows.push_back(row);
  }
  if (r.disk_lower) {
    ReportRow row = base("problem46-disk", 2);
    row.lower = *r.disk_lower;
    row.kind = "lower/corpus";
    row.notes = "corpus=" + std::to_string(r.disk_corpus);
    rep.rows.push_back(row);
  }
  rep.footer.push_back("reference_upper=" + fmt(kTwoPieceReference) + " gap=" + fmt(r.gap_to_reference));
  rep.footer.push_back(std::string("sweep_nonincreasing=") + (r.sweep_nonincreasing ? "true" : "false"));
  rep.detail["report"] = to_json(r);
  if (r.verify_misses > 0) out.flag(kExitVerification, "best two-piece cover misses sampled points");
  if (r.best.value >= 1.0) out.flag(kExitAssertion, "two-piece search did not go below 1");
  if (!r.sweep_nonincreasing) out.flag(kExitAssertion, "best estimate increases with N");
  return out;
}

Outcome cmd_renorm(const Context& c, Report& rep) {
  Outcome out;
  const double tol = c.tol("renorm");
  json reports = json::array();
  for (const json& l : c.p()["lambda"]) {
    double lambda = l.get<double>();
    if (!(lambda >= 1.0)) config_fail("lambda values must be >= 1");
    RenormReport r = renorm_equivalence_check(c.space, alternating_weights(*c.space, lambda), c.u("n"), c.u("k"),
                                              c.seed, strategies_from(c.p()["strategies"]));
    double l2 = r.lambda * r.lambda;
    r.tol = tol;
    r.low = *r.base.upper / l2 - tol;
    r.high = *r.base.upper * l2 + tol;
    r.holds = *r.renormed.upper >= r.low && *r.renormed.upper <= r.high;
    ReportRow row = c.row("renorm-check");
    row.n = c.u("n");
    row.upper = r.renormed.upper;
    row.kind = r.holds ? "holds" : "violated";
    row.notes = "lambda=" + fmt(r.lambda) + ";base=" + fmt(*r.base.upper) + ";interval=[" + fmt(r.low) + " " +
                fmt(r.high) + "]";
    rep.rows.push_back(row);
    reports.push_back(to_json(r));
    if (!r.holds) out.flag(kExitAssertion, "renorming inequality violated at lambda=" + fmt(r.lambda));
  }
  rep.detail["reports"] = reports;
  return out;
}

Outcome cmd_moduli(const Context& c, Report& rep) {
  std::vector<double> eps;
  for (const json& e : c.p()["eps"]) eps.push_back(e.get<double>());
  if (eps.empty()) config_fail("eps must not be empty");
  for (double e : eps)
    if (!(e > 0.0 && e <= 1.0)) config_fail("eps values must lie in (0, 1]");
  if (c.u("k") < 1 || c.u("k") >= c.space->dim()) config_fail("k must satisfy 1 <= k < N");
  ModulusEstimate m = moduli_estimate(*c.space, eps, c.u("k"), c.seed, c.u("samples"));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    ReportRow r = c.row("moduli");
    r.upper = m.rho_bar[i];
    r.lower = m.delta_bar[i];
    r.kind = "rho/delta";
    r.notes = "eps=" + fmt(eps[i]);
    rep.rows.push_back(r);
  }
  rep.detail["moduli"] = to_json(m);
  return {};
}

using Handler = Outcome (*)(const Context&, Report&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"cover-build", cmd_cover_build}, {"cover-verify", cmd_cover_verify}, {"inradius", cmd_inradius},
      {"gz", cmd_gz},                   {"prop31", cmd_inclusion_check},             {"theta-upper", cmd_theta_upper},
      {"theta-lower", cmd_theta_lower}, {"scaling", cmd_scaling},           {"problem46", cmd_two_piece_search},
      {"renorm-check", cmd_renorm},     {"moduli", cmd_moduli},
  };
  return h;
}

std::string error_line(int code, const std::string& kind, const std::string& message) {
  json j = {{"status", "error"}, {"exit", code}, {"kind", kind}, {"message", message}};
  return j.dump();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"cover-build", "cover-verify", "inradius",  "gz",
                                                 "prop31",      "theta-upper",  "theta-lower", "scaling",
                                                 "problem46",   "renorm-check", "moduli"};
  return names;
}

json command_defaults(const std::string& command) {
  if (command == "cover-build") return merged(cover_params(), {{"k", 1}, {"verify_samples", 0}, {"search_budget", 48}});
  if (command == "cover-verify") return merged(cover_params(), {{"samples", 100000}});
  if (command == "inradius")
    return merged(cover_params(),
                  {{"body_file", ""}, {"piece", -1}, {"k", 1}, {"method", "all"}, {"search_budget", 64}});
  if (command == "gz") return merged(derive_params(), {{"eps", json::array({0.5})}, {"k", 1}});
  if (command == "prop31") return merged(merged(cover_params(), derive_params()), {{"eps", 0.8}, {"k", 1}});
  if (command == "theta-upper")
    return {{"n", json::array({2, 4, 8, 16})}, {"k", 1}, {"strategies", all_strategies()}};
  if (command == "theta-lower")
    return merged(derive_params(), {{"n", json::array({2})},
                                    {"k", 1},
                                    {"corpus", 100},
                                    {"complexity", 1},
                                    {"family", "coordinate"},
                                    {"eps", json::array()},
                                    {"search_budget", 32}});
  if (command == "scaling")
    return {{"n", range_list(2, 16)}, {"k", 1}, {"strategies", all_strategies()}, {"expect_slope", nullptr}};
  if (command == "problem46")
    return {{"N", 32}, {"k", 1}, {"iterations", 48}, {"sweep", json::array({8, 16, 32, 64})}, {"disk_corpus", 1000}};
  if (command == "renorm-check")
    return {{"lambda", json::array({1.0, 1.5, 2.0, 4.0})}, {"n", 4}, {"k", 1}, {"strategies", all_strategies()}};
  if (command == "moduli") return {{"eps", json::array({0.25, 0.5, 1.0})}, {"k", 1}, {"samples", 256}};
  config_fail("unknown command: " + command);
}

json default_tolerances() { return {{"verify", kFeasTol}, {"renorm", 0.02}, {"slope", 0.15}, {"floor", 0.5}}; }

json space_json_from_preset(const std::string& preset, std::size_t dim) {
  try {
    if (preset.rfind("blocks:", 0) == 0) return to_json(space_from_json(read_json_file(preset.substr(7))));
    if (dim == 0) config_fail("--dim is required with a space preset");
    return to_json(space_from_preset(preset, dim));
  } catch (const Error& e) {
    config_fail(std::string("invalid space: ") + e.what());
  }
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) config_fail("config must be a JSON object");
  static const std::vector<std::string> allowed = {"space",  "dim",    "command",   "params",
                                                   "seed",   "output", "format",    "tolerances"};
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) config_fail("unknown config field: " + key);
  RunConfig c;
  if (!j.contains("command") || !j["command"].is_string()) config_fail("config needs a string 'command'");
  c.command = j["command"];
  if (j.contains("space")) {
    const json& s = j["space"];
    if (s.is_string()) {
      std::size_t dim = 0;
      if (j.contains("dim")) {
        if (!j["dim"].is_number_integer() || j["dim"].get<long long>() <= 0) config_fail("dim must be a positive integer");
        dim = j["dim"].get<std::size_t>();
      }
      c.space = space_json_from_preset(s, dim);
    } else if (s.is_object()) {
      if (j.contains("dim")) config_fail("dim applies to space presets only");
      c.space = s;
    } else if (!s.is_null()) {
      config_fail("space must be a preset string or a space object");
    }
  } else if (j.contains("dim")) {
    config_fail("dim given without a space");
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) config_fail("params must be an object");
    c.params = j["params"];
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) config_fail("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string()) config_fail("output must be a string");
    c.output = j["output"];
  }
  if (j.contains("format")) {
    if (!j["format"].is_string()) config_fail("format must be a string");
    c.format = j["format"];
  }
  if (j.contains("tolerances")) {
    if (!j["tolerances"].is_object()) config_fail("tolerances must be an object");
    c.tolerances = j["tolerances"];
  }
  return c;
}

json resolve_config(const RunConfig& config) {
  json params = command_defaults(config.command);
  if (!config.params.is_object()) config_fail("params must be an object");
  for (const auto& [key, value] : config.params.items()) {
    if (!params.contains(key)) config_fail("unknown parameter for " + config.command + ": " + key);
    check_param_type(key, params[key], value);
    params[key] = value;
  }
  json tol = default_tolerances();
  for (const auto& [key, value] : config.tolerances.items()) {
    if (!tol.contains(key)) config_fail("unknown tolerance: " + key);
    if (!value.is_number() || value.get<double>() < 0.0) config_fail("tolerance " + key + " must be >= 0");
    tol[key] = value;
  }
  if (config.format != "csv" && config.format != "json") config_fail("format must be csv or json");
  json space = nullptr;
  if (command_needs_space(config.command)) {
    if (config.space.is_null()) config_fail(config.command + " needs a space (--space, --space-file or config)");
    try {
      space = to_json(space_from_json(config.space));
    } catch (const Error& e) {
      config_fail(std::string("invalid space: ") + e.what());
    } catch (const json::exception& e) {
      config_fail(std::string("invalid space: ") + e.what());
    }
  }
  return {{"command", config.command}, {"space", space},     {"params", params},
          {"seed", config.seed},       {"format", config.format}, {"tolerances", tol}};
}

RunResult run(const RunConfig& config) {
  RunResult result;
  try {
    Context ctx;
    ctx.cfg = resolve_config(config);
    ctx.seed = config.seed;
    if (!ctx.cfg["space"].is_null())
      ctx.space = std::make_shared<const BlockSpace>(space_from_json(ctx.cfg["space"]));
    result.report.config = ctx.cfg;
    Outcome out = handlers().at(config.command)(ctx, result.report);
    result.exit_code = out.exit_code;
    if (out.exit_code != kExitOk)
      result.message = error_line(out.exit_code, out.exit_code == kExitVerification ? "verification" : "assertion",
                                  out.message);
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfig;
    result.message = error_line(kExitConfig, "config", e.what());
    return result;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Uncertified) {
      result.exit_code = kExitVerification;
      result.message = error_line(kExitVerification, "verification", e.what());
    } else {
      result.exit_code = kExitConfig;
      result.message = error_line(kExitConfig, to_string(e.kind()), e.what());
      return result;
    }
  } catch (const json::exception& e) {
    result.exit_code = kExitConfig;
    result.message = error_line(kExitConfig, "config", e.what());
    return result;
  }
  result.output = config.format == "json" ? render_json(result.report) : render_csv(result.report);
  if (!config.output.empty()) {
    try {
      write_atomic(config.output, result.output);
    } catch (const Error& e) {
      result.exit_code = kExitConfig;
      result.message = error_line(kExitConfig, "io", e.what());
    }
  }
  return result;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"covindex: convex covering index laboratory"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  struct Common {
    std::string space, space_file, config, output, format;
    std::size_t dim = 0;
    std::uint64_t seed = 1;
    std::vector<std::string> tol;
  };
  std::map<std::string, Common> common;
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_opts;
  std::map<std::string, std::map<std::string, CLI::Option*>> common_opts;

  for (const std::string& name : command_names()) {
    static const std::map<std::string, std::string> about = {
        {"cover-build", "build a covering and report piece inradii"},
        {"cover-verify", "sample the ball and certify a covering"},
        {"inradius", "codimension-budgeted inradius of a body or piece"},
        {"gz", "iterate slab-model derivations until the ball empties"},
        {"prop31", "check stage survivors against piece membership counts"},
        {"theta-upper", "covering index upper estimates from constructed covers"},
        {"theta-lower", "covering index estimates over a random-cover corpus"},
        {"scaling", "upper estimates over n with a log-log slope fit"},
        {"problem46", "optimize the two-piece family on the Hilbert ball"},
        {"renorm-check", "compare estimates under diagonal renormings"},
        {"moduli", "asymptotic convexity and smoothness moduli"}};
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    Common& cm = common[name];
    auto& co = common_opts[name];
    co["space"] = sub->add_option("--space", cm.space, "space preset: l1, l2, lq:<q>, linf, blocks:<file>");
    co["dim"] = sub->add_option("--dim", cm.dim, "dimension for presets");
    co["space_file"] = sub->add_option("--space-file", cm.space_file, "space JSON file");
    co["config"] = sub->add_option("--config", cm.config, "RunConfig JSON file; flags override it");
    co["seed"] = sub->add_option("--seed", cm.seed, "random seed");
    co["output"] = sub->add_option("--output", cm.output, "output path (default: standard output)");
    co["format"] = sub->add_option("--format", cm.format, "csv or json");
    co["tol"] = sub->add_option("--tol", cm.tol, "tolerance override key=value (repeatable)");
    json defaults = command_defaults(name);
    for (const auto& [key, def] : defaults.items()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      flag_opts[name][key] = sub->add_option("--" + flag, flags[name][key], "default " + def.dump());
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_line(kExitConfig, "config", e.what()) << "\n";
    return kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Common& cm = common[name];
  const auto& co = common_opts[name];
  RunConfig config;
  try {
    if (co.at("config")->count()) {
      config = config_from_json(read_json_file(cm.config));
      if (config.command != name) config_fail("config command '" + config.command + "' does not match " + name);
    }
    config.command = name;
    if (co.at("space")->count() && co.at("space_file")->count()) config_fail("use either --space or --space-file");
    if (co.at("space")->count()) {
      config.space = space_json_from_preset(cm.space, cm.dim);
    } else if (co.at("space_file")->count()) {
      config.space = read_json_file(cm.space_file);
    } else if (co.at("dim")->count()) {
      config_fail("--dim needs --space");
    }
    if (co.at("seed")->count()) config.seed = cm.seed;
    if (co.at("output")->count()) config.output = cm.output;
    if (co.at("format")->count()) config.format = cm.format;
    for (const std::string& kv : cm.tol) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) config_fail("--tol expects key=value");
      std::string key = kv.substr(0, eq);
      config.tolerances[key] = parse_double(kv.substr(eq + 1), key);
    }
    json defaults = command_defaults(name);
    for (const auto& [key, opt] : flag_opts[name])
      if (opt->count()) config.params[key] = parse_flag(key, defaults[key], flags[name][key]);
  } catch (const ConfigError& e) {
    std::cerr << error_line(kExitConfig, "config", e.what()) << "\n";
    return kExitConfig;
  }

  RunResult result = run(config);
  if (config.output.empty() && !result.output.empty()) std::cout << result.output;
  if (!result.message.empty()) std::cerr << result.message << "\n";
  return result.exit_code;
}

}  // namespace covindex
