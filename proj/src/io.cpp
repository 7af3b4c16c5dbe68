#include "indimart/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "indimart/errors.hpp"

namespace indimart {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SchemaError(where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing \"") + key + "\"");
  return *it;
}

const json& array(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  return j;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<double> vector_of(const json& j, std::size_t m, const std::string& where) {
  array(j, where);
  if (j.size() != m) fail(where, "expected " + std::to_string(m) + " components");
  std::vector<double> out;
  for (std::size_t d = 0; d < m; ++d) out.push_back(number(j[d], where));
  return out;
}

WeightedSpace space_from_json(const json& j) {
  const json& points = array(field(j, "points", "root"), "points");
  if (points.empty()) fail("points", "no points");
  std::vector<std::string> ids;
  std::vector<double> weights;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string where = "points[" + std::to_string(i) + "]";
    std::string id = text(field(points[i], "id", where), where + ".id");
    if (!seen.insert(id).second) fail(where, "duplicate id '" + id + "'");
    ids.push_back(std::move(id));
    weights.push_back(number(field(points[i], "weight", where), where + ".weight"));
  }
  try {
    return WeightedSpace(std::move(ids), std::move(weights));
  } catch (const std::logic_error& e) {
    fail("points", e.what());
  }
}

Filtration filtration_from_json(const json& j, const WeightedSpace& space) {
  const json& entries = array(field(j, "filtration", "root"), "filtration");
  if (entries.size() < 2) fail("filtration", "need P_0 and at least one more partition");
  std::vector<Partition> partitions;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::string where = "filtration[" + std::to_string(k) + "]";
    std::vector<std::vector<std::size_t>> blocks;
    for (const json& block : array(entries[k], where)) {
      std::vector<std::size_t> members;
      for (const json& id : array(block, where)) {
        const std::string name = text(id, where);
        const auto index = space.find(name);
        if (!index) fail(where, "unknown point '" + name + "'");
        members.push_back(*index);
      }
      blocks.push_back(std::move(members));
    }
    try {
      partitions.push_back(Partition::from_blocks(space.size(), blocks));
    } catch (const std::logic_error& e) {
      fail(where, e.what());
    }
  }
  try {
    return Filtration(std::move(partitions));
  } catch (const std::logic_error& e) {
    fail("filtration", e.what());
  }
}

RandomVector values_from_json(const json& j, const WeightedSpace& space, std::size_t m,
                              const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object keyed by point id");
  if (j.size() != space.size()) {
    fail(where, "expected values for " + std::to_string(space.size()) + " points, got " +
                    std::to_string(j.size()));
  }
  std::vector<double> flat(space.size() * m);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto it = j.find(space.id(i));
    if (it == j.end()) fail(where, "no value for point '" + space.id(i) + "'");
    const std::vector<double> v = vector_of(*it, m, where + "." + space.id(i));
    std::copy(v.begin(), v.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  return RandomVector(m, std::move(flat));
}

ordered_json values_json(const RandomVector& X, const WeightedSpace& space) {
  ordered_json out = ordered_json::object();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto v = X.at(i);
    out[space.id(i)] = std::vector<double>(v.begin(), v.end());
  }
  return out;
}

void put_space(ordered_json& out, const WeightedSpace& space, const Filtration& F, std::size_t m,
               std::span<const RandomVector> X) {
  out["points"] = ordered_json::array();
  for (std::size_t i = 0; i < space.size(); ++i) {
    out["points"].push_back(ordered_json{{"id", space.id(i)}, {"weight", space.weight(i)}});
  }
  out["filtration"] = ordered_json::array();
  for (const Partition& P : F.partitions()) {
    ordered_json blocks = ordered_json::array();
    for (const auto& block : P.blocks()) {
      ordered_json ids = ordered_json::array();
      for (std::size_t i : block) ids.push_back(space.id(i));
      blocks.push_back(std::move(ids));
    }
    out["filtration"].push_back(std::move(blocks));
  }
  out["m"] = m;
  out["martingale"] = ordered_json::array();
  for (std::size_t t = 0; t < X.size(); ++t) {
    out["martingale"].push_back(ordered_json{{"t", t + 1}, {"values", values_json(X[t], space)}});
  }
}

std::vector<RandomVector> martingale_values(const json& j, const WeightedSpace& space,
                                            std::size_t m, std::size_t K) {
  const json& entries = array(field(j, "martingale", "root"), "martingale");
  std::vector<std::optional<RandomVector>> X(K + 1);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const std::string where = "martingale[" + std::to_string(e) + "]";
    const std::size_t t = count(field(entries[e], "t", where), where + ".t");
    if (t > K) fail(where, "time " + std::to_string(t) + " beyond horizon " + std::to_string(K));
    if (X[t]) fail(where, "time " + std::to_string(t) + " given twice");
    X[t] = values_from_json(field(entries[e], "values", where), space, m, where + ".values");
  }
  if (X[0] && sup_norm(*X[0]) != 0.0) throw PreconditionError("martingale: X_0 must be 0");
  std::vector<RandomVector> out;
  for (std::size_t t = 1; t <= K; ++t) {
    if (!X[t]) fail("martingale", "no values for time " + std::to_string(t));
    out.push_back(std::move(*X[t]));
  }
  return out;
}

std::size_t dimension(const json& j) {
  const std::size_t m = count(field(j, "m", "root"), "m");
  if (m < 1) fail("m", "must be at least 1");
  return m;
}

ordered_json law_json(const DiscreteLaw& law, bool approximate) {
  ordered_json atoms = ordered_json::array();
  for (std::size_t a = 0; a < law.size(); ++a) {
    const auto x = law.location(a);
    atoms.push_back(ordered_json{{"location", std::vector<double>(x.begin(), x.end())},
                                 {"mass", law.mass(a)}});
  }
  return ordered_json{{"approximate", approximate}, {"atoms", std::move(atoms)}};
}

DiscreteLaw law_from_json(const json& j, std::size_t m, const std::string& where) {
  std::vector<double> locations;
  std::vector<double> masses;
  for (const json& atom : array(field(j, "atoms", where), where + ".atoms")) {
    const std::vector<double> x = vector_of(field(atom, "location", where), m, where + ".location");
    locations.insert(locations.end(), x.begin(), x.end());
    masses.push_back(number(field(atom, "mass", where), where + ".mass"));
  }
  try {
    return DiscreteLaw(m, std::move(locations), std::move(masses));
  } catch (const std::logic_error& e) {
    fail(where, e.what());
  }
}

}  // namespace

FilteredMartingale martingale_from_json(const json& j) {
  WeightedSpace space = space_from_json(j);
  Filtration F = filtration_from_json(j, space);
  const std::size_t m = dimension(j);
  std::vector<RandomVector> X = martingale_values(j, space, m, F.horizon());
  return FilteredMartingale{std::move(space), std::move(F), m, std::move(X)};
}

ordered_json to_json(const FilteredMartingale& fm) {
  ordered_json out = ordered_json::object();
  put_space(out, fm.space, fm.filtration, fm.m, fm.X);
  return out;
}

ordered_json to_json(const Decomposition& d) {
  ordered_json out = ordered_json::object();
  put_space(out, d.space, d.filtration, d.dim,
            std::span<const RandomVector>(d.X.data() + 1, d.horizon));
  out["horizon"] = d.horizon;
  out["terms"] = d.terms;
  out["options"] = ordered_json{{"tol_rel", d.options.tol_rel},
                                {"n_max", d.options.n_max},
                                {"max_points", d.options.max_points}};

  out["increments"] = ordered_json::array();
  out["martingales"] = ordered_json::array();
  for (std::size_t n = 1; n <= d.terms; ++n) {
    for (std::size_t k = 1; k <= d.horizon; ++k) {
      out["increments"].push_back(
          ordered_json{{"n", n}, {"k", k}, {"values", values_json(d.increment(n, k), d.space)}});
    }
  }
  for (std::size_t n = 1; n <= d.terms; ++n) {
    for (std::size_t k = 1; k <= d.horizon; ++k) {
      out["martingales"].push_back(
          ordered_json{{"n", n}, {"k", k}, {"values", values_json(d.martingale(n, k), d.space)}});
    }
  }

  out["norms"] = ordered_json::array();
  for (const NormRow& r : norm_table(d)) {
    out["norms"].push_back(ordered_json{{"n", r.n},
                                        {"k", r.k},
                                        {"norm_sq_Y", r.norm_sq_Y},
                                        {"norm_sq_Z", r.norm_sq_Z},
                                        {"norm_sq_dX", r.norm_sq_dX},
                                        {"norm_sq_X", r.norm_sq_X},
                                        {"residual", r.residual}});
  }

  out["steps"] = ordered_json::array();
  for (const StepSummary& s : d.steps) {
    ordered_json stages = ordered_json::array();
    for (const StageSummary& st : s.stages) {
      stages.push_back(ordered_json{{"n", st.n},
                                    {"points", st.points},
                                    {"xi_norm_sq", st.xi_norm_sq},
                                    {"xi_l1", st.xi_l1},
                                    {"eta_norm_sq", st.eta_norm_sq},
                                    {"residual_norm_sq", st.residual_norm_sq},
                                    {"residual_l1", st.residual_l1},
                                    {"barycenter", law_json(st.barycenter, st.approximate)}});
    }
    out["steps"].push_back(ordered_json{{"k", s.k},
                                        {"converged", s.converged},
                                        {"stop", to_string(s.stop)},
                                        {"xi_norm_sq", s.xi_norm_sq},
                                        {"recentered", s.recentered},
                                        {"residual_norm_sq", s.residual_norm_sq},
                                        {"residual_sup", s.residual_sup},
                                        {"stages", std::move(stages)}});
  }

  ordered_json residuals = ordered_json::array();
  for (const StepSummary& s : d.steps) residuals.push_back(s.residual_norm_sq);
  out["truncation"] = ordered_json{{"tol_rel", d.options.tol_rel},
                                   {"n_max", d.options.n_max},
                                   {"max_points", d.options.max_points},
                                   {"converged", d.converged()},
                                   {"residual_norm_sq", std::move(residuals)}};
  return out;
}

Decomposition decomposition_from_json(const json& j) {
  Decomposition d;
  d.space = space_from_json(j);
  d.filtration = filtration_from_json(j, d.space);
  d.dim = dimension(j);
  d.horizon = d.filtration.horizon();
  if (count(field(j, "horizon", "root"), "horizon") != d.horizon) {
    fail("horizon", "does not match the filtration");
  }
  d.terms = count(field(j, "terms", "root"), "terms");

  const json& options = field(j, "options", "root");
  d.options.tol_rel = number(field(options, "tol_rel", "options"), "options.tol_rel");
  d.options.n_max = count(field(options, "n_max", "options"), "options.n_max");
  d.options.max_points = count(field(options, "max_points", "options"), "options.max_points");
  try {
    validate(d.options);
  } catch (const std::logic_error& e) {
    fail("options", e.what());
  }

  d.X.emplace_back(d.space.size(), d.dim);
  for (RandomVector& x : martingale_values(j, d.space, d.dim, d.horizon)) d.X.push_back(std::move(x));

  auto grid = [&](const char* key, bool required) {
    std::vector<std::vector<std::optional<RandomVector>>> cells(
        d.terms, std::vector<std::optional<RandomVector>>(d.horizon));
    const auto it = j.find(key);
    if (it == j.end()) {
      if (required) fail("root", std::string("missing \"") + key + "\"");
      return cells;
    }
    const json& entries = array(*it, key);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const std::string where = std::string(key) + "[" + std::to_string(e) + "]";
      const std::size_t n = count(field(entries[e], "n", where), where + ".n");
      const std::size_t k = count(field(entries[e], "k", where), where + ".k");
      if (n < 1 || n > d.terms || k < 1 || k > d.horizon) fail(where, "index out of range");
      if (cells[n - 1][k - 1]) fail(where, "given twice");
      cells[n - 1][k - 1] = values_from_json(field(entries[e], "values", where), d.space, d.dim,
                                             where + ".values");
    }
    for (std::size_t n = 1; n <= d.terms; ++n) {
      for (std::size_t k = 1; k <= d.horizon; ++k) {
        if (!cells[n - 1][k - 1]) {
          fail(key, "missing entry n=" + std::to_string(n) + " k=" + std::to_string(k));
        }
      }
    }
    return cells;
  };

  auto increments = grid("increments", true);
  d.Y.assign(d.horizon, {});
  for (std::size_t k = 1; k <= d.horizon; ++k) {
    for (std::size_t n = 1; n <= d.terms; ++n) d.Y[k - 1].push_back(std::move(*increments[n - 1][k - 1]));
  }
  if (j.contains("martingales")) {
    auto martingales = grid("martingales", true);
    d.Z.clear();
    for (std::size_t n = 1; n <= d.terms; ++n) {
      std::vector<RandomVector> z{RandomVector(d.space.size(), d.dim)};
      for (std::size_t k = 1; k <= d.horizon; ++k) z.push_back(std::move(*martingales[n - 1][k - 1]));
      d.Z.push_back(std::move(z));
    }
  } else {
    assemble(d);
  }

  const json& steps = array(field(j, "steps", "root"), "steps");
  if (steps.size() != d.horizon) fail("steps", "expected one entry per time step");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string where = "steps[" + std::to_string(i) + "]";
    const json& s = steps[i];
    StepSummary step;
    step.k = count(field(s, "k", where), where + ".k");
    if (step.k != i + 1) fail(where, "steps must be listed for k = 1..K in order");
    step.converged = boolean(field(s, "converged", where), where + ".converged");
    const auto stop = stop_reason_from_string(text(field(s, "stop", where), where + ".stop"));
    if (!stop) fail(where, "unknown stop reason");
    step.stop = *stop;
    step.xi_norm_sq = number(field(s, "xi_norm_sq", where), where + ".xi_norm_sq");
    step.recentered = number(field(s, "recentered", where), where + ".recentered");
    step.residual_norm_sq = number(field(s, "residual_norm_sq", where), where + ".residual_norm_sq");
    step.residual_sup = number(field(s, "residual_sup", where), where + ".residual_sup");
    const json& stages = array(field(s, "stages", where), where + ".stages");
    if (stages.size() > d.terms) fail(where, "more stages than terms");
    for (std::size_t n = 0; n < stages.size(); ++n) {
      const std::string at = where + ".stages[" + std::to_string(n) + "]";
      const json& st = stages[n];
      StageSummary stage;
      stage.n = count(field(st, "n", at), at + ".n");
      if (stage.n != n + 1) fail(at, "stages must be listed in order from n = 1");
      stage.points = count(field(st, "points", at), at + ".points");
      stage.xi_norm_sq = number(field(st, "xi_norm_sq", at), at + ".xi_norm_sq");
      stage.xi_l1 = number(field(st, "xi_l1", at), at + ".xi_l1");
      stage.eta_norm_sq = number(field(st, "eta_norm_sq", at), at + ".eta_norm_sq");
      stage.residual_norm_sq = number(field(st, "residual_norm_sq", at), at + ".residual_norm_sq");
      stage.residual_l1 = number(field(st, "residual_l1", at), at + ".residual_l1");
      const json& bary = field(st, "barycenter", at);
      stage.approximate = boolean(field(bary, "approximate", at + ".barycenter"), at + ".barycenter");
      stage.barycenter = law_from_json(bary, d.dim, at + ".barycenter");
      step.stages.push_back(std::move(stage));
    }
    d.steps.push_back(std::move(step));
  }
  return d;
}

ordered_json to_json(const Report& r) {
  ordered_json checks = ordered_json::array();
  for (const Check& c : r.checks) {
    ordered_json witness = ordered_json::object();
    if (c.witness.n) witness["n"] = *c.witness.n;
    if (c.witness.k) witness["k"] = *c.witness.k;
    if (c.witness.point) witness["point"] = *c.witness.point;
    ordered_json entry{{"name", c.name},         {"quantity", c.quantity}, {"bound", c.bound},
                       {"pass", c.pass},         {"asserted", c.asserted}, {"witness", std::move(witness)}};
    if (!c.note.empty()) entry["note"] = c.note;
    checks.push_back(std::move(entry));
  }
  return ordered_json{{"pass", r.pass()}, {"checks", std::move(checks)}};
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string format_double(double x) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, result.ptr);
}

std::string norms_csv(const Decomposition& d) {
  std::string out = "n,k,norm_sq_Y,norm_sq_Z,norm_sq_dX,norm_sq_X,residual\n";
  for (const NormRow& r : norm_table(d)) {
    out += std::to_string(r.n) + "," + std::to_string(r.k) + "," + format_double(r.norm_sq_Y) + "," +
           format_double(r.norm_sq_Z) + "," + format_double(r.norm_sq_dX) + "," +
           format_double(r.norm_sq_X) + "," + format_double(r.residual) + "\n";
  }
  return out;
}

std::string stages_csv(const Decomposition& d) {
  std::string out = "k,n,residual_norm\n";
  for (const StepSummary& s : d.steps) {
    for (const StageSummary& st : s.stages) {
      out += std::to_string(s.k) + "," + std::to_string(st.n) + "," +
             format_double(std::sqrt(st.residual_norm_sq)) + "\n";
    }
  }
  return out;
}

}  // namespace indimart
