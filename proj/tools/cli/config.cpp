#include "config.hpp"

#include "elfuse/csv.hpp"

#include <cstdio>
#include <set>

namespace elfuse::cli {

namespace {

/// Typed access to one JSON object that remembers which keys were read.
class Reader {
 public:
  Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const Json& at(const std::string& key) {
    if (!has(key)) fail(path_, "missing required key '" + key + "'");
    return obj_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) fail(where(key), "expected a number");
    return v.get<double>();
  }
  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(where(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer_or(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t seed_or(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_number_unsigned()) fail(where(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_boolean()) fail(where(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) fail(where(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  Vector vector(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "expected an array of numbers");
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(where(key) + "[" + std::to_string(i) + "]", "expected a number");
      out(static_cast<Index>(i)) = v[i].get<double>();
    }
    return out;
  }

  std::vector<Index> indices(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "expected an array of integers");
    std::vector<Index> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        fail(where(key) + "[" + std::to_string(i) + "]", "expected an integer");
      }
      out.push_back(static_cast<Index>(v[i].get<long long>()));
    }
    return out;
  }

  Matrix matrix(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "expected an array of rows");
    const std::size_t rows = v.size();
    const std::size_t cols = rows ? (v[0].is_array() ? v[0].size() : 0) : 0;
    Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string row_where = where(key) + "[" + std::to_string(r) + "]";
      if (!v[r].is_array() || v[r].size() != cols) fail(row_where, "rows must have equal length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number()) fail(row_where, "expected numbers");
        out(static_cast<Index>(r), static_cast<Index>(c)) = v[r][c].get<double>();
      }
    }
    return out;
  }

  std::vector<std::vector<int>> groups(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "expected an array of label arrays");
    std::vector<std::vector<int>> out;
    for (std::size_t g = 0; g < v.size(); ++g) {
      const std::string gw = where(key) + "[" + std::to_string(g) + "]";
      if (!v[g].is_array()) fail(gw, "expected an array of labels");
      std::vector<int> labels;
      for (const auto& x : v[g]) {
        if (!x.is_number_integer()) fail(gw, "labels must be integers");
        labels.push_back(x.get<int>());
      }
      out.push_back(std::move(labels));
    }
    return out;
  }

  Reader child(const std::string& key) { return Reader(at(key), where(key)); }

  /// Throws on keys that were never read.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) fail(where(it.key()), "unknown key");
    }
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<BasisDescriptor> parse_basis(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) Reader::fail(where, "expected a non-empty array of descriptors");
  std::vector<BasisDescriptor> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Reader r(v[i], where + "[" + std::to_string(i) + "]");
    const std::string kind = r.string("kind");
    if (kind == "constant") {
      out.push_back(BasisDescriptor::constant());
    } else if (kind == "coordinate") {
      out.push_back(BasisDescriptor::coordinate(static_cast<Index>(r.integer("column"))));
    } else if (kind == "spline") {
      const auto column = static_cast<Index>(r.integer("column"));
      if (r.has("quantiles")) {
        const Vector q = r.vector("quantiles");
        out.push_back(BasisDescriptor::spline(column, std::vector<double>(q.data(), q.data() + q.size())));
      } else {
        out.push_back(BasisDescriptor::spline(column));
      }
    } else {
      Reader::fail(r.where("kind"), "unknown basis kind '" + kind + "'");
    }
    r.finish();
  }
  return out;
}

struct LayoutSpec {
  std::string kind = "free_intercepts";
  std::vector<Index> shared_index;
  std::optional<Matrix> A;
};

LayoutSpec parse_layout(Reader r) {
  LayoutSpec spec;
  spec.kind = r.string("kind");
  if (spec.kind == "custom") {
    spec.shared_index = r.indices("shared_index");
    if (r.has("A")) spec.A = r.matrix("A");
  } else if (spec.kind != "full" && spec.kind != "free_intercepts" && spec.kind != "disconnected") {
    Reader::fail(r.where("kind"), "unknown layout '" + spec.kind + "'");
  }
  r.finish();
  return spec;
}

ParamLayout build_layout(const LayoutSpec& spec, Index p, int K) {
  if (spec.kind == "full") return ParamLayout::full(p, K);
  if (spec.kind == "disconnected") return ParamLayout::disconnected(p, K);
  if (spec.kind == "free_intercepts") return ParamLayout::free_intercepts(p, K);
  const auto m = static_cast<Index>(spec.shared_index.size());
  return ParamLayout::make(p, K, spec.shared_index, spec.A ? *spec.A : Matrix::Identity(m, m));
}

PenaltyForm parse_penalty(const std::string& name, const std::string& where) {
  if (name == "shrink") return PenaltyForm::shrink;
  if (name == "literal") return PenaltyForm::literal;
  Reader::fail(where, "penalty must be 'shrink' or 'literal'");
}

}  // namespace

ParamLayout RunConfig::layout(Index p) const {
  return build_layout({layout_kind, shared_index, A}, p, K);
}

CoarseningMap RunConfig::map() const { return CoarseningMap::make(groups, K); }

BasisSet RunConfig::basis_set(const std::vector<Index>& z) const {
  return basis ? BasisSet::make(*basis) : BasisSet::default_for(z);
}

RunConfig parse_run_config(const Json& doc) {
  RunConfig c;
  Reader root(doc, "config");
  {
    Reader m = root.child("model");
    c.K = static_cast<int>(m.integer("K"));
    c.L = static_cast<int>(m.integer("L"));
    c.groups = m.groups("groups");
    if (static_cast<int>(c.groups.size()) != c.L) {
      Reader::fail(m.where("groups"), "expected L = " + std::to_string(c.L) + " groups");
    }
    try {
      CoarseningMap::make(c.groups, c.K);
    } catch (const ValidationError& e) {
      Reader::fail(m.where("groups"), e.what());
    }
    if (m.has("layout")) {
      const LayoutSpec spec = parse_layout(m.child("layout"));
      c.layout_kind = spec.kind;
      c.shared_index = spec.shared_index;
      c.A = spec.A;
    }
    if (m.has("z_columns")) c.z_columns = m.indices("z_columns");
    if (m.has("basis")) c.basis = parse_basis(m.at("basis"), m.where("basis"));
    m.finish();
  }
  if (root.has("solver")) {
    Reader s = root.child("solver");
    c.tau = s.number_or("tau", c.tau);
    c.tol = s.number_or("tol", c.tol);
    c.max_iter = static_cast<int>(s.integer_or("max_iter", c.max_iter));
    if (s.has("penalty")) c.penalty = parse_penalty(s.string("penalty"), s.where("penalty"));
    s.finish();
    if (c.tau < 0.0) Reader::fail("config.solver.tau", "must be >= 0");
    if (!(c.tol > 0.0)) Reader::fail("config.solver.tol", "must be positive");
    if (c.max_iter < 1) Reader::fail("config.solver.max_iter", "must be positive");
  }
  if (root.has("inference")) {
    Reader s = root.child("inference");
    c.B = static_cast<int>(s.integer_or("B", c.B));
    c.level = s.number_or("level", c.level);
    const std::string method = s.string_or("se_method", c.B >= 2 ? "bootstrap" : "hessian");
    if (method == "bootstrap") {
      c.se_method = SeMethod::bootstrap;
    } else if (method == "hessian") {
      c.se_method = SeMethod::hessian;
    } else {
      Reader::fail(s.where("se_method"), "must be 'bootstrap' or 'hessian'");
    }
    s.finish();
    if (!(c.level > 0.0 && c.level < 1.0)) Reader::fail("config.inference.level", "must lie in (0,1)");
    if (c.se_method == SeMethod::bootstrap && c.B < 2) {
      Reader::fail("config.inference.B", "bootstrap needs B >= 2");
    }
  }
  if (root.has("io")) {
    Reader s = root.child("io");
    c.primary_path = s.string_or("primary", "");
    c.predictions_path = s.string_or("predictions", "");
    c.out_path = s.string_or("out", "");
    s.finish();
  }
  c.seed = root.seed_or("seed", c.seed);
  root.finish();
  return c;
}

ScenarioFile parse_scenario(const Json& doc) {
  ScenarioFile out;
  ScenarioConfig& s = out.scenario;
  Reader r(doc, "scenario");
  s.name = r.string_or("name", s.name);
  s.n = static_cast<Index>(r.integer_or("n", s.n));
  s.N = static_cast<Index>(r.integer_or("N", s.N));
  s.p = static_cast<Index>(r.integer_or("p", s.p));
  s.K = static_cast<int>(r.integer_or("K", s.K));
  s.theta_true = r.vector("theta_true");
  s.phi_free_true = r.has("phi_free_true") ? r.vector("phi_free_true") : Vector();
  LayoutSpec layout;
  if (r.has("layout")) layout = parse_layout(r.child("layout"));
  s.layout = build_layout(layout, s.p, s.K);
  s.map = CoarseningMap::make(r.groups("groups"), s.K);
  if (r.has("class_labels")) {
    for (Index v : r.indices("class_labels")) s.class_labels.push_back(static_cast<int>(v));
  }
  if (r.has("shift")) {
    Reader sh = r.child("shift");
    const auto kind = parse_shift_kind(sh.string("kind"));
    s.shift.kind = kind;
    if (s.shift.shifts_mean()) s.shift.mean = sh.vector("mean");
    if (s.shift.shifts_variance()) s.shift.variance = sh.number_or("variance", 2.0);
    sh.finish();
  }
  if (r.has("z_mode")) {
    Reader z = r.child("z_mode");
    const std::string kind = z.string("kind");
    if (kind == "drop_column") {
      s.drop_column = static_cast<Index>(z.integer("column"));
    } else if (kind != "full") {
      Reader::fail(z.where("kind"), "must be 'full' or 'drop_column'");
    }
    z.finish();
  }
  s.correlation = r.number_or("correlation", s.correlation);
  if (r.has("predictor")) {
    Reader pr = r.child("predictor");
    s.predictor.kind = parse_predictor_kind(pr.string("kind"));
    if (s.predictor.kind == PredictorSpec::Kind::knn) s.predictor.k = static_cast<int>(pr.integer_or("k", 0));
    if (s.predictor.kind == PredictorSpec::Kind::file) s.predictor.file_pattern = pr.string("pattern");
    pr.finish();
  }
  if (r.has("basis")) s.basis = BasisSet::make(parse_basis(r.at("basis"), r.where("basis")));
  s.tau = r.number_or("tau", s.tau);
  if (r.has("penalty")) s.penalty = parse_penalty(r.string("penalty"), r.where("penalty"));
  s.B = static_cast<int>(r.integer_or("B", s.B));
  s.reps = static_cast<int>(r.integer_or("reps", s.reps));
  s.seed = r.seed_or("seed", s.seed);
  s.eval_rows = static_cast<Index>(r.integer_or("eval_rows", s.eval_rows));
  s.level = r.number_or("level", s.level);
  if (r.has("check")) {
    Reader c = r.child("check");
    CheckSettings& k = out.check;
    k.violate = c.boolean_or("violate", k.violate);
    k.draws = static_cast<Index>(c.integer_or("draws", k.draws));
    k.violation_shift = c.number_or("violation_shift", k.violation_shift);
    k.seed = c.seed_or("seed", k.seed);
    k.points = static_cast<int>(c.integer_or("points", k.points));
    if (c.has("expect_necessary")) k.expect_necessary = c.boolean_or("expect_necessary", false);
    if (c.has("expect_sufficient")) k.expect_sufficient = c.boolean_or("expect_sufficient", false);
    if (c.has("expect_gain")) k.expect_gain = c.boolean_or("expect_gain", false);
    c.finish();
  }
  r.finish();
  s.validate();
  return out;
}

Json load_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
  }
}

std::string config_hash(const Json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace elfuse::cli
