#include "pnlab/case_file.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::string> parse_string(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::nullopt;
  s = s.substr(1, s.size() - 2);
  if (s.find('"') != std::string_view::npos) return std::nullopt;
  return std::string(s);
}

CaseValue parse_value(std::string_view s, int line) {
  s = trim(s);
  if (s.empty()) parse_error(line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (auto str = parse_string(s)) return *str;
  if (auto num = parse_number(s)) return *num;
  if (s.front() == '[' && s.back() == ']') {
    std::string_view body = trim(s.substr(1, s.size() - 2));
    std::vector<std::string_view> items;
    while (!body.empty()) {
      const auto comma = body.find(',');
      items.push_back(trim(body.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    if (items.empty()) return std::vector<double>{};
    if (parse_string(items.front())) {
      std::vector<std::string> out;
      for (auto item : items) {
        auto v = parse_string(item);
        if (!v) parse_error(line, "mixed or malformed string array");
        out.push_back(*v);
      }
      return out;
    }
    std::vector<double> out;
    for (auto item : items) {
      auto v = parse_number(item);
      if (!v) parse_error(line, "malformed number array element '" + std::string(item) + "'");
      out.push_back(*v);
    }
    return out;
  }
  parse_error(line, "cannot parse value '" + std::string(s) + "'");
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

// Typed access with unknown-key rejection.
class Reader {
 public:
  Reader(const CaseTable& table, std::string where) : table_(table), where_(std::move(where)) {}
  ~Reader() = default;

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    if (const T* v = std::get_if<T>(&it->second)) return *v;
    throw Error(ErrorKind::Parse, where_ + "." + key + " has the wrong type");
  }

  std::optional<int> get_int(const std::string& key) {
    auto v = get<double>(key);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || std::abs(*v) > 2e9) throw Error(ErrorKind::Parse, where_ + "." + key + " must be an integer");
    return static_cast<int>(*v);
  }

  std::optional<std::vector<double>> get_numbers(const std::string& key) {
    seen_.insert(key);
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    if (const auto* d = std::get_if<double>(&it->second)) return std::vector<double>{*d};
    if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
    throw Error(ErrorKind::Parse, where_ + "." + key + " must be a number or number array");
  }

  std::optional<std::vector<std::string>> get_strings(const std::string& key) {
    seen_.insert(key);
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&it->second)) return std::vector<std::string>{*s};
    if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) return *v;
    if (const auto* v = std::get_if<std::vector<double>>(&it->second); v && v->empty()) return std::vector<std::string>{};
    throw Error(ErrorKind::Parse, where_ + "." + key + " must be a string or string array");
  }

  template <typename T>
  T require(const std::string& key) {
    auto v = get<T>(key);
    if (!v) throw Error(ErrorKind::Parse, "missing " + where_ + "." + key);
    return *v;
  }

  void finish() const {
    for (const auto& [key, value] : table_) {
      if (!seen_.count(key)) throw Error(ErrorKind::Parse, "unknown key " + where_ + "." + key);
    }
  }

 private:
  const CaseTable& table_;
  std::string where_;
  std::set<std::string> seen_;
};

BoundaryKind parse_boundary(const std::string& s) {
  if (s == "vacuum") return BoundaryKind::Vacuum;
  if (s == "reflective") return BoundaryKind::Reflective;
  throw Error(ErrorKind::Parse, "unknown boundary condition '" + s + "'");
}

ScalingMode parse_mode(const std::string& s) {
  if (s == "unscaled") return ScalingMode::Unscaled;
  if (s == "scaled" || s == "diffusive") return ScalingMode::Diffusive;
  throw Error(ErrorKind::Parse, "unknown scaling mode '" + s + "'");
}

}  // namespace

CaseDocument parse_case_document(const std::string& text) {
  CaseDocument doc;
  CaseTable* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.starts_with("[[")) {
      if (!s.ends_with("]]")) parse_error(line, "malformed array-table header");
      const auto name = trim(s.substr(2, s.size() - 4));
      if (name != "region") parse_error(line, "unknown array table [[" + std::string(name) + "]]");
      doc.regions.emplace_back();
      current = &doc.regions.back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') parse_error(line, "malformed section header");
      const std::string name(trim(s.substr(1, s.size() - 2)));
      if (!valid_key(name)) parse_error(line, "invalid section name '" + name + "'");
      if (doc.sections.count(name)) parse_error(line, "duplicate section [" + name + "]");
      current = &doc.sections[name];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) parse_error(line, "expected key = value");
    const std::string key(trim(s.substr(0, eq)));
    if (!valid_key(key)) parse_error(line, "invalid key '" + key + "'");
    if (current->count(key)) parse_error(line, "duplicate key '" + key + "'");
    (*current)[key] = parse_value(s.substr(eq + 1), line);
  }
  return doc;
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Pinn: return "pinn";
    case SolverKind::Lsfe: return "lsfe";
    case SolverKind::Mc: return "mc";
    case SolverKind::Analytic: return "analytic";
  }
  return "unknown";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "pinn") return SolverKind::Pinn;
  if (name == "lsfe") return SolverKind::Lsfe;
  if (name == "mc") return SolverKind::Mc;
  if (name == "analytic") return SolverKind::Analytic;
  throw Error(ErrorKind::Parse, "unknown solver '" + std::string(name) + "'");
}

SlabProblem CaseFile::problem_for(ScalingMode mode, std::optional<double> epsilon) const {
  if (epsilon) {
    if (!asymptotic_) throw Error(ErrorKind::InvalidArgument, "epsilon override needs an asymptotic case");
    return asymptotic_problem(*epsilon, alpha_, mode, problem.order);
  }
  return problem.with_scaling(mode);
}

CaseFile parse_case(const std::string& text) {
  const CaseDocument doc = parse_case_document(text);
  static const std::set<std::string> known = {"problem", "run", "pinn", "lsfe", "mc"};
  for (const auto& [name, table] : doc.sections) {
    if (!known.count(name)) throw Error(ErrorKind::Parse, "unknown section [" + name + "]");
  }
  auto section = [&](const std::string& name) -> const CaseTable& {
    static const CaseTable empty;
    auto it = doc.sections.find(name);
    return it == doc.sections.end() ? empty : it->second;
  };

  CaseFile c;
  {
    Reader root(doc.root, "root");
    c.name = root.require<std::string>("name");
    root.finish();
  }
  {
    Reader p(section("problem"), "problem");
    const std::string kind = p.require<std::string>("kind");
    const int order = p.get_int("order").value_or(1);
    if (kind == "asymptotic") {
      c.asymptotic_ = true;
      const double eps = p.require<double>("epsilon");
      c.alpha_ = p.require<double>("alpha");
      if (!(eps > 0.0) || !(c.alpha_ >= 0.0)) throw Error(ErrorKind::Parse, "asymptotic case needs epsilon > 0, alpha >= 0");
      c.problem = asymptotic_problem(eps, c.alpha_, ScalingMode::Unscaled, order);
      if (auto bl = p.get<std::string>("bc_left")) c.problem.bc_left = parse_boundary(*bl);
      if (auto br = p.get<std::string>("bc_right")) c.problem.bc_right = parse_boundary(*br);
      if (!doc.regions.empty()) throw Error(ErrorKind::Parse, "asymptotic case defines its own regions");
    } else if (kind == "slab") {
      c.problem.order = order;
      c.problem.bc_left = parse_boundary(p.require<std::string>("bc_left"));
      c.problem.bc_right = parse_boundary(p.require<std::string>("bc_right"));
      if (doc.regions.empty()) throw Error(ErrorKind::Parse, "slab case needs at least one [[region]]");
      for (std::size_t i = 0; i < doc.regions.size(); ++i) {
        Reader r(doc.regions[i], "region[" + std::to_string(i) + "]");
        MaterialRegion reg;
        reg.x_lo = r.require<double>("x_lo");
        reg.x_hi = r.require<double>("x_hi");
        reg.sigma_t = r.require<double>("sigma_t");
        reg.sigma_a = r.require<double>("sigma_a");
        reg.q = Polynomial{r.get_numbers("q").value_or(std::vector<double>{0.0})};
        r.finish();
        c.problem.regions.push_back(reg);
      }
    } else {
      throw Error(ErrorKind::Parse, "problem.kind must be 'asymptotic' or 'slab'");
    }
    p.finish();
    c.problem.validate();
  }
  {
    Reader r(section("run"), "run");
    for (const auto& s : r.get_strings("solvers").value_or(std::vector<std::string>{"lsfe"})) {
      const SolverKind k = parse_solver(s);
      if (k != SolverKind::Pinn && k != SolverKind::Lsfe) throw Error(ErrorKind::Parse, "run.solvers accepts 'pinn' and 'lsfe'");
      c.solvers.push_back(k);
    }
    if (auto modes = r.get_strings("modes")) {
      c.modes.clear();
      for (const auto& m : *modes) c.modes.push_back(parse_mode(m));
    }
    c.reference = parse_solver(r.get<std::string>("reference").value_or(c.asymptotic_ ? "analytic" : "mc"));
    if (c.reference != SolverKind::Analytic && c.reference != SolverKind::Mc) {
      throw Error(ErrorKind::Parse, "run.reference must be 'analytic' or 'mc'");
    }
    if (c.reference == SolverKind::Analytic && !c.asymptotic_) {
      throw Error(ErrorKind::Parse, "analytic reference exists only for the asymptotic case");
    }
    c.grid_points = r.get_int("grid_points").value_or(200);
    c.output_dir = r.get<std::string>("output_dir").value_or(c.name);
    r.finish();
    if (c.grid_points < 2) throw Error(ErrorKind::Parse, "run.grid_points must be >= 2");
    if (c.solvers.empty() || c.modes.empty()) throw Error(ErrorKind::Parse, "run needs at least one solver and mode");
  }
  {
    Reader r(section("pinn"), "pinn");
    auto& p = c.pinn;
    p.hidden_layers = r.get_int("hidden_layers").value_or(p.hidden_layers);
    p.hidden_width = r.get_int("hidden_width").value_or(p.hidden_width);
    if (auto a = r.get<std::string>("activation")) p.activation = parse_activation(*a);
    p.n_interior_points = r.get_int("points").value_or(p.n_interior_points);
    p.boundary_weight = r.get<double>("boundary_weight").value_or(p.boundary_weight);
    p.record_every = r.get_int("record_every").value_or(p.record_every);
    p.threads = r.get_int("threads").value_or(p.threads);
    if (auto seeds = r.get_numbers("seeds")) {
      p.seeds.clear();
      for (double s : *seeds) {
        if (s < 0 || s != std::floor(s)) throw Error(ErrorKind::Parse, "pinn.seeds must be nonnegative integers");
        p.seeds.push_back(static_cast<std::uint64_t>(s));
      }
    }
    const std::string opt = r.get<std::string>("optimizer").value_or("adam");
    AdamConfig adam;
    adam.learning_rate = r.get<double>("learning_rate").value_or(adam.learning_rate);
    if (auto steps = r.get<double>("max_steps")) adam.max_steps = static_cast<long>(*steps);
    LbfgsConfig lb;
    lb.memory = r.get_int("lbfgs_memory").value_or(lb.memory);
    lb.max_iterations = r.get_int("lbfgs_max_iterations").value_or(lb.max_iterations);
    lb.tolerance = r.get<double>("lbfgs_tolerance").value_or(lb.tolerance);
    if (opt == "adam") {
      p.optimizer = adam;
    } else if (opt == "lbfgs") {
      p.optimizer = lb;
    } else {
      throw Error(ErrorKind::Parse, "pinn.optimizer must be 'adam' or 'lbfgs'");
    }
    r.finish();
    p.validate();
  }
  {
    Reader r(section("lsfe"), "lsfe");
    c.lsfe.elements = r.get_int("elements").value_or(c.lsfe.elements);
    c.lsfe.boundary_weight = r.get<double>("boundary_weight").value_or(c.lsfe.boundary_weight);
    r.finish();
    if (c.lsfe.elements < 1 || !(c.lsfe.boundary_weight >= 0.0)) {
      throw Error(ErrorKind::Parse, "lsfe needs elements >= 1 and boundary_weight >= 0");
    }
  }
  {
    Reader r(section("mc"), "mc");
    if (auto h = r.get<double>("histories")) c.mc.histories = static_cast<std::int64_t>(*h);
    if (auto s = r.get<double>("seed")) c.mc.seed = static_cast<std::uint64_t>(*s);
    c.mc.weight_cutoff = r.get<double>("weight_cutoff").value_or(c.mc.weight_cutoff);
    c.mc.implicit_capture = r.get<bool>("implicit_capture").value_or(c.mc.implicit_capture);
    c.mc.threads = r.get_int("threads").value_or(c.mc.threads);
    c.mc_cells = r.get_int("cells").value_or(c.mc_cells);
    r.finish();
    if (c.mc.histories < 1 || c.mc_cells < 1) throw Error(ErrorKind::Parse, "mc needs histories >= 1 and cells >= 1");
  }
  return c;
}

CaseFile load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read case file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

}  // namespace pnlab
