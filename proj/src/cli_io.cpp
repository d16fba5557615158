#include "archmat/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace archmat {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- grids ---------------------------------------------------------------

void write_grid(std::ostream& os, const DensityGrid& g) {
  if (g.n <= 0 || g.values.size() != static_cast<Eigen::Index>(g.n) * g.n)
    throw domain_error("grid size does not match its values");
  os << g.n << ' ' << g.n << '\n';
  for (int j = 0; j < g.n; ++j) {
    for (int i = 0; i < g.n; ++i) {
      if (i) os << ' ';
      os << format_double(g.values[i + g.n * j]);
    }
    os << '\n';
  }
}

DensityGrid read_grid(std::istream& is) {
  long nx = 0, ny = 0;
  if (!(is >> nx >> ny)) throw config_error("grid file: missing 'n_x n_y' header");
  if (nx != ny) throw invalid_mesh("grid must be square, got " + std::to_string(nx) + "x" + std::to_string(ny));
  if (nx < 4 || nx % 2 != 0) throw invalid_mesh("grid size must be even and >= 4, got " + std::to_string(nx));
  DensityGrid g;
  g.n = static_cast<int>(nx);
  g.values.resize(nx * ny);
  std::string tok;
  for (Eigen::Index e = 0; e < g.values.size(); ++e) {
    if (!(is >> tok)) throw config_error("grid file: expected " + std::to_string(nx * ny) + " values, got " + std::to_string(e));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw config_error("grid file: bad value '" + tok + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw domain_error("grid file: density " + tok + " outside [0, 1]");
    g.values[e] = v;
  }
  if (is >> tok) throw config_error("grid file: trailing data after " + std::to_string(nx * ny) + " values");
  return g;
}

void save_grid(const std::filesystem::path& path, const DensityGrid& g) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  write_grid(os, g);
}

DensityGrid load_grid(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot read " + path.string());
  return read_grid(is);
}

void save_pgm(const std::filesystem::path& path, const DensityGrid& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot write " + path.string());
  os << "P5\n" << g.n << ' ' << g.n << "\n255\n";
  for (int j = g.n - 1; j >= 0; --j)
    for (int i = 0; i < g.n; ++i) {
      const double v = std::clamp(g.values[i + g.n * j], 0.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)))));
    }
}

// ---- config --------------------------------------------------------------

namespace {

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw config_error("config key '" + key + "' has the wrong type");
  }
}

json config_to_json(const RunConfig& c) {
  const OptimizationProblem& p = c.problem;
  return json{
      {"n", c.n},
      {"f_star", p.f_star},
      {"gamma1", p.gamma1},
      {"kappa1", p.ks.kappa1},
      {"kappa2", p.ks.kappa2},
      {"sigma_star", p.sigma_star},
      {"e_star", p.e_star},
      {"zeta", p.ks.zeta},
      {"filter_radius", p.filter_radius},
      {"delta_eta", p.delta_eta},
      {"beta_schedule", p.beta_schedule},
      {"beta_interval", p.beta_interval},
      {"load", {p.load.sigma0[0], p.load.sigma0[1], p.load.sigma0[2]}},
      {"material", p.material.name},
      {"n_seg", p.buckling.n_seg},
      {"bands", p.buckling.bands},
      {"final_n_seg", c.final_buckling.n_seg},
      {"final_bands", c.final_buckling.bands},
      {"k_offset", p.buckling.k_offset},
      {"max_iterations", p.max_iterations},
      {"tolerance", p.tolerance},
      {"volume_update_interval", p.volume_update_interval},
      {"checkpoint_interval", p.checkpoint_interval},
      {"symmetric", p.symmetric},
      {"move", p.mma.move},
      {"p", p.interp.p},
      {"eps_relax", p.interp.eps_relax},
      {"e0_ratio", p.interp.e0_ratio},
      {"nu", p.nu},
      {"seed_design", c.seed_design},
      {"output_dir", c.output_dir.string()},
      {"seed", c.rng_seed},
  };
}

}  // namespace

std::string default_config_json() { return config_to_json(RunConfig{}).dump(2) + "\n"; }

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw config_error("config must be a JSON object");

  RunConfig c;
  OptimizationProblem& p = c.problem;
  const json known = config_to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw config_error("unknown config key '" + it.key() + "'");

  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) {
      if (!j[key].is_number()) throw config_error(std::string("config key '") + key + "' must be a number");
      dst = j[key].get<double>();
    }
  };
  auto integer = [&](const char* key, int& dst) {
    if (j.contains(key)) {
      if (!j[key].is_number_integer()) throw config_error(std::string("config key '") + key + "' must be an integer");
      dst = j[key].get<int>();
    }
  };
  auto boolean = [&](const char* key, bool& dst) {
    if (j.contains(key)) {
      if (!j[key].is_boolean()) throw config_error(std::string("config key '") + key + "' must be a boolean");
      dst = j[key].get<bool>();
    }
  };
  auto string = [&](const char* key, std::string& dst) {
    if (j.contains(key)) {
      if (!j[key].is_string()) throw config_error(std::string("config key '") + key + "' must be a string");
      dst = j[key].get<std::string>();
    }
  };

  integer("n", c.n);
  num("f_star", p.f_star);
  num("gamma1", p.gamma1);
  boolean("kappa1", p.ks.kappa1);
  boolean("kappa2", p.ks.kappa2);
  num("sigma_star", p.sigma_star);
  num("e_star", p.e_star);
  num("zeta", p.ks.zeta);
  num("filter_radius", p.filter_radius);
  num("delta_eta", p.delta_eta);
  if (j.contains("beta_schedule")) {
    const json& b = j["beta_schedule"];
    if (!b.is_array() || b.empty()) throw config_error("config key 'beta_schedule' must be a nonempty array of numbers");
    p.beta_schedule.clear();
    for (const json& v : b) {
      if (!v.is_number()) throw config_error("config key 'beta_schedule' must be a nonempty array of numbers");
      p.beta_schedule.push_back(v.get<double>());
    }
  }
  integer("beta_interval", p.beta_interval);
  if (j.contains("load")) {
    const json& l = j["load"];
    if (!l.is_array() || l.size() != 3) throw config_error("config key 'load' must be an array of 3 numbers");
    for (int i = 0; i < 3; ++i) {
      if (!l[i].is_number()) throw config_error("config key 'load' must be an array of 3 numbers");
      p.load.sigma0[i] = l[i].get<double>();
    }
  }
  if (j.contains("material")) {
    std::string name;
    string("material", name);
    p.material = find_material(name);
  }
  integer("n_seg", p.buckling.n_seg);
  integer("bands", p.buckling.bands);
  integer("final_n_seg", c.final_buckling.n_seg);
  integer("final_bands", c.final_buckling.bands);
  num("k_offset", p.buckling.k_offset);
  c.final_buckling.k_offset = p.buckling.k_offset;
  integer("max_iterations", p.max_iterations);
  num("tolerance", p.tolerance);
  integer("volume_update_interval", p.volume_update_interval);
  integer("checkpoint_interval", p.checkpoint_interval);
  boolean("symmetric", p.symmetric);
  num("move", p.mma.move);
  num("p", p.interp.p);
  num("eps_relax", p.interp.eps_relax);
  num("e0_ratio", p.interp.e0_ratio);
  num("nu", p.nu);
  string("seed_design", c.seed_design);
  if (j.contains("output_dir")) {
    std::string d;
    string("output_dir", d);
    c.output_dir = d;
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw config_error("config key 'seed' must be a nonnegative integer");
    c.rng_seed = get<std::uint64_t>(j["seed"], "seed");
  }
  p.buckling.eigen.seed = c.rng_seed;
  c.final_buckling.eigen.seed = c.rng_seed;

  if (c.n < 4 || c.n % 2 != 0) throw invalid_mesh("config 'n' must be even and >= 4, got " + std::to_string(c.n));
  if (c.final_buckling.bands < 1) throw config_error("config 'final_bands' must be >= 1");
  if (c.final_buckling.n_seg < 2) throw config_error("config 'final_n_seg' must be >= 2");
  p.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

int thread_count_from_env() {
  const char* v = std::getenv("ARCHMAT_NUM_THREADS");
  if (!v || !*v) return 1;
  int n = 0;
  auto [ptr, ec] = std::from_chars(v, v + std::char_traits<char>::length(v), n);
  if (ec != std::errc() || *ptr != '\0' || n < 1) throw config_error(std::string("ARCHMAT_NUM_THREADS must be a positive integer, got '") + v + "'");
  return n;
}

// ---- classification and fits ---------------------------------------------

std::string to_string(FailureMode m) {
  switch (m) {
    case FailureMode::yield: return "yield";
    case FailureMode::buckling: return "buckling";
    case FailureMode::simultaneous: return "simultaneous";
  }
  return "unknown";
}

FailureMode classify_failure(double sigma_c, double sigma_y, double tie) {
  if (!(sigma_c > 0.0) || !(sigma_y > 0.0)) throw domain_error("strengths must be positive to classify failure");
  const double lo = std::min(sigma_c, sigma_y);
  if (std::isfinite(sigma_c) && std::abs(sigma_c - sigma_y) / lo <= tie) return FailureMode::simultaneous;
  return sigma_y < sigma_c ? FailureMode::yield : FailureMode::buckling;
}

std::vector<MaterialStrength> classify_materials(const DesignReport& r, const std::vector<BaseMaterial>& materials) {
  const double sc = r.buckles ? r.sigma_c : std::numeric_limits<double>::infinity();
  std::vector<MaterialStrength> out;
  for (const BaseMaterial& m : materials) {
    MaterialStrength s;
    s.material = m;
    s.sigma_y = r.sigma_y(m);
    s.sigma_c = sc;
    s.min_strength = std::min(s.sigma_y, sc);
    s.mode = classify_failure(sc, s.sigma_y);
    out.push_back(s);
  }
  return out;
}

ScalingFit fit_scaling(std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 2) throw domain_error("scaling fit needs at least two points");
  for (const auto& [f, s] : pts)
    if (!(f > 0.0) || !(s > 0.0)) throw domain_error("scaling fit needs positive densities and strengths");
  std::sort(pts.begin(), pts.end());
  const auto [f0, s0] = pts[0];
  const auto [f1, s1] = pts[1];
  if (f0 == f1) throw domain_error("scaling fit: duplicate density " + format_double(f0));
  ScalingFit fit;
  fit.n0 = std::log(s1 / s0) / std::log(f1 / f0);
  fit.c0 = s0 / std::pow(f0, fit.n0);
  return fit;
}

// ---- tables --------------------------------------------------------------

void write_sweep_header(std::ostream& os) {
  os << "design,material,f,rho_kg_m3,e_bar_rel,e_bar_gpa,sigma_y_rel,sigma_c_rel,min_strength_rel,"
        "sigma_y_mpa,sigma_c_mpa,min_strength_mpa,failure,mode_class\n";
}

void write_sweep_row(std::ostream& os, const SweepRow& r) {
  const BaseMaterial& m = r.strength.material;
  const double mpa = m.e1_gpa * 1e3;
  os << r.design << ',' << m.name << ',' << format_double(r.volume_fraction) << ','
     << format_double(r.volume_fraction * m.rho1) << ',' << format_double(r.e_bar) << ','
     << format_double(r.e_bar * m.e1_gpa) << ',' << format_double(r.strength.sigma_y) << ','
     << format_double(r.strength.sigma_c) << ',' << format_double(r.strength.min_strength) << ','
     << format_double(r.strength.sigma_y * mpa) << ',' << format_double(r.strength.sigma_c * mpa) << ','
     << format_double(r.strength.min_strength * mpa) << ',' << to_string(r.strength.mode) << ','
     << to_string(r.mode_class) << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_cell(const std::string& s, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw config_error("table line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::pair<std::string, ScalingFit>> fit_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw config_error("table is empty");
  const std::vector<std::string> header = split_csv(line);
  auto column = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<int>(it - header.begin());
    }
    return -1;
  };
  const int cm = column({"material"});
  const int cf = column({"f", "density"});
  const int cs = column({"min_strength_rel", "min_strength", "strength"});
  if (cf < 0 || cs < 0) throw config_error("table needs columns 'f' and 'min_strength'");

  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  std::vector<std::string> order;
  int ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (static_cast<int>(cells.size()) < static_cast<int>(header.size()))
      throw config_error("table line " + std::to_string(ln) + ": too few columns");
    const std::string mat = cm >= 0 ? cells[cm] : "all";
    if (!groups.count(mat)) order.push_back(mat);
    groups[mat].emplace_back(parse_cell(cells[cf], ln), parse_cell(cells[cs], ln));
  }
  std::vector<std::pair<std::string, ScalingFit>> out;
  for (const std::string& m : order) out.emplace_back(m, fit_scaling(groups[m]));
  return out;
}

std::string evaluation_json(const DesignReport& r, const BaseMaterial& m) {
  const MaterialStrength s = classify_materials(r, {m}).front();
  const auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  json d = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) d.push_back(r.effective.d_bar(i, k));
  json j{
      {"material", m.name},
      {"e1_gpa", m.e1_gpa},
      {"rho1", m.rho1},
      {"sigma1_over_e1", m.sigma1_over_e1},
      {"volume_fraction", r.volume_fraction},
      {"d_bar", d},
      {"e_bar", r.effective.e_bar},
      {"kappa_bar", r.effective.kappa_bar},
      {"max_vm", r.max_vm},
      {"sigma_y", s.sigma_y},
      {"buckles", r.buckles},
      {"tau_max", r.tau_max},
      {"sigma_c", num(s.sigma_c)},
      {"critical_k", {r.critical_k.k1, r.critical_k.k2}},
      {"mode_class", to_string(r.mode_class)},
      {"min_strength", s.min_strength},
      {"failure", to_string(s.mode)},
      {"sigma_c_below_sigma_y", s.sigma_c < s.sigma_y},
  };
  return j.dump(2) + "\n";
}

std::string error_json(const Error& e) {
  int code = 1;
  std::string kind = "unknown";
  switch (e.kind()) {
    case ErrorKind::config: code = 2; kind = "config"; break;
    case ErrorKind::analysis: code = 3; kind = "analysis"; break;
    case ErrorKind::solver: code = 4; kind = "solver"; break;
  }
  return json{{"error", e.code()}, {"kind", kind}, {"message", e.what()}, {"exit_code", code}}.dump() + "\n";
}

}  // namespace archmat
