#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "archmat/cli_io.hpp"
#include "archmat/gradient_check.hpp"

using namespace archmat;

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw config_error("cannot write " + p.string());
  return os;
}

MacroLoad load_from(const std::vector<double>& v) {
  MacroLoad l;
  if (!v.empty()) {
    if (v.size() != 3) throw config_error("--load takes three numbers: sigma_11 sigma_22 sigma_12");
    l.sigma0 = Vec3(v[0], v[1], v[2]);
  }
  l.validate();
  return l;
}

void write_design(const fs::path& dir, const std::string& stem, const PeriodicMesh& mesh, const Vec& v) {
  const DensityGrid g{mesh.n(), v};
  save_grid(dir / (stem + ".txt"), g);
  save_pgm(dir / (stem + ".pgm"), g);
}

std::vector<BaseMaterial> parse_materials(const std::string& spec) {
  if (spec == "all") return material_db();
  std::vector<BaseMaterial> out;
  std::stringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ','))
    if (!name.empty()) out.push_back(find_material(name));
  if (out.empty()) throw config_error("no materials given");
  return out;
}

// ---- subcommands ---------------------------------------------------------

int run_optimize(const fs::path& config_path, bool quiet) {
  const RunConfig cfg = load_config(config_path);
  const PeriodicMesh mesh = build_mesh(cfg.n);
  Vec seed;
  if (cfg.seed_design == "bars")
    seed = bar_lattice_seed(mesh, cfg.problem.f_star);
  else if (cfg.seed_design == "uniform")
    seed = Vec::Constant(mesh.element_count(), cfg.problem.f_star);
  else {
    fs::path p = cfg.seed_design;
    if (p.is_relative()) p = config_path.parent_path() / p;
    const DensityGrid g = load_grid(p);
    if (g.n != cfg.n) throw config_error("seed design is " + std::to_string(g.n) + "x" + std::to_string(g.n) +
                                         " but the config asks for n = " + std::to_string(cfg.n));
    seed = g.values;
  }

  fs::path out = cfg.output_dir;
  if (out.is_relative()) out = config_path.parent_path() / out;
  fs::create_directories(out);
  std::ofstream log = open_out(out / "log.csv");
  bool header = false;
  OptimizeCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r) {
    if (!header) {
      std::vector<std::string> names;
      if (cfg.problem.sigma_star > 0.0) names.push_back("yield");
      if (cfg.problem.e_star > 0.0) names.push_back("stiffness");
      names.push_back("volume");
      write_log_header(log, names);
      header = true;
    }
    write_log_row(log, r);
    log.flush();
    if (!quiet)
      std::cerr << "iter " << r.iter << " J " << r.objective << " E " << r.e_bar << " beta " << r.beta << " change "
                << r.change << '\n';
  };
  cb.checkpoint = [&](int iter, const Vec& rho_bar) {
    std::ostringstream stem;
    stem << "checkpoint_" << std::setw(4) << std::setfill('0') << iter;
    write_design(out, stem.str(), mesh, rho_bar);
  };

  const OptimizationResult res = optimize(cfg.problem, mesh, seed, cb);
  write_design(out, "x", mesh, res.x);
  write_design(out, "design", mesh, res.fields.intermediate.rho_bar);
  const Vec bp = threshold(res.fields.intermediate.rho_bar);
  write_design(out, "blueprint", mesh, bp);

  AnalysisOptions ao;
  ao.interp = cfg.problem.interp;
  ao.nu = cfg.problem.nu;
  ao.load = cfg.problem.load;
  ao.bloch = cfg.final_buckling;
  const DesignReport rep = analyze_design(mesh, bp, ao);
  std::ofstream(out / "report.json") << evaluation_json(rep, cfg.problem.material);
  std::ofstream band = open_out(out / "band.csv");
  rep.diagram.write_csv(band);
  std::cout << evaluation_json(rep, cfg.problem.material);
  return 0;
}

struct EvalArgs {
  std::string design;
  std::string material = "PC";
  std::vector<double> load;
  int nseg = 10;
  int bands = 6;
  double threshold = 0.0;
};

DesignReport evaluate_grid(const EvalArgs& a) {
  const DensityGrid g = load_grid(a.design);
  const PeriodicMesh mesh = build_mesh(g.n);
  const Vec rho = a.threshold > 0.0 ? threshold(g.values, a.threshold) : g.values;
  AnalysisOptions ao;
  ao.load = load_from(a.load);
  ao.bloch.n_seg = a.nseg;
  ao.bloch.bands = a.bands;
  return analyze_design(mesh, rho, ao);
}

int run_evaluate(const EvalArgs& a, const std::string& json_path, const std::string& csv_path) {
  const BaseMaterial mat = find_material(a.material);
  const DesignReport rep = evaluate_grid(a);
  const std::string js = evaluation_json(rep, mat);
  if (json_path.empty())
    std::cout << js;
  else
    open_out(json_path) << js;
  if (!csv_path.empty()) {
    std::ofstream os = open_out(csv_path);
    write_sweep_header(os);
    write_sweep_row(os, {fs::path(a.design).stem().string(), classify_materials(rep, {mat}).front(),
                         rep.volume_fraction, rep.effective.e_bar, rep.mode_class});
  }
  return 0;
}

int run_band(const EvalArgs& a, const std::string& out_path) {
  const DesignReport rep = evaluate_grid(a);
  if (out_path.empty())
    rep.diagram.write_csv(std::cout);
  else {
    std::ofstream os = open_out(out_path);
    rep.diagram.write_csv(os);
  }
  return 0;
}

int run_sweep(const std::string& dir, const std::string& materials, const EvalArgs& base, const std::string& out_path) {
  const std::vector<BaseMaterial> mats = parse_materials(materials);
  if (!fs::is_directory(dir)) throw config_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw config_error("no .txt design grids in " + dir);

  std::vector<DesignReport> reports(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < files.size(); i = next++) {
      try {
        EvalArgs a = base;
        a.design = files[i].string();
        reports[i] = evaluate_grid(a);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nt = std::min<int>(thread_count_from_env(), static_cast<int>(files.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& os = out_path.empty() ? std::cout : file;
  write_sweep_header(os);
  for (size_t i = 0; i < files.size(); ++i)
    for (const MaterialStrength& s : classify_materials(reports[i], mats))
      write_sweep_row(os, {files[i].stem().string(), s, reports[i].volume_fraction, reports[i].effective.e_bar,
                           reports[i].mode_class});
  return 0;
}

int run_fit(const std::string& table) {
  std::ifstream is(table);
  if (!is) throw config_error("cannot read " + table);
  std::cout << "material,n0,c0\n";
  for (const auto& [m, fit] : fit_table(is))
    std::cout << m << ',' << format_double(fit.n0) << ',' << format_double(fit.c0) << '\n';
  return 0;
}

int run_check_gradients(int n, std::uint64_t seed, int samples, const std::string& out_path) {
  GradientCheckOptions o;
  o.sizes = {n};
  o.seed = seed;
  o.samples = samples;
  const GradientCheckReport r = check_gradients(o);
  if (!out_path.empty()) {
    std::ofstream os = open_out(out_path);
    write_gradient_check_csv(os, r);
  }
  std::cout << "quantity,max_rel_err,tol,pass\n";
  for (const std::string& q : r.quantities()) {
    double tol = 0.0;
    bool ok = true;
    for (const auto& e : r.entries)
      if (e.quantity == q) {
        tol = e.tol;
        ok = ok && e.pass();
      }
    std::cout << q << ',' << format_double(r.max_rel_err(q)) << ',' << format_double(tol) << ','
              << (ok ? "true" : "false") << '\n';
  }
  if (!r.all_pass()) throw analysis_error("analytic and finite-difference gradients disagree");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Effective elasticity, yield and Bloch buckling strength of periodic 2D microstructures"};
  app.require_subcommand(1);

  fs::path config;
  bool quiet = false;
  auto* opt = app.add_subcommand("optimize", "Run a topology optimization from a JSON config");
  opt->add_option("--config", config, "JSON run configuration")->required();
  opt->add_flag("--quiet", quiet, "No progress on stderr");
  auto* defaults = app.add_subcommand("config-template", "Print the default configuration");

  EvalArgs ea;
  std::string json_path, csv_path, out_path;
  auto add_eval = [&](CLI::App* s, bool design) {
    if (design) s->add_option("--design", ea.design, "Density grid file")->required();
    s->add_option("--load", ea.load, "Macroscopic stress sigma_11 sigma_22 sigma_12")->expected(3);
    s->add_option("--nseg", ea.nseg, "k-path segments per edge")->capture_default_str();
    s->add_option("--bands", ea.bands, "Bands per k-point")->capture_default_str();
    s->add_option("--threshold", ea.threshold, "Threshold the grid at this level before analysis");
  };
  auto* ev = app.add_subcommand("evaluate", "Effective properties and strengths of one design");
  add_eval(ev, true);
  ev->add_option("--material", ea.material, "Base material")->capture_default_str();
  ev->add_option("--json", json_path, "JSON output file (default stdout)");
  ev->add_option("--csv", csv_path, "CSV output file");
  auto* band = app.add_subcommand("band", "Band diagram CSV of one design");
  add_eval(band, true);
  band->add_option("--out", out_path, "Output file (default stdout)");

  std::string designs, materials = "all";
  auto* sweep = app.add_subcommand("sweep", "Strength table of a design set over base materials");
  sweep->add_option("--designs", designs, "Directory of density grids")->required();
  sweep->add_option("--materials", materials, "'all' or a comma-separated list")->capture_default_str();
  add_eval(sweep, false);
  sweep->add_option("--out", out_path, "Output file (default stdout)");

  std::string table;
  auto* fit = app.add_subcommand("fit", "Two-point strength-density scaling fit per material");
  fit->add_option("--table", table, "CSV with columns material, f, min_strength")->required();

  int gn = 8, samples = 20;
  std::uint64_t gseed = 1;
  auto* cg = app.add_subcommand("check-gradients", "Finite-difference verification of the sensitivities");
  cg->add_option("--n", gn, "Mesh size")->capture_default_str();
  cg->add_option("--seed", gseed, "Random seed")->capture_default_str();
  cg->add_option("--samples", samples, "Elements checked")->capture_default_str();
  cg->add_option("--out", out_path, "Per-element CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << error_json(Error(ErrorKind::config, "usage", e.what()));
    return 2;
  }

  try {
    if (*opt) return run_optimize(config, quiet);
    if (*defaults) {
      std::cout << default_config_json();
      return 0;
    }
    if (*ev) return run_evaluate(ea, json_path, csv_path);
    if (*band) return run_band(ea, out_path);
    if (*sweep) return run_sweep(designs, materials, ea, out_path);
    if (*fit) return run_fit(table);
    if (*cg) return run_check_gradients(gn, gseed, samples, out_path);
  } catch (const Error& e) {
    std::cerr << error_json(e);
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << error_json(config_error(e.what()));
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(Error(ErrorKind::analysis, "internal", e.what()));
    return 3;
  }
  return 0;
}
