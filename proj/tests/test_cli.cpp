#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "archmat/cli_io.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace archmat;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Sandbox {
 public:
  Sandbox() : dir_(fs::temp_directory_path() / ("archmat_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir_);
    // A 16 x 16 cross.
    DensityGrid g{16, Vec::Zero(256)};
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i)
        if (i == 7 || i == 8 || j == 7 || j == 8) g.values(i + 16 * j) = 1.0;
    save_grid(dir_ / "cross.txt", g);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  const fs::path& dir() const { return dir_; }

  Run run(const std::string& args) const {
    const fs::path out = dir_ / "stdout", err = dir_ / "stderr";
    const std::string cmd = "cd '" + dir_.string() + "' && '" ARCHMAT_CLI "' " + args + " > '" + out.string() +
                            "' 2> '" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
  }

 private:
  fs::path dir_;
};

void check_error(const Run& r, int code) {
  CHECK(r.status == code);
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j["exit_code"] == code);
  CHECK(j.contains("error"));
  CHECK(j.contains("message"));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("evaluate is repeatable byte for byte") {
  const Sandbox sb;
  const Run a = sb.run("evaluate --design cross.txt --material PC --nseg 2 --bands 2");
  const Run b = sb.run("evaluate --design cross.txt --material PC --nseg 2 --bands 2");
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["material"] == "PC");
  CHECK(j["e_bar"].get<double>() > 0.0);
  CHECK(j["min_strength"].get<double>() ==
        std::min(j["sigma_y"].get<double>(), j["sigma_c"].get<double>()));

  const Run c = sb.run("evaluate --design cross.txt --material Steel --nseg 2 --bands 2 --csv eval.csv");
  CHECK(c.status == 0);
  const std::string csv = slurp(sb.dir() / "eval.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("band rows are samples times bands") {
  const Sandbox sb;
  const Run r = sb.run("band --design cross.txt --nseg 3 --bands 4 --out band.csv");
  REQUIRE(r.status == 0);
  const std::string csv = slurp(sb.dir() / "band.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 12 * 4);
  CHECK(csv.rfind("path_arclength,k1,k2,band_index,lambda", 0) == 0);
}

TEST_CASE("sweep and fit") {
  const Sandbox sb;
  fs::create_directories(sb.dir() / "set");
  fs::copy_file(sb.dir() / "cross.txt", sb.dir() / "set" / "a.txt");
  DensityGrid thin{16, Vec::Zero(256)};
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i)
      if (i == 8 || j == 8) thin.values(i + 16 * j) = 1.0;
  save_grid(sb.dir() / "set" / "b.txt", thin);
  const Run r = sb.run("sweep --designs set --materials TPU,Steel --nseg 2 --bands 2 --out sweep.csv");
  REQUIRE(r.status == 0);
  const std::string csv = slurp(sb.dir() / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);
  const Run f = sb.run("fit --table sweep.csv");
  REQUIRE(f.status == 0);
  CHECK(f.out.find("TPU") != std::string::npos);
  CHECK(f.out.find("Steel") != std::string::npos);
}

TEST_CASE("errors exit with codes and JSON on stderr") {
  const Sandbox sb;
  check_error(sb.run("evaluate --design missing.txt"), 2);
  check_error(sb.run("evaluate --design cross.txt --material Gold"), 2);
  check_error(sb.run("evaluate --design cross.txt --load 0 0 0"), 2);
  check_error(sb.run("frobnicate"), 2);
  check_error(sb.run("evaluate"), 2);
  {
    std::ofstream bad(sb.dir() / "bad.json");
    bad << R"({"n": 16, "unknown_key": 1})";
  }
  check_error(sb.run("optimize --config bad.json"), 2);
  {
    std::ofstream g(sb.dir() / "range.txt");
    g << "4 4\n0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 2\n";
  }
  check_error(sb.run("evaluate --design range.txt"), 2);
}

TEST_CASE("a short optimize run writes its outputs") {
  const Sandbox sb;
  {
    std::ofstream c(sb.dir() / "run.json");
    c << R"({"n": 16, "max_iterations": 3, "filter_radius": 0.1, "final_n_seg": 2, "final_bands": 2,
             "checkpoint_interval": 2, "output_dir": "out"})";
  }
  const Run r = sb.run("optimize --config run.json --quiet");
  REQUIRE(r.status == 0);
  for (const char* f : {"log.csv", "design.txt", "design.pgm", "blueprint.txt", "report.json", "band.csv"})
    CHECK(fs::exists(sb.dir() / "out" / f));
  const std::string log = slurp(sb.dir() / "out" / "log.csv");
  CHECK(std::count(log.begin(), log.end(), '\n') == 4);
  const Run again = sb.run("optimize --config run.json --quiet");
  CHECK(slurp(sb.dir() / "out" / "log.csv") == log);
}

}  // TEST_SUITE
