#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "laprop/cli_app.hpp"

using namespace laprop;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("laprop_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter() {
    static int c = 0;
    return ++c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run_args(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"laprop"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config parser") {
  auto cfg = ConfigTree::parse_string("a = 1.5\nlist = 1, 2, 3  # trailing comment\nflag=true\nname = hello\n");
  CHECK(cfg.get_double("a", 0.0) == 1.5);
  CHECK(cfg.get_double_list("list", {}) == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_string("name", "") == "hello");
  CHECK(cfg.get_double("missing", 7.0) == 7.0);
  CHECK_NOTHROW(cfg.finish());

  auto bad = ConfigTree::parse_string("known = 1\nmisspelled = 2\n");
  bad.get_double("known", 0.0);
  CHECK_THROWS_WITH_AS(bad.finish(), doctest::Contains("misspelled"), FormatError);

  CHECK_THROWS_AS(ConfigTree::parse_string("novalue\n"), FormatError);
  CHECK_THROWS_AS(ConfigTree::parse_string("dup = 1\ndup = 2\n"), FormatError);
  auto notnum = ConfigTree::parse_string("x = abc\n");
  CHECK_THROWS_AS(notnum.get_double("x", 0.0), FormatError);
}

TEST_CASE("csv round-trips 64-bit values through 17 significant digits") {
  TempDir tmp;
  CsvTable table;
  table.header = {"a", "b"};
  const double v1 = 0.1, v2 = 1.0 / 3.0;
  table.rows.push_back({format_double(v1), format_double(v2)});
  const auto path = tmp.sub("t.csv");
  write_csv(path, table);
  const auto back = read_csv(path);
  CHECK(back.header == table.header);
  CHECK(std::stod(back.rows[0][0]) == v1);
  CHECK(std::stod(back.rows[0][1]) == v2);

  tmp.file("bad.csv", "a,b\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_csv(tmp.sub("bad.csv")), doctest::Contains("line 2"), FormatError);
}

TEST_CASE("box smoothing examples") {
  const std::vector<double> constant(120, 3.25);
  const auto sc = smooth_box(constant, 50);
  for (double v : sc) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));

  CHECK(smooth_box(std::vector<double>{1.0, 2.0, 3.0}, 1) == std::vector<double>{1.0, 2.0, 3.0});

  std::vector<double> impulse(200, 0.0);
  impulse[100] = 1.0;
  const auto si = smooth_box(impulse, 50);
  int nonzero = 0;
  for (double v : si)
    if (v != 0.0) {
      ++nonzero;
      CHECK(v == doctest::Approx(1.0 / 50.0).epsilon(1e-12));
    }
  CHECK(nonzero == 50);
}

TEST_CASE("gaussian smoothing keeps constants and row count") {
  const std::vector<double> constant(80, -1.5);
  const auto sc = smooth_gaussian(constant, 3.0);
  CHECK(sc.size() == constant.size());
  for (double v : sc) CHECK(v == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK_THROWS_AS(smooth_gaussian(constant, 0.0), std::invalid_argument);
}

TEST_CASE("smooth subcommand applies to numeric columns and preserves status") {
  TempDir tmp;
  std::string body = "step,loss,status\n";
  for (int i = 1; i <= 60; ++i)
    body += std::to_string(i) + "," + (i == 30 ? "1.0" : "0.0") + ",running\n";
  const auto in = tmp.file("in.csv", body);
  const auto out = tmp.sub("out.csv");
  CHECK(run_args({"smooth", "--input", in, "--output", out, "--window", "5"}) == 0);
  const auto table = read_csv(out);
  CHECK(table.header == std::vector<std::string>{"step", "loss", "status"});
  CHECK(table.rows.size() == 60);
  CHECK(table.rows[0][2] == "running");
  CHECK(std::stod(table.rows[29][1]) == doctest::Approx(0.2));

  // window=1 is the identity on values
  const auto out1 = tmp.sub("out1.csv");
  CHECK(run_args({"smooth", "--input", in, "--output", out1, "--window", "1"}) == 0);
  const auto t1 = read_csv(out1);
  for (std::size_t r = 0; r < t1.rows.size(); ++r)
    CHECK(std::stod(t1.rows[r][1]) == doctest::Approx(r + 1 == 30 ? 1.0 : 0.0));
}

TEST_CASE("missing config file exits nonzero naming the path") {
  const int rc = run_args({"bench", "rosenbrock", "--config", "/nonexistent/x.cfg",
                           "--out", "/tmp/should_not_matter"});
  CHECK(rc == 1);
}

TEST_CASE("grid bench on the stress problem writes a divergence-marked table") {
  TempDir tmp;
  const auto cfg = tmp.file("grid.cfg",
                            "problem = stress\n"
                            "optimizer = adam\n"
                            "mu = 0.9\n"
                            "nu = 0.1\n"
                            "lambda = 1.0\n"
                            "seeds = 3\n"
                            "max_steps = 20000\n");
  const auto out = tmp.sub("out");
  CHECK(run_args({"bench", "grid", "--config", cfg, "--out", out}) == 0);
  const auto table = read_csv(out + "/grid.csv");
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0][table.column("marked_divergent")] == "1");

  const auto manifest = slurp(out + "/manifest.json");
  CHECK(manifest.find("xoshiro256++") != std::string::npos);
  CHECK(manifest.find("grid.csv") != std::string::npos);
}

TEST_CASE("rosenbrock bench: reruns are byte-identical and the resolved config round-trips") {
  TempDir tmp;
  const auto cfg = tmp.file("rb.cfg",
                            "optimizers = laprop\n"
                            "sigma = 0.04\n"
                            "nu = 0.6, 0.9\n"
                            "lambda = 3e-3, 1e-2\n"
                            "seeds = 4\n"
                            "low_noise_steps = 1500\n"
                            "record_trajectories = true\n");
  const auto out1 = tmp.sub("run1");
  const auto out2 = tmp.sub("run2");
  CHECK(run_args({"bench", "rosenbrock", "--config", cfg, "--out", out1}) == 0);
  CHECK(run_args({"bench", "rosenbrock", "--config", cfg, "--out", out2}) == 0);
  for (const char* name : {"rosenbrock_cells.csv", "rosenbrock_tuned.csv", "summary.json"})
    CHECK(slurp(out1 + "/" + std::string(name)) == slurp(out2 + "/" + std::string(name)));

  // Re-run from the manifest's resolved config: identical outputs again.
  const auto manifest = nlohmann::json::parse(slurp(out1 + "/manifest.json"));
  std::string resolved_text;
  for (const auto& [key, value] : manifest["config"].items())
    resolved_text += key + " = " + value.get<std::string>() + "\n";
  const auto cfg2 = tmp.file("resolved.cfg", resolved_text);
  const auto out3 = tmp.sub("run3");
  CHECK(run_args({"bench", "rosenbrock", "--config", cfg2, "--out", out3}) == 0);
  CHECK(slurp(out1 + "/rosenbrock_cells.csv") == slurp(out3 + "/rosenbrock_cells.csv"));

  // Trajectory CSVs have the pinned column set.
  const auto files = manifest["outputs"];
  bool saw_trajectory = false;
  for (const auto& f : files) {
    const std::string name = f.get<std::string>();
    if (name.rfind("trajectory_", 0) == 0) {
      saw_trajectory = true;
      const auto t = read_csv(out1 + "/" + name);
      CHECK(t.header == std::vector<std::string>{"step", "loss", "update_inf_norm",
                                                 "dist_to_opt", "regret", "status"});
      CHECK(t.rows.back()[t.column("status")] != "running");
    }
  }
  CHECK(saw_trajectory);
}

TEST_CASE("regret bench writes checkpoint rows for every seed") {
  TempDir tmp;
  const auto cfg = tmp.file("rg.cfg", "horizon = 2000\nseeds = 2\ndim = 3\n");
  const auto out = tmp.sub("out");
  CHECK(run_args({"bench", "regret", "--config", cfg, "--out", out}) == 0);
  const auto table = read_csv(out + "/regret_checkpoints.csv");
  CHECK(table.rows.size() > 4);
  CHECK(table.rows.back()[table.column("T")] == "2000");
}

TEST_CASE("verify subcommand writes one json per battery and exits by outcome") {
  TempDir tmp;
  const auto out = tmp.sub("verify");
  CHECK(run_args({"verify", "equivalence", "--out", out}) == 0);
  CHECK(fs::exists(fs::path(out) / "equivalence.json"));
  const auto j = nlohmann::json::parse(slurp(out + "/equivalence.json"));
  CHECK(j["pass"].get<bool>());
}

TEST_CASE("unknown config key in a bench config is a config error") {
  TempDir tmp;
  const auto cfg = tmp.file("bad.cfg", "sigma = 0.04\nnosuchkey = 3\n");
  CHECK(run_args({"bench", "rosenbrock", "--config", cfg, "--out", tmp.sub("o")}) == 1);
}
