#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = AAAMS_CLI_PATH;
const std::string kData = AAAMS_TEST_DATA_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("aaams_cli_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cluster smoke run on synthetic points") {
  TempDir dir("smoke");
  REQUIRE(run_cli("synth --components 2 --n 120 --dim 2 --seed 3 --eig-min 0.02 "
                  "--eig-max 0.08 --mean-box 4 --out " + (dir / "pts.csv") +
                  " --truth-out " + (dir / "truth.csv")) == 0);
  REQUIRE(run_cli("cluster --input " + (dir / "pts.csv") +
                  " --sigma-base 0.5 --epsilon 0.5 --out-dir " + (dir / "out") +
                  " --truth " + (dir / "truth.csv")) == 0);
  CHECK(fs::exists(dir / "out/labels.csv"));
  CHECK(fs::exists(dir / "out/modes.csv"));
  CHECK(fs::exists(dir / "out/ellipses.csv"));
  CHECK(fs::exists(dir / "out/clusters.json"));
  CHECK(fs::exists(dir / "out/diagnostics.jsonl"));
  CHECK(fs::exists(dir / "out/metrics.json"));
  const auto metrics = nlohmann::json::parse(slurp(dir / "out/metrics.json"));
  CHECK(metrics.contains("pri"));
  CHECK(metrics.contains("gce"));
  CHECK(metrics.contains("voi"));
  CHECK(metrics.contains("ari"));
  CHECK(metrics.contains("cluster_count"));
  // outputs parse back per their schemas
  const auto clusters = nlohmann::json::parse(slurp(dir / "out/clusters.json"));
  CHECK(clusters.is_array());
  std::ifstream diag(dir / "out/diagnostics.jsonl");
  std::string line;
  int diag_lines = 0;
  while (std::getline(diag, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("alive_count"));
    ++diag_lines;
  }
  CHECK(diag_lines >= 1);
}

TEST_CASE("image run emits segmentation artifacts") {
  TempDir dir("image");
  REQUIRE(run_cli("cluster --image " + kData + "/scene1.ppm --params 15,16,1,81 "
                  "--db 1 --min-size 10 --out-dir " + (dir / "out") +
                  " --truth " + kData + "/scene1_truth.pgm") == 0);
  CHECK(fs::exists(dir / "out/labels.png"));
  CHECK(fs::exists(dir / "out/segment.png"));
  const auto metrics = nlohmann::json::parse(slurp(dir / "out/metrics.json"));
  CHECK(metrics.contains("bde"));
  CHECK(metrics["cluster_count"].get<int>() >= 3);
}

TEST_CASE("missing files exit with code 2") {
  TempDir dir("missing");
  CHECK(run_cli("cluster --input /nonexistent/points.csv --sigma-base 1 "
                "--out-dir " + (dir / "out")) == 2);
  CHECK(run_cli("cluster --image /nonexistent/image.png --out-dir " +
                (dir / "out")) == 2);
  CHECK(run_cli("sweep --image /nonexistent.ppm --values 1,2 --out " +
                (dir / "s.csv")) == 2);
}

TEST_CASE("empty sweep grid exits with code 2") {
  TempDir dir("sweepempty");
  CHECK(run_cli("sweep --image " + kData + "/scene1.ppm --out " +
                (dir / "s.csv")) == 2);
}

TEST_CASE("sweep emits one row per setting") {
  TempDir dir("sweep");
  REQUIRE(run_cli("sweep --image " + kData + "/scene2.ppm --param eps_s2 "
                  "--values 49,81 --out " + (dir / "sweep.csv")) == 0);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "param,value,cluster_count,mean_cluster_size,iterations");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("synth is seed-deterministic and supports zero covariance") {
  TempDir dir("synth");
  REQUIRE(run_cli("synth --components 2 --n 50 --dim 3 --seed 11 --out " +
                  (dir / "a.csv") + " --truth-out " + (dir / "at.csv")) == 0);
  REQUIRE(run_cli("synth --components 2 --n 50 --dim 3 --seed 11 --out " +
                  (dir / "b.csv") + " --truth-out " + (dir / "bt.csv")) == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "at.csv") == slurp(dir / "bt.csv"));

  REQUIRE(run_cli("synth --components 1 --n 20 --dim 2 --seed 5 --eig-min 0 "
                  "--eig-max 0 --out " + (dir / "z.csv") + " --truth-out " +
                  (dir / "zt.csv")) == 0);
  std::ifstream in(dir / "z.csv");
  std::string first, line;
  std::getline(in, first);
  int count = 1;
  while (std::getline(in, line)) {
    CHECK(line == first);  // n copies of the mean
    ++count;
  }
  CHECK(count == 20);
}

TEST_CASE("synth sample covariance approaches the requested one") {
  TempDir dir("lln");
  REQUIRE(run_cli("synth --components 1 --n 100000 --dim 2 --seed 9 "
                  "--eig-min 0.5 --eig-max 2.0 --mean-box 0.01 --out " +
                  (dir / "big.csv") + " --truth-out " + (dir / "bt.csv")) == 0);
  // sample covariance eigenvalues land within 2% of the requested range
  std::ifstream in(dir / "big.csv");
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  int n = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double x = std::stod(line.substr(0, comma));
    const double y = std::stod(line.substr(comma + 1));
    sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
    ++n;
  }
  const double mx = sx / n, my = sy / n;
  const double cxx = sxx / n - mx * mx;
  const double cyy = syy / n - my * my;
  const double cxy = sxy / n - mx * my;
  const double tr = cxx + cyy;
  const double det = cxx * cyy - cxy * cxy;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  const double lo = tr / 2 - disc, hi = tr / 2 + disc;
  CHECK(lo > 0.5 * 0.95);
  CHECK(hi < 2.0 * 1.05);
}

TEST_CASE("identical seeded runs produce byte-identical outputs") {
  TempDir dir("determinism");
  const std::string base = "cluster --image " + kData + "/scene3.ppm "
                           "--params 15,16,1,81 --db 1 --min-size 10 --seed 7 ";
  REQUIRE(run_cli(base + "--out-dir " + (dir / "r1")) == 0);
  REQUIRE(run_cli(base + "--out-dir " + (dir / "r2")) == 0);
  CHECK(slurp(dir / "r1/labels.png") == slurp(dir / "r2/labels.png"));
  CHECK(slurp(dir / "r1/clusters.json") == slurp(dir / "r2/clusters.json"));
  CHECK(slurp(dir / "r1/modes.csv") == slurp(dir / "r2/modes.csv"));
}

TEST_CASE("config file values are overridden by explicit flags") {
  TempDir dir("config");
  REQUIRE(run_cli("synth --components 1 --n 40 --dim 2 --seed 2 --eig-min 0.05 "
                  "--eig-max 0.1 --out " + (dir / "pts.csv") + " --truth-out " +
                  (dir / "t.csv")) == 0);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "sigma-base=0.4\n";
    cfg << "min-size=1\n";
  }
  REQUIRE(run_cli("cluster --input " + (dir / "pts.csv") + " --config " +
                  (dir / "run.cfg") + " --out-dir " + (dir / "o1")) == 0);
  // flag beats the file: absurd sigma from the flag must change the labels
  REQUIRE(run_cli("cluster --input " + (dir / "pts.csv") + " --config " +
                  (dir / "run.cfg") + " --sigma-base 100 --out-dir " +
                  (dir / "o2")) == 0);
  const auto j1 = nlohmann::json::parse(slurp(dir / "o1/clusters.json"));
  const auto j2 = nlohmann::json::parse(slurp(dir / "o2/clusters.json"));
  CHECK(j2.size() <= j1.size());
}
