#include "doctest.h"

#include "cli.hpp"

#include <vinestress/dataset.hpp>
#include <vinestress/regimes.hpp>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args)
{
  std::ostringstream out, err;
  const int code = vinestress::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("vinestress_cli_" + name))
  {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write(const std::string& path, const std::string& text)
{
  std::ofstream(path) << text;
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kSource = VINESTRESS_SOURCE_DIR;

// Bivariate t sample shared by several cases.
const TempDir& shared()
{
  static TempDir dir("shared");
  static bool made = false;
  if (!made) {
    const auto r = run({"--seed", "11", "generate", "--config", kSource + "/configs/bivariate_t.cfg",
                        "-n", "3000", "-o", dir / "t.csv"});
    REQUIRE(r.code == 0);
    write(dir / "fast.cfg", "optimizer.restarts = 2\noptimizer.iterations = 600\n"
                            "optimizer.patience = 80\n");
    made = true;
  }
  return dir;
}

} // namespace

TEST_CASE("ingest files")
{
  TempDir dir("ingest");
  write(dir / "rates.csv", "date,usd,eur\n2020-01-01,100,2\n2020-01-02,110,1\n2020-01-03,99,1\n");
  write(dir / "values.csv", "date,value\n2020-01-01,5\n2020-01-02,3\n2020-01-03,4\n");
  auto r = run({"ingest", dir / "rates.csv", dir / "values.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("date,usd,eur,loss\n2020-01-02,0.1", 0) == 0);
  CHECK(r.out.find(",-0.5,2\n") != std::string::npos);

  write(dir / "values.csv", "date,value\n2020-01-01,5\n2020-01-04,3\n2020-01-03,4\n");
  r = run({"ingest", dir / "rates.csv", dir / "values.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("2020-01-04") != std::string::npos);
}

TEST_CASE("usage errors exit with status 1, help with 0")
{
  CHECK(run({}).code == 1);
  CHECK(run({"no-such-command"}).code == 1);
  CHECK(run({"estimate", "x.csv", "--method", "cm1", "--level", "0.01", "--bogus"}).code == 1);
  CHECK(run({"estimate", "missing.csv", "--method", "cm1", "--level", "0.01"}).code == 1);
  CHECK(run({"estimate", "x.csv", "--method", "cm1", "--level", "0.1", "--threshold", "2"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  TempDir dir("usage");
  write(dir / "bad.csv", "date,a,loss\n2020-01-01,1,oops\n");
  const auto r = run({"dependence", dir / "bad.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  write(dir / "bad.cfg", "generator = bivariate_t\nreplicatoins = 3\n");
  const auto s = run({"simulate-study", dir / "bad.cfg"});
  CHECK(s.code == 1);
  CHECK(s.err.find("replicatoins") != std::string::npos);
}

TEST_CASE("generate is deterministic in the seed")
{
  TempDir dir("generate");
  const auto a = run({"--seed", "5", "generate", "--dim", "3", "-n", "50"});
  const auto b = run({"--seed", "5", "generate", "--dim", "3", "-n", "50"});
  const auto c = run({"--seed", "6", "generate", "--dim", "3", "-n", "50"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(a.out.rfind("date,x1,x2,x3,loss\n2010-01-01,", 0) == 0);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 51);
}

TEST_CASE("estimate cm2 reaches the threshold exactly and is reproducible")
{
  const auto& dir = shared();
  const auto a = run({"--seed", "2", "estimate", dir / "t.csv", "--method", "cm2", "--level", "0.01",
                      "--config", dir / "fast.cfg"});
  REQUIRE(a.code == 0);
  const auto j = json::parse(a.out);
  CHECK(j["method"] == "cm2");
  CHECK(j["level"] == 0.01);
  const double l = j["threshold"];
  CHECK(j["fitted_loss"].get<double>() == doctest::Approx(l).epsilon(1e-9));
  CHECK(j["scenario"].size() == 2);

  // Threshold: empirical 0.99 quantile (type 7) computed independently.
  std::ifstream in(dir / "t.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> losses;
  while (std::getline(in, line))
    losses.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  std::sort(losses.begin(), losses.end());
  const double pos = 0.99 * (losses.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  CHECK(l == doctest::Approx(losses[k] + (pos - k) * (losses[k + 1] - losses[k])).epsilon(1e-12));

  const auto b = run({"--seed", "2", "estimate", dir / "t.csv", "--method", "cm2", "--level", "0.01",
                      "--config", dir / "fast.cfg"});
  CHECK(a.out == b.out);
  const auto t = run({"estimate", dir / "t.csv", "--method", "gkk", "--threshold", "2.5"});
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out)["threshold"] == 2.5);
  CHECK(json::parse(t.out)["fitted_loss"].is_null());
}

TEST_CASE("fit-marginals, fit-vine and estimate from the saved model")
{
  const auto& dir = shared();
  write(dir / "spec.cfg", "default = skew_t\nmarginal.loss = hybrid\n");
  auto r = run({"fit-marginals", dir / "t.csv", "--spec", dir / "spec.cfg", "-o", dir / "m.json"});
  REQUIRE(r.code == 0);
  const auto m = json::parse(slurp(dir / "m.json"));
  REQUIRE(m["columns"].size() == 3);
  CHECK(m["columns"][0]["kind"] == "skew_t");
  CHECK(m["columns"][2]["kind"] == "hybrid");
  CHECK(m["columns"][2]["name"] == "loss");

  r = run({"fit-vine", dir / "t.csv", dir / "m.json", "-o", dir / "v.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Tree 1") != std::string::npos);
  CHECK(r.out.find("Tree 2") != std::string::npos);
  const auto v = json::parse(slurp(dir / "v.json"));
  CHECK(v["vine"]["model"]["structure"]["dim"] == 3);

  const auto a = run({"--seed", "9", "estimate", dir / "t.csv", "--method", "cm3", "--level", "0.01",
                      "--model", dir / "v.json", "--config", dir / "fast.cfg"});
  REQUIRE(a.code == 0);
  const auto e = json::parse(a.out);
  CHECK(e["method"] == "cm3");
  CHECK(e["fitted_loss"].get<double>() > e["threshold"].get<double>());

  write(dir / "spec_bad.cfg", "marginal.nonexistent = hybrid\n");
  CHECK(run({"fit-marginals", dir / "t.csv", "--spec", dir / "spec_bad.cfg"}).code == 1);
}

TEST_CASE("dependence, cluster and plot")
{
  const auto& dir = shared();
  auto r = run({"dependence", dir / "t.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tau") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);

  r = run({"cluster", dir / "t.csv", "--kernel", "linear"});
  CHECK(r.code == 1);
  CHECK(r.err.find("single component") != std::string::npos);

  // Two regimes on the copula scale, mapped to t4 margins.
  std::mt19937_64 rng(17);
  const auto u = vinestress::simulate_tcop_mixture({0.7, 0.8, -0.8, 4.0, 4.0}, 3000, rng);
  const boost::math::students_t t4(4.0);
  vinestress::Dataset d;
  d.names = {"x1"};
  d.factors.resize(3000, 1);
  d.losses.resize(3000);
  for (int i = 0; i < 3000; ++i) {
    d.dates.push_back("2000-01-01T" + std::to_string(100000 + i));
    d.factors(i, 0) = boost::math::quantile(t4, u(i, 0));
    d.losses(i) = boost::math::quantile(t4, u(i, 1));
  }
  vinestress::save_dataset(dir / "regimes.csv", d);
  r = run({"cluster", dir / "regimes.csv", "--kernel", "linear", "--summary", dir / "fit.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("row,posterior1,posterior2,label\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3001);
  const auto fit = json::parse(slurp(dir / "fit.json"));
  CHECK(fit["params"]["pi"].get<double>() == doctest::Approx(0.7).epsilon(0.1));

  r = run({"estimate", dir / "t.csv", "--method", "gkk", "--level", "0.01", "-o", dir / "g.json"});
  REQUIRE(r.code == 0);
  r = run({"plot", dir / "t.csv", "--estimate", dir / "g.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("<svg") != std::string::npos);
  CHECK(r.out.find("class=\"scenario\"") != std::string::npos);
  CHECK(r.out.find("class=\"threshold\"") != std::string::npos);
  CHECK(r.out.substr(r.out.size() - 7) == "</svg>\n");
}

TEST_CASE("simulate-study prints one row per estimator")
{
  TempDir dir("study");
  const auto r = run({"--seed", "3", "simulate-study", kSource + "/configs/bivariate_t.cfg",
                      "--replications", "2", "-n", "800", "-o", dir / "report.json"});
  REQUIRE(r.code == 0);
  for (const char* m : {"cm1", "cm2", "cm3", "gkk"}) {
    const auto at = r.out.find(std::string("\n") + m);
    CHECK_MESSAGE(at != std::string::npos, m);
  }
  const auto j = json::parse(slurp(dir / "report.json"));
  CHECK(j["methods"].size() == 4);
  CHECK(j["replications"] == 2);
  CHECK(j["truth"][0].get<double>() == doctest::Approx(3.583).epsilon(1e-3));
}
