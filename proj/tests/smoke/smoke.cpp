// End-to-end run of the installed command-line tool on synthetic data of the
// shape of the real portfolios (n = 3000, d in {4, 5, 18}).

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what)
{
  std::cout << (ok ? "  ok   " : "  FAIL ") << what << std::endl;
  failures += !ok;
}

std::string quote(const std::string& s)
{
  return "'" + s + "'";
}

int sh(const std::string& args, const fs::path& log)
{
  const std::string cmd = quote(VINESTRESS_CLI) + " " + args + " >" + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool json_ok(const fs::path& p)
{
  try {
    const auto j = nlohmann::json::parse(slurp(p));
    return !j.is_discarded();
  } catch (...) {
    return false;
  }
}

void run_dimension(int d, const fs::path& dir, bool all_methods)
{
  std::cout << "d = " << d << std::endl;
  const auto p = [&](const std::string& f) { return quote((dir / f).string()); };
  const fs::path log = dir / "log.txt";
  const std::string data = p("data.csv");

  check(sh("--seed " + std::to_string(d) + " generate --dim " + std::to_string(d) +
               " --rho 0.3 -n 3000 -o " + data, log) == 0, "generate");
  const bool dep_ok = sh("dependence " + data, log) == 0;
  const auto table = slurp(log);
  check(dep_ok && std::count(table.begin(), table.end(), '\n') == d + 1, "dependence table");
  std::ofstream(dir / "spec.cfg") << "default = skew_t\nmarginal.loss = hybrid\n";
  check(sh("fit-marginals " + data + " --spec " + p("spec.cfg") + " -o " + p("marg.json"), log) == 0 &&
            json_ok(dir / "marg.json"),
        "fit-marginals");
  check(sh("fit-vine " + data + " " + p("marg.json") + " -o " + p("vine.json"), log) == 0 &&
            json_ok(dir / "vine.json") && slurp(log).find("Tree " + std::to_string(d)) != std::string::npos,
        "fit-vine with tree listing");
  std::ofstream(dir / "opt.cfg") << "optimizer.restarts = 1\noptimizer.iterations = 300\n"
                                    "optimizer.patience = 50\n";
  const std::vector<std::string> methods =
      all_methods ? std::vector<std::string>{"cm1", "cm2", "cm3", "gkk"} : std::vector<std::string>{"cm2", "gkk"};
  std::string marks;
  for (const auto& m : methods) {
    const std::string out = "est_" + m + ".json";
    const int rc = sh("--seed 1 estimate " + data + " --method " + m + " --level 0.01 --model " +
                          p("vine.json") + " --config " + p("opt.cfg") + " -o " + p(out),
                      log);
    bool ok = rc == 0 && json_ok(dir / out);
    if (ok) {
      const auto j = nlohmann::json::parse(slurp(dir / out));
      ok = j["scenario"].size() == static_cast<std::size_t>(d);
      if (m == "cm2")
        ok = ok && std::abs(j["fitted_loss"].get<double>() - j["threshold"].get<double>()) <=
                       1e-9 * (1 + std::abs(j["threshold"].get<double>()));
    }
    check(ok, "estimate " + m + (m == "cm2" ? " (fitted_loss = threshold)" : ""));
    marks += " --estimate " + p(out);
  }
  check(sh("cluster " + data + " --kernel linear -o " + p("clusters.csv"), log) != 2, "cluster (no internal error)");
  check(sh("--seed 2 bootstrap-ci " + data + " --method gkk --level 0.01 -B 50 -o " + p("ci.json"), log) == 0 &&
            json_ok(dir / "ci.json"),
        "bootstrap-ci");
  check(sh("plot " + data + marks + " -o " + p("plot.svg"), log) == 0 &&
            slurp(dir / "plot.svg").find("<svg") != std::string::npos,
        "plot");
}

} // namespace

int main()
{
  const fs::path root = fs::temp_directory_path() / "vinestress_smoke";
  for (int d : {4, 5, 18}) {
    const fs::path dir = root / std::to_string(d);
    fs::remove_all(dir);
    fs::create_directories(dir);
    run_dimension(d, dir, d < 18);
  }
  const fs::path log = root / "log.txt";
  check(sh("estimate " + quote((root / "4" / "data.csv").string()) + " --method cm9 --level 0.01", log) == 1,
        "unknown method exits 1");
  check(sh("--no-such-flag", log) == 1, "unknown flag exits 1");
  if (failures == 0)
    fs::remove_all(root);
  std::cout << (failures == 0 ? "smoke: all passed" : "smoke: failures") << std::endl;
  return failures == 0 ? 0 : 1;
}
