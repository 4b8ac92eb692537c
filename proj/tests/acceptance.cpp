// One line per acceptance criterion. Known failures are printed as FAIL and
// do not change the exit status; any other failure does.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "roughkit/parallel.hpp"
#include "suite.hpp"

#ifndef ROUGHKIT_CLI_PATH
#error "ROUGHKIT_CLI_PATH must name the CLI binary"
#endif

namespace fs = std::filesystem;
using namespace roughkit::suite;

namespace {

constexpr double kCheckBudget = 300.0;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CheckRun {
  int status = -1;
  double seconds = 0.0;
  std::string csv;
};

CheckRun run_check(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path cfg = dir / "check.json";
  std::ofstream(cfg) << R"({"command": "check", "driver": {"kind": "pure_area", "a": 1.0}})";
  const std::string cmd = std::string(ROUGHKIT_CLI_PATH) + " " + cfg.string() + " -o " + dir.string() + " > " + (dir / "log.txt").string() + " 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  CheckRun r;
  const int raw = std::system(cmd.c_str());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.csv = slurp(dir / "check.csv");
  return r;
}

void print_rows(const CriterionResult& r) {
  for (const auto& row : r.rows)
    std::printf("      %-6s %s: %.6g %s %.6g\n", row.pass ? "ok" : (row.known_failure ? "known" : "FAIL"), row.name.c_str(), row.value,
                to_string(row.relation), row.bound);
  if (!r.error.empty()) std::printf("      error: %s\n", r.error.c_str());
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  roughkit::configure_threads();
  int fatal = 0, failed = 0;
  for (const auto& c : criteria()) {
    const CriterionResult r = run_timed(c);
    const bool in_time = r.seconds <= r.budget_s;
    const bool ok = r.pass() && in_time;
    const bool known_only = !ok && in_time && !r.fatal_failure();
    std::printf("[%s] criterion %d: %s (%.1f s, budget %.0f s)%s\n", ok ? "PASS" : "FAIL", r.id, r.title.c_str(), r.seconds, r.budget_s,
                known_only ? " [known failure]" : "");
    print_rows(r);
    if (!ok) ++failed;
    if (!ok && !known_only) ++fatal;
  }

  const fs::path base = fs::temp_directory_path() / ("roughkit_acceptance_" + std::to_string(::getpid()));
  const CheckRun a = run_check(base / "run1");
  const CheckRun b = run_check(base / "run2");
  const bool same = !a.csv.empty() && a.csv == b.csv;
  // exit 1 only reports known failures inside the suite; the run itself completed
  const bool completed = (a.status == 0 || a.status == 1) && (b.status == 0 || b.status == 1);
  const bool ok10 = completed && same && a.seconds <= kCheckBudget && b.seconds <= kCheckBudget;
  std::printf("[%s] criterion 10: check suite via the CLI, twice (%.1f s, %.1f s, budget %.0f s)\n", ok10 ? "PASS" : "FAIL", a.seconds,
              b.seconds, kCheckBudget);
  std::printf("      %-6s exit codes %d, %d\n", completed ? "ok" : "FAIL", a.status, b.status);
  std::printf("      %-6s check.csv bit-identical across runs (%zu bytes)\n", same ? "ok" : "FAIL", a.csv.size());
  if (!ok10) {
    ++failed;
    ++fatal;
  }
  std::error_code ec;
  fs::remove_all(base, ec);

  std::printf("%d of 10 criteria pass, %d failing, %d unexpected\n", 10 - failed, failed, fatal);
  return fatal == 0 ? 0 : 1;
}
