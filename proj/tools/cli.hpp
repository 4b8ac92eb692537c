#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "roughkit/driver.hpp"
#include "roughkit/rough_path.hpp"

namespace roughkit::cli {

using nlohmann::json;

inline const std::vector<std::string> kCommands{"lift", "young", "integrate", "rde", "flow", "rpde", "check", "convergence"};
inline const std::vector<std::string> kDriverKinds{"exponential", "pure_area", "exp_product", "rotation", "matrix_linear", "zero"};

struct RunConfig {
  std::string command;
  double alpha = 0.45;
  std::array<double, 4> beta{0, 0, 0, 0};
  double T = 1.0;
  int level = 10;

  std::string driver_kind;
  json driver_params = json::object();

  std::vector<double> xi;  // empty: zeros of the driver's dimension
  std::string rde_mode = "onestep";
  bool rde_global = true;

  std::vector<double> grid_lo, grid_hi;  // empty: [-1, 1]^d
  std::size_t grid_count = 5;

  std::string rpde_h = "square";
  std::vector<std::vector<double>> queries;

  int young_n_max = 8;
  std::vector<int> levels{8, 9, 10, 11, 12};

  std::string output_dir = ".";
  bool write_csv = true, write_json = true;
};

// Every schema violation is collected; throws ValidationError listing all of them.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

struct BuiltDriver {
  DriverPtr driver;
  std::optional<RoughPath> rough_path;  // composition kinds only
  std::size_t dim = 1;
};
BuiltDriver build_driver(const RunConfig& cfg, int level);

// Dispatches the command, writes output files, returns the exit code
// (0 success, 1 failed check, errors propagate as exceptions).
int run(const RunConfig& cfg);

// %.17g
std::string format_number(double v);

}  // namespace roughkit::cli
