#include <iostream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "roughkit/types.hpp"

// Exit codes: 0 success, 1 failed check, 2 invalid input, 3 numerical failure.
int main(int argc, char** argv) {
  CLI::App app{"roughkit: rough path, nonlinear rough integral, RDE and transport RPDE runs from JSON configs"};
  std::string config_path, out_dir;
  app.add_option("config", config_path, "JSON run configuration")->required();
  app.add_option("-o,--output-dir", out_dir, "overrides output.dir");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    auto cfg = roughkit::cli::parse_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return roughkit::cli::run(cfg);
  } catch (const roughkit::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const roughkit::HypothesisError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const roughkit::ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
