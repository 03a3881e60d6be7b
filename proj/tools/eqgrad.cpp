#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "eqgrad/runner.hpp"

using namespace eqgrad;

namespace {

std::map<std::string, double> parse_tolerances(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--tol", "expected KEY=VAL, got " + item);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw CLI::ValidationError("--tol", "bad value in " + item);
    }
    if (!(v > 0.0)) throw CLI::ValidationError("--tol", "tolerance must be positive: " + item);
    out[item.substr(0, eq)] = v;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant gradient flow experiments: batch runner over scenario files"};
  app.set_version_flag("--version", std::string(eqgrad_version));
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tol_items;
  int parallel = 1;
  bool no_timing = false;
  app.add_option("--out", out_path, "write the report here instead of standard output");
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--tol", tol_items, "tolerance override KEY=VAL (repeatable)")->allow_extra_args(false);
  app.add_option("--parallel", parallel, "scenarios run concurrently by suite")->check(CLI::Range(1, 64));
  app.add_flag("--no-timing", no_timing, "omit timing fields");

  std::string file;
  std::string command;
  for (const char* kind : {"chi", "classify", "genericity", "resonance", "normal-form", "thick", "variation",
                           "aut-reduce"}) {
    auto* sub = app.add_subcommand(kind, std::string("run a '") + kind + "' scenario");
    sub->add_option("scenario", file, "scenario file")->required();
    sub->callback([&command, kind] { command = kind; });
  }
  auto* torus = app.add_subcommand("torus", "torus experiments");
  torus->require_subcommand(1);
  torus->fallthrough();
  auto* torus_run = torus->add_subcommand("run", "run a 'torus' scenario");
  torus_run->add_option("scenario", file, "scenario file")->required();
  torus_run->callback([&command] { command = "torus"; });
  std::string directory;
  auto* suite = app.add_subcommand("suite", "run every *.scn file of a directory");
  suite->add_option("directory", directory, "scenario directory")->required();
  suite->callback([&command] { command = "suite"; });

  RunOptions opt;
  try {
    app.parse(argc, argv);
    opt.tolerances = parse_tolerances(tol_items);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : exit_input;
  }
  opt.seed = seed;
  opt.timing = !no_timing;

  RunResult r = command == "suite" ? run_suite(directory, opt, parallel) : run_file(file, opt, command);
  std::string text = r.report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return exit_input;
    }
    out << text;
  }
  if (r.exit_code != exit_pass && r.report.contains("error"))
    std::cerr << r.report["error"]["kind"].get<std::string>() << ": " << r.report["error"]["message"].get<std::string>()
              << "\n";
  return r.exit_code;
}
