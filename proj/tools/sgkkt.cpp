#include <sgkkt/sgkkt.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sgkkt::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-Galerkin optimal control KKT solver benchmarks"};
  app.set_version_flag("--version", std::string("sgkkt ") + SGKKT_VERSION);
  app.require_subcommand(1);

  std::string run_cfg, run_format = "csv", run_out;
  auto* run = app.add_subcommand("run", "Solve the configured problem for every preconditioner setting");
  run->add_option("config", run_cfg, "Config file")->required();
  run->add_option("--format", run_format, "Table format")->check(CLI::IsMember({"csv", "markdown"}));
  run->add_option("--out", run_out, "Output path (default: config 'output' key, else stdout)");

  std::string spec_cfg, spec_format = "text", spec_out;
  auto* spectra = app.add_subcommand("spectra", "Dense spectral bound checks on a small instance");
  spectra->add_option("config", spec_cfg, "Config file")->required();
  spectra->add_option("--format", spec_format, "Report format")->check(CLI::IsMember({"text", "csv"}));
  spectra->add_option("--out", spec_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      const sgkkt::ExperimentConfig cfg = sgkkt::parse_config(read_file(run_cfg));
      const auto rows = sgkkt::run_experiment(cfg);
      const auto fmt = run_format == "csv" ? sgkkt::TableFormat::Csv : sgkkt::TableFormat::Markdown;
      write_output(sgkkt::emit_table(rows, fmt), run_out.empty() ? cfg.output : run_out);
    } else if (*spectra) {
      const sgkkt::ExperimentConfig cfg = sgkkt::parse_config(read_file(spec_cfg));
      const auto reports = sgkkt::run_spectra(cfg);
      write_output(spec_format == "csv" ? sgkkt::reports_csv(reports) : sgkkt::reports_text(reports), spec_out);
    }
  } catch (const sgkkt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
