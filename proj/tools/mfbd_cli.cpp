#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfbd/commands.hpp"
#include "mfbd/config.hpp"
#include "mfbd/error.hpp"

namespace {

using mfbd::CommandResult;
using mfbd::ExperimentConfig;

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mfbd::ResourceError("cannot write " + path.string());
  out << content;
}

void emit(const CommandResult& r, const ExperimentConfig& config) {
  const std::filesystem::path dir(config.output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw mfbd::ResourceError("cannot create output directory " + dir.string() + ": " + ec.message());
  if (!r.csv.empty()) write_file(dir / (r.name + ".csv"), r.csv);
  if (!r.json.empty()) write_file(dir / (r.name + ".json"), r.json);
  std::cout << r.summary;
  if (!r.csv.empty()) std::cout << "wrote " << (dir / (r.name + ".csv")).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multifractal birth-death cascades: simulation, scaling estimation and analytic checks"};
  app.set_version_flag("--version", mfbd::version_string());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON config file (a CSV written by this tool also works)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--workers", workers, "Worker threads (does not change results)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");

  struct Entry {
    const char* name;
    const char* help;
    CommandResult (*run)(const ExperimentConfig&);
  };
  const Entry entries[] = {
      {"validate", "Analytic identity suite", mfbd::cmd_validate},
      {"renyi", "Estimate T(q) by partition-sum regression", mfbd::cmd_renyi},
      {"spectrum", "Legendre transform of the analytic Renyi function", mfbd::cmd_spectrum},
      {"covariance", "Empirical vs spectral covariance of the mother process", mfbd::cmd_covariance},
      {"reference-curves", "She-Leveque and Kolmogorov structure-function exponents", mfbd::cmd_reference_curves},
      {"poly-table", "Orthogonal polynomial values, norms and eigenrates", mfbd::cmd_poly_table},
  };
  for (const Entry& e : entries) app.add_subcommand(e.name, e.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mfbd::exit_code::kSuccess : mfbd::exit_code::kConfig;
  }

  try {
    ExperimentConfig config = mfbd::load_config(config_path);
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (out_dir) config.output = *out_dir;
    for (const Entry& e : entries) {
      if (app.got_subcommand(e.name)) {
        const CommandResult r = e.run(config);
        emit(r, config);
        return r.exit_code;
      }
    }
    return mfbd::exit_code::kInternal;
  } catch (const mfbd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfbd::exit_code::kConfig;
  } catch (const mfbd::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return mfbd::exit_code::kDomain;
  } catch (const mfbd::ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return mfbd::exit_code::kValidation;
  } catch (const mfbd::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return mfbd::exit_code::kResource;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return mfbd::exit_code::kInternal;
  }
}
