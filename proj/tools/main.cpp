#include <iostream>

#include <CLI11.hpp>

#include "harness.hpp"

int main(int argc, char** argv) {
  using namespace nrsle::harness;
  CLI::App app{"n-radial SLE experiments"};
  app.require_subcommand(1);

  RunRequest request;
  std::string config, out_dir;
  for (const std::string& kind : kinds()) {
    CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", config, "INI file with a [" + kind + "] section")->check(CLI::ExistingFile);
    sub->add_option("--seed", request.seed, "master seed")->capture_default_str();
    sub->add_option("--threads", request.threads, "worker threads")->capture_default_str();
    sub->add_option("--out-dir", out_dir, "base output directory (default $NRSLE_OUT_DIR or ./runs)");
    sub->callback([&request, kind] { request.kind = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  if (!config.empty()) request.config = config;
  if (!out_dir.empty()) request.out_dir = out_dir;

  const RunResult result = run(request);
  if (!result.directory.empty() && result.exit_code != kValidation) std::cout << result.directory.string() << '\n';
  if (!result.message.empty()) std::cerr << result.message << '\n';
  return result.exit_code;
}
