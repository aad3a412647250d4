// Command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "d2dcache/d2dcache.h"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out_dir = ".";
  bool quiet = false;
};

int report(d2dc_status s) {
  std::fprintf(stderr, "error: category=%s message=%s\n", d2dc_status_name(s), d2dc_last_error());
  return static_cast<int>(s);
}

int run(const std::string& command, const CommonOptions& opt) {
  d2dc_config* cfg = nullptr;
  d2dc_status s = opt.config_path.empty() ? d2dc_config_default(&cfg)
                                          : d2dc_config_load(opt.config_path.c_str(), &cfg);
  if (s != D2DC_OK) return report(s);
  if (opt.seed) s = d2dc_config_set_seed(cfg, *opt.seed);
  if (s == D2DC_OK && opt.jobs) s = d2dc_config_set_jobs(cfg, *opt.jobs);
  if (s == D2DC_OK) s = d2dc_run_command(cfg, command.c_str(), opt.out_dir.c_str(), !opt.quiet);
  d2dc_config_free(cfg);
  if (s != D2DC_OK) return report(s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individual-preference-aware caching design for clustered D2D networks"};
  app.set_version_flag("--version", std::string(d2dc_version()));
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"optimize", "Design one realized cluster; writes policy.csv, report.json, metrics.csv"},
      {"simulate", "Monte Carlo estimates for a policy under both schedulers"},
      {"sweep-users", "Sweep the number of active users"},
      {"sweep-size", "Sweep the cluster size with power control"},
      {"compare-schedulers", "Paired random-push vs priority-push simulation"},
      {"validate", "Run the invariant suite on small random instances"},
  };

  CommonOptions opt;
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "JSON config file (defaults if omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Global seed (overrides the config)");
    sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opt.quiet, "No progress on standard error");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return static_cast<int>(D2DC_ERR_PARAMETER);
  }
  return run(chosen, opt);
}
