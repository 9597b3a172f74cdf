#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "nsiss/errors.hpp"
#include "nsiss/scenario.hpp"

namespace {

struct SubArgs {
  std::string scenario;
  std::string out_dir = ".";
  std::optional<uint64_t> seed;
};

// One entry per subcommand: the scenario kind it accepts.
const std::vector<std::pair<std::string, std::string>> kSubcommands = {
    {"check", "check"},           {"simulate", "simulate"},
    {"compose", "compose"},       {"lmi", "lmi"},
    {"flower", "flower"},         {"closed-loop", "closed_loop"},
};

int run_sub(const std::string& kind, const SubArgs& args) {
  nlohmann::json sc;
  try {
    sc = nsiss::load_scenario(args.scenario);
  } catch (const nsiss::Error& e) {
    std::fprintf(stderr, "nsiss: %s\n", e.what());
    return 2;
  }
  const auto found = sc.find("kind");
  if (found == sc.end() || !found->is_string() ||
      found->get<std::string>() != kind) {
    std::fprintf(stderr, "nsiss: scenario kind %s does not match this subcommand (wants %s)\n",
                 found != sc.end() && found->is_string()
                     ? found->get<std::string>().c_str()
                     : "(missing)",
                 kind.c_str());
    return 2;
  }
  nsiss::ScenarioOutcome out = nsiss::run_scenario_json(sc, args.out_dir, args.seed);
  if (!out.diagnostic.empty()) std::fprintf(stderr, "nsiss: %s\n", out.diagnostic.c_str());
  if (!out.report_path.empty()) std::printf("report: %s\n", out.report_path.c_str());
  if (!out.csv_path.empty()) std::printf("trajectory: %s\n", out.csv_path.c_str());
  if (out.exit_code == 0)
    std::printf("pass\n");
  else if (out.exit_code == 1)
    std::printf("fail\n");
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certify and simulate switched systems with piecewise Lyapunov functions"};
  app.require_subcommand(1);

  std::vector<std::pair<std::string, SubArgs>> pending;
  pending.reserve(kSubcommands.size());
  for (const auto& [name, kind] : kSubcommands) {
    pending.emplace_back(kind, SubArgs{});
    SubArgs& args = pending.back().second;
    CLI::App* sub = app.add_subcommand(name, "Run a " + kind + " scenario");
    sub->add_option("scenario", args.scenario,
                    "Scenario file, or the name of a builtin")
        ->required();
    sub->add_option("--out", args.out_dir, "Directory for reports")
        ->capture_default_str();
    sub->add_option("--seed", args.seed, "Override every seed in the scenario");
  }

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < pending.size(); ++i)
    if (app.get_subcommands().front() == app.get_subcommand(kSubcommands[i].first))
      return run_sub(pending[i].first, pending[i].second);
  return 2;
}
