// Command-line front end: prepare, train-classifier, train-flow, generate,
// evaluate and benchmark. Exit codes: 0 success, 1 runtime failure,
// 2 usage or validation error.

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "csdg/config.hpp"
#include "csdg/error.hpp"
#include "csdg/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

csdg::RunConfig resolve(const CommonFlags& flags) {
  csdg::RunConfig config =
      flags.config.empty() ? csdg::RunConfig{} : csdg::load_config(flags.config);
  if (flags.seed) config.seed = flags.seed;
  if (!flags.out.empty()) config.out = flags.out;
  config.master_seed();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-conditional synthetic tabular data: flows conditioned on classifier features"};
  app.require_subcommand(1);

  using Command = std::function<void(const csdg::RunConfig&, std::ostream&)>;
  const std::pair<const char*, const char*> names[] = {
      {"prepare", "Split the labeled CSV into stratified train/test files"},
      {"train-classifier", "Train and freeze the feature-extracting classifier"},
      {"train-flow", "Train the conditional flow on classifier features"},
      {"generate", "Sample class-conditional synthetic rows"},
      {"evaluate", "Compare real- and synthetic-trained classifiers on the hold-out set"},
      {"benchmark", "Run the whole pipeline on a generated imbalanced benchmark"},
  };
  const Command commands[] = {csdg::cmd_prepare, csdg::cmd_train_classifier,
                              csdg::cmd_train_flow, csdg::cmd_generate,
                              csdg::cmd_evaluate, csdg::cmd_benchmark};

  CommonFlags flags;
  Command selected;
  for (std::size_t i = 0; i < std::size(names); ++i) {
    CLI::App* sub = app.add_subcommand(names[i].first, names[i].second);
    sub->add_option("--config", flags.config, "Configuration file (key = value lines)");
    sub->add_option("--seed", flags.seed, "Master seed; overrides the config file");
    sub->add_option("--out", flags.out, "Output directory; overrides the config file");
    sub->callback([&, i] { selected = commands[i]; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    selected(resolve(flags), std::cout);
  } catch (const csdg::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
