#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "promptseg/config.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/run.hpp"

namespace {

using promptseg::Command;

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;
};

void emit_error(const std::string& type, const std::string& message, const std::string& out_dir) {
  const nlohmann::json j{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  if (!out_dir.empty() && std::filesystem::is_directory(out_dir)) {
    std::ofstream f(out_dir + "/error.json");
    f << j.dump(2) << "\n";
  }
}

/// Leftover arguments of the form --section.key=value become overrides.
void collect_extras(CLI::App& app, std::vector<std::string>& overrides) {
  for (const std::string& extra : app.remaining()) {
    if (extra.rfind("--", 0) == 0 && extra.find('=') != std::string::npos &&
        extra.find('.') != std::string::npos) {
      overrides.push_back(extra.substr(2));
    } else {
      throw promptseg::ConfigError("unrecognized argument: " + extra);
    }
  }
}

void add_common(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "JSON config file");
  cmd->add_option("--set", state.overrides, "Override as section.key=value (repeatable)");
  cmd->allow_extras();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptseg: text-prompted zero-shot segment selection"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    Command command;
    CliState state;
  };
  std::vector<Sub> subs;

  auto add_sub = [&](const std::string& name, Command command, const std::string& desc) -> Sub& {
    subs.push_back(Sub{app.add_subcommand(name, desc), command, {}});
    Sub& sub = subs.back();
    add_common(sub.cmd, sub.state);
    return sub;
  };

  auto& train = add_sub("train-clip", Command::kTrainClip,
                        "Fine-tune the projection heads on an image/caption manifest");
  train.cmd->add_option_function<std::string>(
      "--manifest", [&](const std::string& v) { train.state.overrides.push_back("data.manifest=" + v); });
  auto& grid = add_sub("grid-search", Command::kGridSearch,
                       "Train every (learning rate, projection dim) grid cell and report");
  auto& segment =
      add_sub("segment", Command::kSegment, "Select the segment matching a text prompt");
  segment.cmd->add_option_function<std::string>(
      "--image", [&](const std::string& v) { segment.state.overrides.push_back("segment.image=" + v); });
  segment.cmd->add_option_function<std::string>(
      "--prompt", [&](const std::string& v) { segment.state.overrides.push_back("segment.prompt=" + v); });
  segment.cmd->add_option_function<std::string>("--checkpoint", [&](const std::string& v) {
    segment.state.overrides.push_back("segment.checkpoint=" + v);
  });
  segment.cmd->add_option_function<std::string>(
      "--masks", [&](const std::string& v) { segment.state.overrides.push_back("segment.masks=" + v); });
  segment.cmd->add_option_function<std::string>(
      "--scene", [&](const std::string& v) { segment.state.overrides.push_back("segment.scene=" + v); });
  auto& filter = add_sub("filter-masks", Command::kFilterMasks,
                         "Deduplicate and disjointify a mask proposal file");
  filter.cmd->add_option_function<std::string>(
      "--masks", [&](const std::string& v) { filter.state.overrides.push_back("segment.masks=" + v); });
  auto& evaluate = add_sub("evaluate", Command::kEvaluate,
                           "Composite-image evaluation against a classifier oracle");
  auto& classifier = add_sub("train-classifier", Command::kTrainClassifier,
                             "Train the supervised classifier oracle");
  classifier.cmd->add_option_function<std::string>("--manifest", [&](const std::string& v) {
    classifier.state.overrides.push_back("classifier.manifest=" + v);
  });
  (void)grid;
  (void)evaluate;

  // --out is common sugar for out_dir.
  for (auto& sub : subs) {
    sub.cmd->add_option_function<std::string>(
        "--out", [&sub](const std::string& v) { sub.state.overrides.push_back("out_dir=" + v); });
    sub.cmd->add_option_function<uint64_t>("--seed", [&sub](uint64_t v) {
      sub.state.overrides.push_back("seed=" + std::to_string(v));
    });
  }

  CLI11_PARSE(app, argc, argv);

  promptseg::RunConfig config;
  bool loaded = false;
  for (auto& sub : subs) {
    if (!sub.cmd->parsed()) continue;
    try {
      collect_extras(*sub.cmd, sub.state.overrides);
      config = promptseg::load_config(sub.command, sub.state.config_path, sub.state.overrides);
      promptseg::validate_config(config);
      loaded = true;
    } catch (const std::exception& e) {
      emit_error("ConfigError", e.what(), "");
      return 2;
    }
    break;
  }
  if (!loaded) {
    emit_error("ConfigError", "no subcommand given", "");
    return 2;
  }

  try {
    return promptseg::run(config);
  } catch (const promptseg::ConfigError& e) {
    emit_error("ConfigError", e.what(), config.out_dir);
    return 2;
  } catch (const std::exception& e) {
    emit_error("RuntimeError", e.what(), config.out_dir);
    return 3;
  }
}
