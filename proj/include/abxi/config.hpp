#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "abxi/corpus.hpp"
#include "abxi/model.hpp"
#include "abxi/trainer.hpp"

namespace abxi {

// Everything a pipeline command needs. `input` is either a raw interaction
// file (CSV / JSON-lines) or a preprocessed corpus (`*.corpus.json`).
struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path workdir = ".";
  DomainMap domains;
  PreprocessOptions preprocess;
  ModelConfig model;
  TrainConfig train;
  std::string variant = "ABXI";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Collects every problem before throwing one ConfigError listing them all.
void validate(const RunConfig& c, bool require_input = true);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const PreprocessOptions& o);
PreprocessOptions preprocess_options_from_json(const nlohmann::json& j);

// Workdir resolution: ABXI_WORKDIR overrides the configured directory.
inline constexpr const char* kWorkdirEnv = "ABXI_WORKDIR";
std::filesystem::path resolve_workdir(const std::filesystem::path& configured);

// Loads `input` as a corpus: preprocessed JSON is read directly, anything
// else is parsed as raw interactions and preprocessed.
Corpus load_input_corpus(const RunConfig& c);

}  // namespace abxi
