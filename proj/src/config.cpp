#include "abxi/config.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "abxi/ablation.hpp"
#include "abxi/error.hpp"

namespace abxi {

void validate(const RunConfig& c, bool require_input) {
  std::vector<std::string> problems;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      problems.emplace_back(e.what());
    }
  };
  if (require_input) {
    if (c.input.empty()) {
      problems.emplace_back("input path is not set");
    } else if (!std::filesystem::exists(c.input)) {
      problems.push_back(fmt::format("input '{}' does not exist", c.input.string()));
    }
  }
  if (c.preprocess.min_item_count < 1) problems.emplace_back("preprocess.min_item_count must be >= 1");
  if (c.preprocess.max_len < 3) problems.emplace_back("preprocess.max_len must be >= 3");
  if (c.preprocess.max_len > c.model.max_len) {
    problems.push_back(fmt::format("preprocess.max_len ({}) exceeds model.max_len ({})", c.preprocess.max_len,
                                   c.model.max_len));
  }
  check([&] {
    // Item counts are bound later from the corpus; validate the rest.
    ModelConfig m = build_variant(c.variant, c.model);
    m.n_items_a = std::max(m.n_items_a, 1);
    m.n_items_b = std::max(m.n_items_b, 1);
    m.validate();
  });
  check([&] { c.train.validate(); });
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

nlohmann::json to_json(const PreprocessOptions& o) {
  return {{"min_item_count", o.min_item_count}, {"max_len", o.max_len}, {"min_user_len", o.min_user_len}};
}

PreprocessOptions preprocess_options_from_json(const nlohmann::json& j) {
  PreprocessOptions o;
  try {
    if (j.contains("min_item_count")) o.min_item_count = j.at("min_item_count").get<int>();
    if (j.contains("max_len")) o.max_len = j.at("max_len").get<int>();
    if (j.contains("min_user_len")) o.min_user_len = j.at("min_user_len").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid preprocess options: ") + e.what());
  }
  return o;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json domains = nlohmann::json::object();
  for (const auto& [label, d] : c.domains) domains[label] = std::string(domain_name(d));
  return {{"input", c.input.string()},
          {"workdir", c.workdir.string()},
          {"domains", domains},
          {"preprocess", to_json(c.preprocess)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"variant", c.variant}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("input")) c.input = j.at("input").get<std::string>();
    if (j.contains("workdir")) c.workdir = j.at("workdir").get<std::string>();
    if (j.contains("domains")) {
      for (const auto& [label, v] : j.at("domains").items()) {
        try {
          c.domains[label] = parse_domain(v.get<std::string>());
        } catch (const DataError& e) {
          throw ConfigError(fmt::format("domains.{}: {}", label, e.what()));
        }
      }
    }
    if (j.contains("variant")) c.variant = j.at("variant").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  if (j.contains("preprocess")) c.preprocess = preprocess_options_from_json(j.at("preprocess"));
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  RunConfig c = run_config_from_json(j);
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  if (!c.input.empty() && c.input.is_relative()) c.input = base / c.input;
  if (c.workdir.is_relative()) c.workdir = base / c.workdir;
  return c;
}

std::filesystem::path resolve_workdir(const std::filesystem::path& configured) {
  if (const char* env = std::getenv(kWorkdirEnv); env != nullptr && *env != '\0') return env;
  return configured;
}

Corpus load_input_corpus(const RunConfig& c) {
  const std::string name = c.input.filename().string();
  if (name.size() >= 12 && name.ends_with(".corpus.json")) return load_corpus(c.input);
  return preprocess(load_interactions_file(c.input, c.domains), c.preprocess);
}

}  // namespace abxi
