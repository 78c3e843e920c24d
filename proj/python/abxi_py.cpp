#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "abxi/ablation.hpp"
#include "abxi/alignment.hpp"
#include "abxi/checkpoint.hpp"
#include "abxi/cli.hpp"
#include "abxi/config.hpp"
#include "abxi/corpus.hpp"
#include "abxi/error.hpp"
#include "abxi/evaluator.hpp"
#include "abxi/model.hpp"
#include "abxi/objective.hpp"
#include "abxi/synthetic.hpp"
#include "abxi/trainer.hpp"

namespace py = pybind11;
using abxi::Domain;

namespace {

// JSON crosses the boundary as plain Python objects via the json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  if (o.is_none()) return nlohmann::json::object();
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Domain domain_from(const std::string& s) { return abxi::parse_domain(s); }

abxi::TokenSeq tokens_from(const std::vector<std::pair<int, std::string>>& seq) {
  abxi::TokenSeq out;
  out.reserve(seq.size());
  for (const auto& [item, d] : seq) out.push_back({item, domain_from(d)});
  return out;
}

// Corpus plus its leave-one-out split, computed once.
struct PyCorpus {
  abxi::Corpus corpus;
  abxi::Split split;

  explicit PyCorpus(abxi::Corpus c) : corpus(std::move(c)), split(abxi::split_leave_one_out(corpus)) {}
};

using Row = std::tuple<std::string, std::string, std::string, std::int64_t>;

std::vector<abxi::Interaction> interactions_from(const std::vector<Row>& rows) {
  std::vector<abxi::Interaction> log;
  log.reserve(rows.size());
  for (const auto& [user, item, d, ts] : rows) log.push_back({user, item, domain_from(d), ts});
  return log;
}

std::vector<Row> rows_from(const std::vector<abxi::Interaction>& log) {
  std::vector<Row> rows;
  rows.reserve(log.size());
  for (const auto& i : log) rows.emplace_back(i.user_id, i.item_id, std::string(abxi::domain_name(i.domain)), i.timestamp);
  return rows;
}

abxi::EvalMode parse_mode(const std::string& s) {
  if (s == "val") return abxi::EvalMode::kValidation;
  if (s == "test") return abxi::EvalMode::kTest;
  throw abxi::ConfigError("split must be 'val' or 'test', got '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_abxi, m) {
  m.doc() = "Cross-domain sequential recommender core";

  auto base = py::register_exception<abxi::Error>(m, "AbxiError", PyExc_RuntimeError);
  py::register_exception<abxi::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<abxi::DataError>(m, "DataError", base.ptr());
  py::register_exception<abxi::NumericalError>(m, "NumericalError", base.ptr());

  m.def("generate_synthetic",
        [](const std::string& profile, int n_users, std::uint64_t seed, int items_per_domain, int min_len,
           int max_len, double noise) {
          abxi::SyntheticOptions o;
          o.profile = abxi::parse_profile(profile);
          o.n_users = n_users;
          o.seed = seed;
          o.items_per_domain = items_per_domain;
          o.min_len = min_len;
          o.max_len = max_len;
          o.noise = noise;
          return rows_from(abxi::generate_synthetic(o));
        },
        py::arg("profile"), py::arg("n_users") = 2000, py::arg("seed") = 0, py::arg("items_per_domain") = 200,
        py::arg("min_len") = 8, py::arg("max_len") = 20, py::arg("noise") = 0.2,
        "Synthetic interaction log as (user_id, item_id, domain, timestamp) rows.");

  py::class_<PyCorpus>(m, "Corpus")
      .def_static(
          "from_interactions",
          [](const std::vector<Row>& rows, const py::object& options) {
            return PyCorpus(abxi::preprocess(interactions_from(rows),
                                             abxi::preprocess_options_from_json(from_py(options))));
          },
          py::arg("rows"), py::arg("options") = py::none())
      .def_static(
          "from_file",
          [](const std::filesystem::path& path, const py::object& options) {
            return PyCorpus(abxi::preprocess(abxi::load_interactions_file(path),
                                             abxi::preprocess_options_from_json(from_py(options))));
          },
          py::arg("path"), py::arg("options") = py::none())
      .def_static("load", [](const std::filesystem::path& path) { return PyCorpus(abxi::load_corpus(path)); })
      .def("save", [](const PyCorpus& c, const std::filesystem::path& path) { abxi::save_corpus(c.corpus, path); })
      .def("stats", [](const PyCorpus& c) { return to_py(abxi::to_json(abxi::corpus_stats(c.corpus))); })
      .def_property_readonly("n_users", [](const PyCorpus& c) { return c.corpus.users.size(); })
      .def_property_readonly("n_items_a", [](const PyCorpus& c) { return c.corpus.n_items_a(); })
      .def_property_readonly("n_items_b", [](const PyCorpus& c) { return c.corpus.n_items_b(); })
      .def("__len__", [](const PyCorpus& c) { return c.corpus.users.size(); });

  m.def(
      "build_bundle",
      [](const std::vector<std::pair<int, std::string>>& merged, int max_len, const std::string& mode) {
        abxi::AlignmentMode am;
        if (mode == "task") {
          am = abxi::AlignmentMode::kTask;
        } else if (mode == "timestamp") {
          am = abxi::AlignmentMode::kTimestamp;
        } else {
          throw abxi::ConfigError("mode must be 'task' or 'timestamp'");
        }
        return to_py(abxi::to_json(abxi::build_bundle(tokens_from(merged), max_len, am)));
      },
      py::arg("merged"), py::arg("max_len") = 50, py::arg("mode") = "task",
      "Aligned streams for a merged sequence of (item, 'A'|'B') pairs.");

  m.def("info_nce", [](const std::vector<double>& scores) { return abxi::info_nce_from_scores(scores); },
        py::arg("scores"), "Loss for temperature-scaled scores, positive first.");
  m.def("rank_of", [](double gt, const std::vector<double>& neg) { return abxi::rank_of(gt, neg); });
  m.def("metrics_from_ranks", [](const std::vector<int>& ranks) -> py::object {
    const auto mt = abxi::metrics_from_ranks(ranks);
    if (!mt) return py::none();
    py::dict d;
    d["HR@5"] = mt->hr5;
    d["HR@10"] = mt->hr10;
    d["NDCG@10"] = mt->ndcg10;
    d["MRR"] = mt->mrr;
    d["evaluated"] = mt->evaluated;
    return d;
  });

  m.def("variant_names", &abxi::variant_names);
  m.def(
      "model_config",
      [](const std::string& variant, const py::object& overrides) {
        return to_py(abxi::to_json(abxi::build_variant(variant, abxi::model_config_from_json(from_py(overrides)))));
      },
      py::arg("variant") = "ABXI", py::arg("overrides") = py::none(), "Resolved model config for a variant.");
  m.def(
      "parameter_count",
      [](const std::string& variant, const py::object& overrides, int n_items_a, int n_items_b) {
        abxi::ModelConfig c = abxi::build_variant(variant, abxi::model_config_from_json(from_py(overrides)));
        c.n_items_a = n_items_a;
        c.n_items_b = n_items_b;
        return abxi::AbxiModel(c, 0).parameter_count();
      },
      py::arg("variant"), py::arg("overrides") = py::none(), py::arg("n_items_a") = 100,
      py::arg("n_items_b") = 100);

  py::class_<abxi::AbxiModel, std::shared_ptr<abxi::AbxiModel>>(m, "Model")
      .def_property_readonly("config", [](const abxi::AbxiModel& mdl) { return to_py(abxi::to_json(mdl.config())); })
      .def_property_readonly("parameter_count", &abxi::AbxiModel::parameter_count)
      .def("parameter_hash", [](const abxi::AbxiModel& mdl) { return abxi::parameter_hash(mdl); })
      .def(
          "evaluate",
          [](const abxi::AbxiModel& mdl, const PyCorpus& c, const std::string& split, std::uint64_t seed,
             int n_negatives) {
            abxi::EvalOptions opts;
            opts.n_negatives = n_negatives;
            abxi::EvalReport r;
            {
              py::gil_scoped_release release;
              r = abxi::evaluate(mdl, c.corpus, c.split, parse_mode(split), seed, opts);
            }
            return to_py(abxi::to_json(r));
          },
          py::arg("corpus"), py::arg("split") = "test", py::arg("seed") = 0, py::arg("n_negatives") = 999)
      .def(
          "save",
          [](const abxi::AbxiModel& mdl, const std::filesystem::path& path, std::uint64_t seed) {
            return abxi::save_checkpoint(mdl, {seed, 0, 0.0, {}}, path);
          },
          py::arg("path"), py::arg("seed") = 0, "Writes a checkpoint; returns its SHA-256.");

  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    abxi::LoadedCheckpoint ck = abxi::load_checkpoint(path);
    return py::make_tuple(std::shared_ptr<abxi::AbxiModel>(std::move(ck.model)), to_py(ck.manifest));
  });

  m.def(
      "train",
      [](const PyCorpus& c, const std::string& variant, const py::object& model, const py::object& train,
         std::uint64_t seed) {
        const abxi::ModelConfig mc = abxi::build_variant(variant, abxi::model_config_from_json(from_py(model)));
        const abxi::TrainConfig tc = abxi::train_config_from_json(from_py(train));
        abxi::TrainResult r;
        {
          py::gil_scoped_release release;
          r = abxi::train(c.corpus, c.split, mc, tc, seed);
        }
        py::list history;
        for (const auto& rec : r.history) history.append(to_py(abxi::to_json(rec)));
        py::dict info;
        info["best_epoch"] = r.best_epoch;
        info["best_val_mrr_sum"] = r.best_val_mrr_sum;
        info["early_stopped"] = r.early_stopped;
        info["history"] = history;
        return py::make_tuple(std::shared_ptr<abxi::AbxiModel>(std::move(r.model)), info);
      },
      py::arg("corpus"), py::arg("variant") = "ABXI", py::arg("model") = py::none(), py::arg("train") = py::none(),
      py::arg("seed") = 3407, "Trains one model; returns (model, info).");

  m.def("run_cli", [](const std::vector<std::string>& args) { return abxi::run_cli(args); }, py::arg("args"),
        "Runs the command-line tool in-process; returns its exit code.");
}
