// qpp: command-line driver for the iQPP engine.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "iqpp/corpus_io.hpp"
#include "iqpp/pipeline.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config (default: $IQPP_CONFIG or iqpp.json)");
  cmd->add_option("-o,--output", c.output, "Override output_dir");
  cmd->add_option("-t,--threads", c.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--seed", c.seed, "Override seed");
}

fs::path config_path(const Common& c) {
  if (!c.config.empty()) return c.config;
  if (const char* env = std::getenv("IQPP_CONFIG")) return env;
  return "iqpp.json";
}

// Reads the config, applies command-line edits to the JSON, then parses it
// so the edits are part of the config hash.
template <typename Edit>
iqpp::PipelineConfig load(const Common& c, Edit&& edit) {
  const auto path = config_path(c);
  std::ifstream in(path);
  if (!in) {
    throw iqpp::Error(iqpp::ErrorCode::kIoError, "cannot open config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc = json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw iqpp::Error(iqpp::ErrorCode::kConfigError, "config is not a JSON object");
  }
  if (c.output) doc["output_dir"] = fs::absolute(*c.output).string();
  if (c.threads) doc["threads"] = *c.threads;
  if (c.seed) doc["seed"] = *c.seed;
  edit(doc);
  return iqpp::parse_config(doc.dump(), path.parent_path());
}

iqpp::PipelineConfig load(const Common& c) {
  return load(c, [](json&) {});
}

int report_error(const std::exception& e) {
  json err;
  if (const auto* stage = dynamic_cast<const iqpp::StageError*>(&e)) {
    err["stage"] = std::string(iqpp::to_string(stage->stage()));
  }
  if (const auto* ie = dynamic_cast<const iqpp::Error*>(&e)) {
    err["error"] = std::string(iqpp::to_string(ie->code()));
    err["message"] = ie->detail();
  } else {
    err["error"] = "INTERNAL";
    err["message"] = e.what();
  }
  const int code = iqpp::exit_code_for(e);
  err["exit_code"] = code;
  std::cerr << err.dump() << '\n';
  return code;
}

void print_summary(const iqpp::PipelineResult& r) {
  json out;
  out["artifacts"] = r.artifacts.size();
  if (r.bundle) out["report_rows"] = r.bundle->report.rows.size();
  std::cout << out.dump() << '\n';
}

int validate_files(const std::vector<std::string>& files) {
  bool ok = true;
  for (const auto& f : files) {
    json line;
    line["file"] = f;
    try {
      const auto store = iqpp::load_embeddings(f);
      line["ok"] = true;
      line["count"] = store.size();
      line["dim"] = store.dim();
      line["normalized"] = store.normalized();
    } catch (const iqpp::Error& e) {
      ok = false;
      line["ok"] = false;
      line["error"] = std::string(iqpp::to_string(e.code()));
      line["message"] = e.detail();
    }
    std::cout << line.dump() << '\n';
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query performance prediction for query-by-example image retrieval"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> embedding_files;
  auto* validate = app.add_subcommand("validate", "Check inputs without writing results");
  add_common(validate, common);
  validate->add_option("--embeddings", embedding_files, "Embedding files to check instead");

  auto* retrieve = app.add_subcommand("retrieve", "Rank the collection for every query");
  add_common(retrieve, common);

  std::optional<std::string> measure;
  std::optional<std::size_t> gt_k;
  auto* ground_truth = app.add_subcommand("ground-truth", "Write per-query AP / P@k tables");
  add_common(ground_truth, common);
  ground_truth->add_option("--measure", measure, "ap or p@<k>");
  ground_truth->add_option("--k", gt_k, "Cutoff for P@k")->check(CLI::PositiveNumber);

  auto* predict = app.add_subcommand("predict", "Compute predictor scores");
  add_common(predict, common);
  auto* train_meta = app.add_subcommand("train-meta", "Cross-validate the meta-regressor");
  add_common(train_meta, common);
  auto* evaluate = app.add_subcommand("evaluate", "Correlate predictors with effectiveness");
  add_common(evaluate, common);
  auto* run = app.add_subcommand("run", "Run every stage end to end");
  add_common(run, common);

  std::string param;
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t step = 0;
  auto* sweep = app.add_subcommand("sweep", "Repeat the run over a hyperparameter range");
  add_common(sweep, common);
  sweep->add_option("--param", param, "K, m or l")->required();
  sweep->add_option("--from", from)->required();
  sweep->add_option("--to", to)->required();
  sweep->add_option("--step", step)->required();

  auto* matrices = app.add_subcommand("emit-matrices", "Write top-k similarity matrices");
  add_common(matrices, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    using iqpp::Stage;
    if (validate->parsed()) {
      if (!embedding_files.empty()) return validate_files(embedding_files);
      iqpp::run_pipeline(load(common), Stage::kIngest);
      std::cout << json{{"ok", true}}.dump() << '\n';
      return 0;
    }
    if (retrieve->parsed()) {
      print_summary(iqpp::run_pipeline(load(common), Stage::kRetrieve));
    } else if (ground_truth->parsed()) {
      const auto cfg = load(common, [&](json& doc) {
        if (!measure && !gt_k) return;
        std::vector<std::string> measures;
        if (measure) {
          measures.push_back(*measure);
        } else {
          measures = doc.value("params", json::object())
                         .value("measures", std::vector<std::string>{"ap", "p@100"});
        }
        if (gt_k) {
          for (auto& m : measures) {
            if (iqpp::parse_measure(m).measure == iqpp::Measure::kPrecisionAtK) {
              m = fmt::format("p@{}", *gt_k);
            }
          }
        }
        doc["params"]["measures"] = measures;
      });
      print_summary(iqpp::run_pipeline(cfg, Stage::kGroundTruth));
    } else if (predict->parsed()) {
      print_summary(iqpp::run_pipeline(load(common), Stage::kPredict));
    } else if (train_meta->parsed()) {
      print_summary(iqpp::run_pipeline(load(common), Stage::kTrainMeta));
    } else if (evaluate->parsed() || run->parsed()) {
      print_summary(iqpp::run_pipeline(load(common), Stage::kEvaluate));
    } else if (sweep->parsed()) {
      const auto result =
          iqpp::sweep(load(common), iqpp::sweep_param_from_string(param), from, to, step);
      std::cout << json{{"runs", result.values.size()}, {"summary", result.summary.string()}}.dump()
                << '\n';
    } else if (matrices->parsed()) {
      const auto paths = iqpp::emit_matrices(load(common));
      json out = json::array();
      for (const auto& p : paths) out.push_back(p.string());
      std::cout << out.dump() << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}
