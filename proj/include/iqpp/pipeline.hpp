#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iqpp/core.hpp"
#include "iqpp/corpus_io.hpp"
#include "iqpp/error.hpp"
#include "iqpp/evaluation.hpp"
#include "iqpp/meta_regressor.hpp"
#include "iqpp/predictors_post.hpp"
#include "iqpp/predictors_pre.hpp"

namespace iqpp {

enum class Stage { kIngest, kRetrieve, kGroundTruth, kPredict, kTrainMeta, kEvaluate };

std::string_view to_string(Stage s);

// An Error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(Stage stage, ErrorCode code, const std::string& message)
      : Error(code, message), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

// Built-in predictor names.
inline constexpr const char* kObjectsOverArea = "objects_over_area";
inline constexpr const char* kClusterDensity = "cluster_density";
inline constexpr const char* kClassHeadDispersion = "class_head_dispersion";
inline constexpr const char* kClassHeadKurtosis = "class_head_kurtosis";
inline constexpr const char* kScoreVariance = "score_variance";
inline constexpr const char* kEmbeddingVariance = "embedding_variance";
inline constexpr const char* kAdaptedQueryFeedback = "adapted_query_feedback";
inline constexpr const char* kFeatureRemoval = "feature_removal";
inline constexpr const char* kMetaRegressor = "meta_regressor";

const std::vector<std::string>& builtin_predictors();

struct SystemConfig {
  std::string name;
  fs::path collection;
  fs::path queries;
  Similarity similarity = Similarity::kCosine;
  std::size_t k = kDefaultCutoff;
};

struct ExternalScoreConfig {
  fs::path path;
  std::optional<std::string> system;  // unset: applies to every system
  bool supervised = false;
};

struct PipelineParams {
  std::size_t kmeans_k = kDefaultClusterCount;
  std::size_t feature_removal_m = kDefaultRemovedPerIteration;
  std::size_t feature_removal_l = kDefaultRemovalIterations;
  std::size_t class_head_epochs = 100;
  double class_head_lr = 1e-4;
  std::vector<std::string> measures{"ap", "p@100"};
  std::size_t folds = 5;
  double alpha = 0.01;
  SvrGrid grid;
};

struct PipelineConfig {
  fs::path output_dir;
  std::uint64_t seed = 0;
  fs::path qrels;
  LabelMap label_map;
  std::optional<fs::path> detections;
  std::optional<fs::path> folds_file;
  std::vector<SystemConfig> systems;
  std::vector<ExternalScoreConfig> external_scores;
  std::vector<std::string> predictors;  // empty: every applicable built-in
  PipelineParams params;
  std::size_t threads = 0;
  std::string config_hash;     // FNV-1a of the canonical config
  std::string canonical_json;  // after overrides; threads and output_dir removed
};

// Environment lookup used for IQPP_ overrides; defaults to std::getenv.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Parses a JSON config. Relative paths resolve against `base_dir`. Every
// top-level or "params" scalar key can be overridden by IQPP_<KEY> in the
// environment; overrides take part in the config hash. Throws kConfigError.
PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir,
                            const EnvLookup& env = process_env());
PipelineConfig load_config(const fs::path& path, const EnvLookup& env = process_env());

// Output of one pipeline run (everything needed to rebuild the report).
struct PipelineResult {
  std::vector<SystemResults> systems;
  std::map<std::string, std::size_t> folds;
  std::optional<ReportBundle> bundle;
  std::vector<fs::path> artifacts;
};

// Runs every stage up to and including `last`, writing its artifacts under
// config.output_dir. Failures surface as StageError.
PipelineResult run_pipeline(const PipelineConfig& config, Stage last = Stage::kEvaluate);

// Writes the top-k similarity matrices of every system to
// <output_dir>/matrices/<system>.mat.
std::vector<fs::path> emit_matrices(const PipelineConfig& config);

enum class SweepParam { kClusters, kRemoved, kIterations };
SweepParam sweep_param_from_string(std::string_view s);  // "K", "m", "l"

struct SweepResult {
  std::vector<std::size_t> values;
  std::vector<fs::path> reports;  // one report directory per value
  fs::path summary;
};

// One full run per value in [from, to] step `step`, each under
// <output_dir>/sweep/<param>=<value>, plus sweep/summary.csv.
// Throws kInvalidRange for an empty range or non-positive step.
SweepResult sweep(const PipelineConfig& config, SweepParam param, std::size_t from,
                  std::size_t to, std::size_t step);

// Process exit code for an exception: 2 for input/config errors, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace iqpp
