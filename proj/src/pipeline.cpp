#include "iqpp/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "iqpp/parallel.hpp"
#include "iqpp/retrieval.hpp"

namespace iqpp {

using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kRetrieve: return "retrieve";
    case Stage::kGroundTruth: return "ground-truth";
    case Stage::kPredict: return "predict";
    case Stage::kTrainMeta: return "train-meta";
    case Stage::kEvaluate: return "evaluate";
  }
  return "unknown";
}

const std::vector<std::string>& builtin_predictors() {
  static const std::vector<std::string> names{
      kObjectsOverArea,  kClusterDensity,       kClassHeadDispersion,
      kClassHeadKurtosis, kScoreVariance,       kEmbeddingVariance,
      kAdaptedQueryFeedback, kFeatureRemoval,   kMetaRegressor};
  return names;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::kConfigError, message);
}

std::string fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

const std::vector<std::string> kTopLevelOverrides{"output_dir", "seed",       "qrels",
                                                  "detections", "folds_file", "threads"};
const std::vector<std::string> kParamOverrides{"kmeans_k",          "feature_removal_m",
                                               "feature_removal_l", "class_head_epochs",
                                               "class_head_lr",     "folds",
                                               "alpha"};

std::string env_name(const std::string& key) {
  std::string name = "IQPP_";
  for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

// Numbers and booleans parse as JSON; anything else is taken as a string.
json env_value(const std::string& text) {
  auto parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded() || parsed.is_object() || parsed.is_array()) return text;
  return parsed;
}

void apply_env(json& doc, const EnvLookup& env) {
  for (const auto& key : kTopLevelOverrides) {
    if (auto v = env(env_name(key))) doc[key] = env_value(*v);
  }
  for (const auto& key : kParamOverrides) {
    if (auto v = env(env_name(key))) doc["params"][key] = env_value(*v);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(fmt::format("config key '{}' has the wrong type", key));
  }
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    config_error(fmt::format("config key '{}' must be a non-negative integer", key));
  }
  return v.get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

Label label_from_string(const std::string& s) {
  if (s == "RELEVANT") return Label::kRelevant;
  if (s == "NONRELEVANT") return Label::kNonRelevant;
  if (s == "IGNORE") return Label::kIgnore;
  config_error("unknown label name '" + s + "'");
}

SvrGrid parse_grid(const json& g) {
  SvrGrid grid;
  grid.C = get_or(g, "C", grid.C);
  grid.nu = get_or(g, "nu", grid.nu);
  if (g.contains("kernels")) {
    grid.kernels.clear();
    for (const auto& k : get_or(g, "kernels", std::vector<std::string>{})) {
      if (k == "linear") grid.kernels.push_back(KernelType::kLinear);
      else if (k == "rbf") grid.kernels.push_back(KernelType::kRbf);
      else config_error("unknown kernel '" + k + "'");
    }
  }
  grid.inner_folds = get_count(g, "inner_folds", grid.inner_folds);
  if (grid.C.empty() || grid.nu.empty() || grid.kernels.empty()) config_error("empty SVR grid");
  return grid;
}

PipelineConfig from_json(const json& doc, const fs::path& base) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  PipelineConfig cfg;
  if (!doc.contains("output_dir")) config_error("missing 'output_dir'");
  if (!doc.contains("qrels")) config_error("missing 'qrels'");
  cfg.output_dir = resolve(base, get_or<std::string>(doc, "output_dir", ""));
  cfg.qrels = resolve(base, get_or<std::string>(doc, "qrels", ""));
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.threads = get_count(doc, "threads", 0);
  if (doc.contains("detections")) {
    cfg.detections = resolve(base, get_or<std::string>(doc, "detections", ""));
  }
  if (doc.contains("folds_file")) {
    cfg.folds_file = resolve(base, get_or<std::string>(doc, "folds_file", ""));
  }
  for (const auto& [label, name] :
       get_or(doc, "qrels_label_map", std::map<std::string, std::string>{})) {
    try {
      cfg.label_map[std::stoi(label)] = label_from_string(name);
    } catch (const std::logic_error&) {
      config_error("qrels_label_map keys must be integers");
    }
  }

  if (!doc.contains("systems") || !doc.at("systems").is_array() || doc.at("systems").empty()) {
    config_error("'systems' must be a non-empty array");
  }
  std::set<std::string> names;
  for (const auto& s : doc.at("systems")) {
    SystemConfig sys;
    sys.name = get_or<std::string>(s, "name", "");
    if (sys.name.empty() || sys.name.find('/') != std::string::npos) {
      config_error("system names must be non-empty and contain no '/'");
    }
    if (!names.insert(sys.name).second) config_error("duplicate system '" + sys.name + "'");
    if (!s.contains("collection") || !s.contains("queries")) {
      config_error("system '" + sys.name + "' needs 'collection' and 'queries'");
    }
    sys.collection = resolve(base, get_or<std::string>(s, "collection", ""));
    sys.queries = resolve(base, get_or<std::string>(s, "queries", ""));
    try {
      sys.similarity = similarity_from_string(get_or<std::string>(s, "similarity", "cosine"));
    } catch (const Error& e) {
      config_error(e.detail());
    }
    sys.k = get_count(s, "k", kDefaultCutoff);
    if (sys.k == 0) config_error("system '" + sys.name + "': k must be positive");
    cfg.systems.push_back(std::move(sys));
  }

  for (const auto& e : doc.value("external_scores", json::array())) {
    ExternalScoreConfig ext;
    if (!e.contains("path")) config_error("external score entry without 'path'");
    ext.path = resolve(base, get_or<std::string>(e, "path", ""));
    if (e.contains("system")) {
      ext.system = get_or<std::string>(e, "system", "");
      if (!names.count(*ext.system)) config_error("external scores name unknown system '" + *ext.system + "'");
    }
    ext.supervised = get_or(e, "supervised", false);
    cfg.external_scores.push_back(std::move(ext));
  }

  cfg.predictors = get_or(doc, "predictors", std::vector<std::string>{});
  const auto& known = builtin_predictors();
  for (const auto& p : cfg.predictors) {
    if (std::find(known.begin(), known.end(), p) == known.end()) {
      config_error("unknown predictor '" + p + "'");
    }
  }
  if (std::count(cfg.predictors.begin(), cfg.predictors.end(), kObjectsOverArea) &&
      !cfg.detections) {
    config_error("objects_over_area needs a 'detections' file");
  }

  const json params = doc.value("params", json::object());
  auto& p = cfg.params;
  p.kmeans_k = get_count(params, "kmeans_k", p.kmeans_k);
  p.feature_removal_m = get_count(params, "feature_removal_m", p.feature_removal_m);
  p.feature_removal_l = get_count(params, "feature_removal_l", p.feature_removal_l);
  p.class_head_epochs = get_count(params, "class_head_epochs", p.class_head_epochs);
  p.class_head_lr = get_or(params, "class_head_lr", p.class_head_lr);
  p.measures = get_or(params, "measures", p.measures);
  p.folds = get_count(params, "folds", p.folds);
  p.alpha = get_or(params, "alpha", p.alpha);
  if (params.contains("svr_grid")) p.grid = parse_grid(params.at("svr_grid"));
  if (p.kmeans_k == 0) config_error("kmeans_k must be positive");
  if (p.feature_removal_m == 0) config_error("feature_removal_m must be positive");
  if (p.folds < 2) config_error("folds must be at least 2");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  if (!(p.class_head_lr > 0.0)) config_error("class_head_lr must be positive");
  if (p.measures.empty()) config_error("no measures configured");
  for (const auto& m : p.measures) {
    try {
      parse_measure(m);
    } catch (const Error& e) {
      config_error(e.detail());
    }
  }
  return cfg;
}

void finalize_hash(PipelineConfig& cfg, json doc) {
  doc.erase("threads");
  doc.erase("output_dir");
  cfg.canonical_json = doc.dump();
  cfg.config_hash = fnv1a(cfg.canonical_json);
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir,
                            const EnvLookup& env) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) config_error("config is not valid JSON");
  if (!doc.is_object()) config_error("config must be a JSON object");
  apply_env(doc, env);
  auto cfg = from_json(doc, base_dir);
  finalize_hash(cfg, doc);
  return cfg;
}

PipelineConfig load_config(const fs::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path(), env);
}

namespace {

template <typename Fn>
auto in_stage(Stage stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.detail());
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, ErrorCode::kIoError, e.what());
  }
}

struct SystemState {
  const SystemConfig* config = nullptr;
  EmbeddingStore collection;  // prepared for the similarity
  EmbeddingStore queries;
  Qrels qrels;
  std::vector<std::string> query_ids;
  std::vector<std::size_t> query_rows;
  std::vector<std::vector<bool>> ignore;
  std::vector<RankedList> full;
  std::vector<RankedList> top;
  SystemResults results;

  std::span<const float> query(std::size_t i) const { return queries.row(query_rows[i]); }
  RetrievalConfig retrieval() const { return {config->similarity, config->k}; }
};

class Runner {
 public:
  explicit Runner(const PipelineConfig& config) : cfg_(config) {
    meta_ = {{"config_hash", cfg_.config_hash}, {"seed", std::to_string(cfg_.seed)}};
  }

  PipelineResult run(Stage last) {
    in_stage(Stage::kIngest, [&] { ingest(); });
    if (last >= Stage::kRetrieve) in_stage(Stage::kRetrieve, [&] { retrieve(); });
    if (last >= Stage::kGroundTruth) in_stage(Stage::kGroundTruth, [&] { ground_truth(); });
    if (last >= Stage::kPredict) in_stage(Stage::kPredict, [&] { predict(); });
    if (last >= Stage::kTrainMeta) in_stage(Stage::kTrainMeta, [&] { train_meta(); });
    if (last >= Stage::kEvaluate) in_stage(Stage::kEvaluate, [&] { evaluate(); });
    in_stage(last, [&] { write_manifest(); });
    for (auto& s : systems_) result_.systems.push_back(std::move(s.results));
    return std::move(result_);
  }

  std::vector<fs::path> matrices() {
    in_stage(Stage::kIngest, [&] { ingest(); });
    in_stage(Stage::kRetrieve, [&] { retrieve(); });
    return in_stage(Stage::kRetrieve, [&] {
      std::vector<fs::path> paths;
      for (const auto& s : systems_) {
        std::vector<SimilarityMatrix> mats(s.top.size());
        parallel_for(s.top.size(), cfg_.threads, [&](std::size_t i) {
          mats[i] = similarity_matrix(s.top[i], s.collection, s.config->similarity);
        });
        const auto path = cfg_.output_dir / "matrices" / (s.config->name + ".mat");
        write_similarity_matrices(mats, path);
        paths.push_back(path);
        result_.artifacts.push_back(path);
      }
      write_manifest();
      return paths;
    });
  }

 private:
  bool wanted(const std::string& name) const {
    if (cfg_.predictors.empty()) return name != kObjectsOverArea || cfg_.detections.has_value();
    return std::find(cfg_.predictors.begin(), cfg_.predictors.end(), name) !=
           cfg_.predictors.end();
  }

  void record(const fs::path& p) { result_.artifacts.push_back(p); }

  void ingest() {
    if (!fs::exists(cfg_.qrels)) {
      throw Error(ErrorCode::kIoError, "qrels file '" + cfg_.qrels.string() + "' does not exist");
    }
    if (cfg_.detections) detections_ = load_detections(*cfg_.detections);
    for (const auto& sys : cfg_.systems) {
      SystemState s;
      s.config = &sys;
      s.results.system = sys.name;
      const auto raw_collection = load_embeddings(sys.collection);
      const auto raw_queries = load_embeddings(sys.queries);
      if (raw_collection.dim() != raw_queries.dim()) {
        throw Error(ErrorCode::kDimensionMismatch,
                    fmt::format("system '{}': collection dim {} but query dim {}", sys.name,
                                raw_collection.dim(), raw_queries.dim()));
      }
      s.qrels = load_qrels(cfg_.qrels, raw_collection, cfg_.label_map);
      s.collection = prepare_store(raw_collection, sys.similarity);
      s.queries = prepare_store(raw_queries, sys.similarity);
      for (const auto& [query, judgments] : s.qrels.queries()) {
        const auto row = s.queries.find(query);
        if (row == EmbeddingStore::npos) {
          throw Error(ErrorCode::kUnknownQueryId,
                      "query '" + query + "' has judgments but no embedding");
        }
        s.query_ids.push_back(query);
        s.query_rows.push_back(row);
        s.ignore.push_back(s.qrels.ignore_mask(query, s.collection));
      }
      systems_.push_back(std::move(s));
    }
  }

  void retrieve() {
    for (auto& s : systems_) {
      s.full = rank_all(s.queries, s.collection, s.qrels, s.config->similarity, 0, cfg_.threads);
      s.top.clear();
      for (const auto& list : s.full) s.top.push_back(list.prefix(s.config->k));
      const auto path = cfg_.output_dir / "runs" / (s.config->name + ".tsv");
      write_ranked_lists(s.top, path, meta_);
      record(path);
    }
  }

  void ground_truth() {
    for (auto& s : systems_) {
      for (const auto& m : cfg_.params.measures) {
        const auto spec = parse_measure(m);
        auto table = effectiveness(s.full, s.qrels, spec.measure, spec.k);
        const auto path =
            cfg_.output_dir / "effectiveness" / (s.config->name + "." + table.name() + ".tsv");
        write_effectiveness(table, path, meta_);
        record(path);
        s.results.effectiveness.push_back(std::move(table));
      }
    }
  }

  // Per-query scores computed in parallel into fixed slots.
  template <typename Fn>
  PredictorOutput per_query(const SystemState& s, const std::string& name, Orientation o,
                            Fn&& fn) {
    std::vector<double> values(s.query_ids.size());
    parallel_for(values.size(), cfg_.threads, [&](std::size_t i) { values[i] = fn(i); });
    PredictorOutput out{name, o, {}};
    for (std::size_t i = 0; i < values.size(); ++i) out.scores[s.query_ids[i]] = values[i];
    return out;
  }

  void add_output(SystemState& s, PredictorOutput out, bool supervised,
                  std::optional<std::string> target = std::nullopt) {
    for (const auto& existing : s.results.predictors) {
      if (existing.output.name == out.name && existing.target_measure == target) {
        throw Error(ErrorCode::kDuplicateId, "predictor '" + out.name + "' registered twice");
      }
    }
    auto file = out.name + (target ? "." + *target : std::string()) + ".tsv";
    const auto path = cfg_.output_dir / "scores" / s.config->name / file;
    write_scores(out, path, meta_);
    record(path);
    s.results.predictors.push_back(ScoredPredictor{std::move(out), supervised, std::move(target)});
  }

  void predict() {
    const auto& p = cfg_.params;
    for (auto& s : systems_) {
      const auto& sys = *s.config;
      const auto cfg = s.retrieval();

      if (wanted(kObjectsOverArea)) {
        add_output(s,
                   per_query(s, kObjectsOverArea, Orientation::kHigherIsHarder,
                             [&](std::size_t i) {
                               return objects_over_area(*detections_, s.query_ids[i]);
                             }),
                   false);
      }

      const bool need_head = wanted(kClassHeadDispersion) || wanted(kClassHeadKurtosis);
      if (wanted(kClusterDensity) || need_head) {
        KMeansOptions ko;
        ko.clusters = p.kmeans_k;
        ko.seed = cfg_.seed;
        ko.threads = cfg_.threads;
        const auto kmeans = fit_kmeans(s.collection, ko);
        const auto kpath = cfg_.output_dir / "models" / (sys.name + ".kmeans");
        save_kmeans(kmeans, kpath);
        record(kpath);
        if (wanted(kClusterDensity)) {
          add_output(s,
                     per_query(s, kClusterDensity, Orientation::kHigherIsHarder,
                               [&](std::size_t i) { return cluster_density(kmeans, s.query(i)); }),
                     false);
        }
        if (need_head) {
          ClassHeadOptions ho;
          ho.learning_rate = p.class_head_lr;
          ho.epochs = p.class_head_epochs;
          ho.seed = cfg_.seed;
          const auto head = train_class_head(s.collection, kmeans.assignments, ho);
          const auto hpath = cfg_.output_dir / "models" / (sys.name + ".head");
          save_class_head(head, hpath);
          record(hpath);
          std::vector<std::vector<double>> probs(s.query_ids.size());
          parallel_for(probs.size(), cfg_.threads,
                       [&](std::size_t i) { probs[i] = head.predict(s.query(i)); });
          if (wanted(kClassHeadDispersion)) {
            add_output(s,
                       per_query(s, kClassHeadDispersion, Orientation::kHigherIsBetter,
                                 [&](std::size_t i) { return probability_dispersion(probs[i]); }),
                       false);
          }
          if (wanted(kClassHeadKurtosis)) {
            add_output(s,
                       per_query(s, kClassHeadKurtosis, Orientation::kHigherIsBetter,
                                 [&](std::size_t i) { return probability_kurtosis(probs[i]); }),
                       false);
          }
        }
      }

      if (wanted(kScoreVariance)) {
        add_output(s,
                   per_query(s, kScoreVariance, Orientation::kHigherIsBetter,
                             [&](std::size_t i) { return score_variance(s.top[i]); }),
                   false);
      }
      if (wanted(kEmbeddingVariance)) {
        add_output(s,
                   per_query(s, kEmbeddingVariance, Orientation::kHigherIsBetter,
                             [&](std::size_t i) { return embedding_variance(s.top[i], s.collection); }),
                   false);
      }
      if (wanted(kAdaptedQueryFeedback)) {
        add_output(s,
                   per_query(s, kAdaptedQueryFeedback, Orientation::kHigherIsBetter,
                             [&](std::size_t i) {
                               return adapted_query_feedback(s.top[i], s.collection, cfg,
                                                             s.ignore[i]);
                             }),
                   false);
      }
      if (wanted(kFeatureRemoval)) {
        FeatureRemovalOptions fo{p.feature_removal_m, p.feature_removal_l};
        add_output(s,
                   per_query(s, kFeatureRemoval, Orientation::kHigherIsBetter,
                             [&](std::size_t i) {
                               return iterative_feature_removal(s.query(i), s.collection, cfg, fo,
                                                                s.ignore[i])
                                   .score;
                             }),
                   false);
      }

      for (const auto& ext : cfg_.external_scores) {
        if (ext.system && *ext.system != sys.name) continue;
        add_output(s, register_external_predictor(ext.path, s.query_ids), ext.supervised);
      }
    }
  }

  void load_or_make_folds(const std::vector<std::string>& query_ids) {
    if (cfg_.folds_file) {
      result_.folds = load_folds(*cfg_.folds_file);
      for (const auto& q : query_ids) {
        if (!result_.folds.count(q)) {
          throw Error(ErrorCode::kMissingScores, "fold file has no entry for query '" + q + "'");
        }
      }
    } else {
      result_.folds = make_folds(query_ids, cfg_.params.folds, cfg_.seed);
    }
    const auto path = cfg_.output_dir / "folds.tsv";
    write_folds(result_.folds, path, meta_);
    record(path);
  }

  void train_meta() {
    const bool any_supervised = std::any_of(cfg_.external_scores.begin(),
                                            cfg_.external_scores.end(),
                                            [](const auto& e) { return e.supervised; });
    if (!wanted(kMetaRegressor) && !any_supervised) return;
    load_or_make_folds(systems_.front().query_ids);
    if (!wanted(kMetaRegressor)) return;

    for (auto& s : systems_) {
      std::vector<PredictorOutput> features;
      for (const auto& p : s.results.predictors) {
        if (!p.supervised) features.push_back(p.output);
      }
      if (features.empty()) {
        throw Error(ErrorCode::kConfigError, "meta_regressor needs at least one other predictor");
      }
      const auto table = FeatureTable::from_predictors(features, s.query_ids);
      std::vector<ScoredPredictor> outputs;
      for (const auto& eff : s.results.effectiveness) {
        const auto cv =
            cross_validate_meta(table, eff.values, result_.folds, cfg_.params.grid, cfg_.seed,
                                cfg_.threads);
        for (const auto& fold : cv.folds) {
          const auto path = cfg_.output_dir / "models" /
                            fmt::format("{}.meta.{}.fold{}.svr", s.config->name, eff.name(),
                                        fold.fold);
          save_meta_model(fold.model, path);
          record(path);
        }
        add_output(s, PredictorOutput{kMetaRegressor, Orientation::kHigherIsBetter, cv.predictions},
                   true, eff.name());
      }
    }
  }

  void evaluate() {
    std::vector<SystemResults> systems;
    for (const auto& s : systems_) systems.push_back(s.results);
    ReportOptions options{cfg_.params.alpha, cfg_.config_hash, cfg_.seed};
    auto bundle = build_report(systems, result_.folds, options);
    write_report(bundle.report, cfg_.output_dir);
    record(cfg_.output_dir / "report.json");
    record(cfg_.output_dir / "report.csv");
    write_plot_data(bundle.plots, cfg_.output_dir);
    std::set<std::string> predictors;
    for (const auto& plot : bundle.plots) predictors.insert(plot.predictor);
    for (const auto& name : predictors) record(cfg_.output_dir / "plotdata" / (name + ".tsv"));
    result_.bundle = std::move(bundle);
  }

  // Binary artifacts carry no header, so the hash and seed live here.
  void write_manifest() {
    json manifest;
    manifest["config_hash"] = cfg_.config_hash;
    manifest["seed"] = cfg_.seed;
    json files = json::array();
    for (const auto& p : result_.artifacts) {
      files.push_back(fs::relative(p, cfg_.output_dir).generic_string());
    }
    manifest["artifacts"] = files;
    fs::create_directories(cfg_.output_dir);
    std::ofstream out(cfg_.output_dir / "manifest.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write manifest");
    out << manifest.dump(2) << '\n';
  }

  const PipelineConfig& cfg_;
  Metadata meta_;
  std::optional<DetectionFile> detections_;
  std::vector<SystemState> systems_;
  PipelineResult result_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, Stage last) {
  return Runner(config).run(last);
}

std::vector<fs::path> emit_matrices(const PipelineConfig& config) {
  return Runner(config).matrices();
}

SweepParam sweep_param_from_string(std::string_view s) {
  if (s == "K") return SweepParam::kClusters;
  if (s == "m") return SweepParam::kRemoved;
  if (s == "l") return SweepParam::kIterations;
  throw Error(ErrorCode::kInvalidArgument, "sweep parameter must be K, m or l");
}

SweepResult sweep(const PipelineConfig& config, SweepParam param, std::size_t from,
                  std::size_t to, std::size_t step) {
  if (step == 0 || from > to) {
    throw Error(ErrorCode::kInvalidRange,
                fmt::format("empty sweep range {}..{} step {}", from, to, step));
  }
  const char* key = param == SweepParam::kClusters  ? "kmeans_k"
                    : param == SweepParam::kRemoved ? "feature_removal_m"
                                                    : "feature_removal_l";
  const char* label = param == SweepParam::kClusters  ? "K"
                      : param == SweepParam::kRemoved ? "m"
                                                      : "l";
  const auto sweep_dir = config.output_dir / "sweep";
  SweepResult result;
  std::ostringstream summary;
  summary << "# config_hash=" << config.config_hash << "\n# seed=" << config.seed << '\n'
          << "param,value,predictor,system,measure,pearson,kendall,pearson_significant,"
             "kendall_significant\n";

  for (std::size_t v = from; v <= to; v += step) {
    PipelineConfig run = config;
    auto doc = json::parse(config.canonical_json);
    doc["params"][key] = v;
    run.canonical_json = doc.dump();
    run.config_hash = fnv1a(run.canonical_json);
    switch (param) {
      case SweepParam::kClusters: run.params.kmeans_k = v; break;
      case SweepParam::kRemoved: run.params.feature_removal_m = v; break;
      case SweepParam::kIterations: run.params.feature_removal_l = v; break;
    }
    run.output_dir = sweep_dir / fmt::format("{}={}", label, v);
    const auto out = run_pipeline(run);
    result.values.push_back(v);
    result.reports.push_back(run.output_dir);
    for (const auto& row : out.bundle->report.rows) {
      auto num = [](double x) { return std::isnan(x) ? std::string("UNDEFINED") : fmt::format("{:.6f}", x); };
      summary << label << ',' << v << ',' << row.predictor << ',' << row.system << ','
              << row.measure << ',' << num(row.pearson) << ',' << num(row.kendall) << ','
              << (row.pearson_significant ? "true" : "false") << ','
              << (row.kendall_significant ? "true" : "false") << '\n';
    }
    if (to - v < step) break;
  }
  result.summary = sweep_dir / "summary.csv";
  std::ofstream out(result.summary, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write sweep summary");
  out << summary.str();
  return result;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const Error*>(&e) != nullptr) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace iqpp
