#pragma once

// Generated fixtures shared by the unit, acceptance and CLI tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "iqpp/core.hpp"
#include "iqpp/corpus_io.hpp"

namespace iqpp::testing {

namespace fs = std::filesystem;

inline std::string padded_id(const std::string& prefix, std::size_t i, std::size_t width = 5) {
  return fmt::format("{}{:0{}}", prefix, i, width);
}

inline EmbeddingStore random_store(std::size_t n, std::size_t dim, std::mt19937_64& rng,
                                   const std::string& prefix = "d") {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::string> ids;
  std::vector<float> values;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(padded_id(prefix, i));
    for (std::size_t j = 0; j < dim; ++j) values.push_back(g(rng));
  }
  return EmbeddingStore::create(std::move(ids), dim, std::move(values));
}

// Gaussian clusters; queries sit at a controlled distance from their
// cluster's center and are relevant to every member of that cluster.
struct ClusterCorpus {
  EmbeddingStore collection;
  EmbeddingStore queries;
  std::map<std::string, Qrels::Judgments> judgments;
  std::map<std::string, double> query_offset;  // distance from the center, in sigmas
  std::vector<std::size_t> doc_cluster;
};

struct ClusterSpec {
  std::size_t clusters = 5;
  std::size_t docs = 2000;
  std::size_t queries = 100;
  std::size_t dim = 16;
  double center_spread = 1.0;  // std of the cluster centers
  double max_offset = 6.0;     // queries span offsets [0, max_offset] sigmas
  std::uint64_t seed = 7;
};

inline ClusterCorpus make_cluster_corpus(const ClusterSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> centers(spec.clusters, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    for (auto& v : c) v = spec.center_spread * g(rng);
  }

  ClusterCorpus corpus;
  std::vector<std::string> ids;
  std::vector<float> values;
  for (std::size_t i = 0; i < spec.docs; ++i) {
    const auto c = i % spec.clusters;
    ids.push_back(padded_id("d", i));
    corpus.doc_cluster.push_back(c);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      values.push_back(static_cast<float>(centers[c][j] + g(rng)));
    }
  }
  corpus.collection = EmbeddingStore::create(ids, spec.dim, std::move(values));

  std::vector<std::string> qids;
  std::vector<float> qvalues;
  for (std::size_t q = 0; q < spec.queries; ++q) {
    const auto c = q % spec.clusters;
    const double offset =
        spec.max_offset * static_cast<double>(q / spec.clusters) /
        static_cast<double>(std::max<std::size_t>(1, (spec.queries - 1) / spec.clusters));
    std::vector<double> dir(spec.dim);
    double norm = 0.0;
    for (auto& v : dir) {
      v = g(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    const auto qid = padded_id("q", q, 3);
    qids.push_back(qid);
    corpus.query_offset[qid] = offset;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      qvalues.push_back(static_cast<float>(centers[c][j] + offset * dir[j] / norm));
    }
    auto& judged = corpus.judgments[qid];
    for (std::size_t i = 0; i < spec.docs; ++i) {
      if (corpus.doc_cluster[i] == c) judged[ids[i]] = Label::kRelevant;
    }
  }
  corpus.queries = EmbeddingStore::create(std::move(qids), spec.dim, std::move(qvalues));
  return corpus;
}

inline void write_qrels_tsv(const std::map<std::string, Qrels::Judgments>& judgments,
                            const fs::path& path) {
  std::ofstream out(path);
  for (const auto& [q, docs] : judgments) {
    for (const auto& [d, label] : docs) {
      const int code = label == Label::kRelevant ? 1 : label == Label::kIgnore ? -1 : 0;
      out << q << '\t' << d << '\t' << code << '\n';
    }
  }
}

// Writes a complete pipeline fixture under `dir` and returns the config path.
inline fs::path write_fixture(const ClusterCorpus& corpus, const fs::path& dir,
                              nlohmann::json extra = nlohmann::json::object()) {
  fs::create_directories(dir);
  write_embeddings_binary(corpus.collection, dir / "collection.emb");
  write_embeddings_binary(corpus.queries, dir / "queries.emb");
  write_qrels_tsv(corpus.judgments, dir / "qrels.tsv");

  DetectionFile dets;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(0, 4);
  std::uniform_real_distribution<double> side(5.0, 200.0);
  for (const auto& id : corpus.queries.ids()) {
    auto& boxes = dets[id];
    for (int b = count(rng); b > 0; --b) boxes.push_back(Box{side(rng), side(rng)});
  }
  write_detections(dets, dir / "detections.jsonl");

  nlohmann::json cfg = {
      {"output_dir", "out"},
      {"seed", 11},
      {"qrels", "qrels.tsv"},
      {"detections", "detections.jsonl"},
      {"systems",
       {{{"name", "euclid"},
         {"collection", "collection.emb"},
         {"queries", "queries.emb"},
         {"similarity", "neg_euclidean"},
         {"k", 100}}}},
      {"params", {{"kmeans_k", 20}, {"feature_removal_m", 2}, {"feature_removal_l", 3},
                  {"class_head_epochs", 5}}},
  };
  for (const auto& [key, value] : extra.items()) {
    if (key == "params") {
      for (const auto& [pk, pv] : value.items()) cfg["params"][pk] = pv;
    } else {
      cfg[key] = value;
    }
  }
  const auto path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

}  // namespace iqpp::testing
