#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iqpp/core.hpp"
#include "iqpp/report.hpp"

namespace iqpp {

namespace fs = std::filesystem;

// Extra "# key=value" lines written at the top of every text artifact.
using Metadata = std::vector<std::pair<std::string, std::string>>;

inline constexpr char kEmbeddingMagic[] = "IQPPEMB1";
inline constexpr char kMatrixMagic[] = "IQPPMAT1";

// Binary layout: magic "IQPPEMB1", u32 dim, u64 count, count x (u16 length,
// UTF-8 id bytes), then count*dim f32. All integers and floats little-endian.
// JSONL layout: one {"id": str, "v": [floats]} object per line.
// The format is detected from the leading magic bytes.
EmbeddingStore load_embeddings(const fs::path& path);
void write_embeddings_binary(const EmbeddingStore& store, const fs::path& path);
void write_embeddings_jsonl(const EmbeddingStore& store, const fs::path& path);

// Integer label -> Label overrides applied before the default {1, 0, -1}.
using LabelMap = std::map<int, Label>;

// TSV rows "query_id \t doc_id \t label". Lines starting with '#' and blank
// lines are skipped.
Qrels load_qrels(const fs::path& path, const EmbeddingStore& collection,
                 const LabelMap& remap = {});
void write_qrels(const Qrels& qrels, const fs::path& path);

// Score TSV: "# predictor=<name>" (optional, defaults to the file stem) and
// "# orientation=HIGHER_IS_BETTER|HIGHER_IS_HARDER" headers, then rows
// "query_id \t score".
PredictorOutput load_scores(const fs::path& path);
void write_scores(const PredictorOutput& output, const fs::path& path,
                  const Metadata& meta = {});

struct Box {
  double width = 0.0;
  double height = 0.0;
};

// Query id -> detected boxes (possibly empty).
using DetectionFile = std::map<std::string, std::vector<Box>>;

// JSONL: {"id": str, "boxes": [{"w": number, "h": number}, ...]} per line.
DetectionFile load_detections(const fs::path& path);
void write_detections(const DetectionFile& detections, const fs::path& path);

// TSV rows "query_id \t rank \t doc_id \t score", rank starting at 1.
void write_ranked_lists(const std::vector<RankedList>& lists, const fs::path& path,
                        const Metadata& meta = {});
std::vector<RankedList> load_ranked_lists(const fs::path& path);

// "# measure=AP" header then "query_id \t value" rows.
void write_effectiveness(const EffectivenessTable& table, const fs::path& path,
                         const Metadata& meta = {});
EffectivenessTable load_effectiveness(const fs::path& path);

// Folds: "query_id \t fold_index" rows.
void write_folds(const std::map<std::string, std::size_t>& folds, const fs::path& path,
                 const Metadata& meta = {});
std::map<std::string, std::size_t> load_folds(const fs::path& path);

// Square similarity matrices, one per query.
struct SimilarityMatrix {
  std::string query_id;
  std::size_t size = 0;
  std::vector<double> values;  // row-major size x size

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

// Binary layout: magic "IQPPMAT1", u32 matrix count, then per matrix
// (u16 length, UTF-8 query id, u32 size, size*size f64), little-endian.
void write_similarity_matrices(const std::vector<SimilarityMatrix>& matrices,
                               const fs::path& path);
std::vector<SimilarityMatrix> load_similarity_matrices(const fs::path& path);

// report.json (full structure) and report.csv (flat rows) in `dir`.
void write_report(const EvaluationReport& report, const fs::path& dir);
EvaluationReport load_report(const fs::path& json_path);
// plotdata/<predictor>.tsv under `dir`, one file per predictor.
void write_plot_data(const std::vector<PlotSeries>& series, const fs::path& dir);

}  // namespace iqpp
