#include "iqpp/corpus_io.hpp"

#include <charconv>
#include <cmath>
#include <cctype>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "iqpp/detail/binary_io.hpp"
#include "json.hpp"

namespace iqpp {

using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

void write_metadata(std::ostream& out, const Metadata& meta) {
  for (const auto& [key, value] : meta) out << "# " << key << '=' << value << '\n';
}

bool is_skippable(const std::string& line) {
  return line.empty() || line.front() == '#';
}

// "# key=value" -> (key, value); false for other lines.
bool parse_header(const std::string& line, std::string& key, std::string& value) {
  if (line.empty() || line.front() != '#') return false;
  auto body = line.substr(1);
  const auto start = body.find_first_not_of(' ');
  if (start == std::string::npos) return false;
  body = body.substr(start);
  const auto eq = body.find('=');
  if (eq == std::string::npos) return false;
  key = body.substr(0, eq);
  value = body.substr(eq + 1);
  return true;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string where(const fs::path& path, std::size_t line_no) {
  return fmt::format("{}:{}", path.string(), line_no);
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line_no) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::kFormatError, where(path, line_no) + ": bad number '" + text + "'");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFiniteValue, where(path, line_no) + ": non-finite value");
  }
  return value;
}

long long parse_int(const std::string& text, const fs::path& path, std::size_t line_no,
                    ErrorCode code) {
  long long value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(code, where(path, line_no) + ": bad integer '" + text + "'");
  }
  return value;
}

EmbeddingStore load_binary_embeddings(const fs::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kEmbeddingMagic);
  const auto dim = in.u32();
  const auto count = in.u64();
  in.require(count, 2);
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(in.short_string());
  in.require(count * dim, sizeof(float));
  std::vector<float> values(count * dim);
  for (auto& v : values) v = in.f32();
  in.expect_end();
  return EmbeddingStore::create(std::move(ids), dim, std::move(values));
}

EmbeddingStore load_jsonl_embeddings(const fs::path& path) {
  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t dim = 0;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json row;
    try {
      row = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("id") || !row["id"].is_string() ||
        !row.contains("v") || !row["v"].is_array()) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected {\"id\", \"v\"}");
    }
    const auto& vec = row["v"];
    if (ids.empty()) dim = vec.size();
    if (vec.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("{}: row has {} values, expected {}", where(path, i + 1),
                              vec.size(), dim));
    }
    for (const auto& x : vec) {
      if (x.is_null()) {
        throw Error(ErrorCode::kNonFiniteValue, where(path, i + 1) + ": non-finite value");
      }
      if (!x.is_number()) throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": non-number");
      values.push_back(x.get<float>());
    }
    ids.push_back(row["id"].get<std::string>());
  }
  return EmbeddingStore::create(std::move(ids), dim, std::move(values));
}

}  // namespace

EmbeddingStore load_embeddings(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::string head(8, '\0');
  probe.read(head.data(), 8);
  head.resize(static_cast<std::size_t>(probe.gcount()));
  probe.close();
  if (head == kEmbeddingMagic) return load_binary_embeddings(path);
  if (!head.empty() && (head.front() == '{' || std::isspace(static_cast<unsigned char>(head.front())))) {
    return load_jsonl_embeddings(path);
  }
  throw Error(ErrorCode::kFormatError, "'" + path.string() + "' is neither IQPPEMB1 nor JSONL");
}

void write_embeddings_binary(const EmbeddingStore& store, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::BinaryWriter out(path);
  out.magic(kEmbeddingMagic);
  out.u32(static_cast<std::uint32_t>(store.dim()));
  out.u64(store.size());
  for (const auto& id : store.ids()) out.short_string(id);
  for (float v : store.values()) out.f32(v);
  out.finish();
}

void write_embeddings_jsonl(const EmbeddingStore& store, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t r = 0; r < store.size(); ++r) {
    out << "{\"id\":" << json(store.id(r)).dump() << ",\"v\":[";
    const auto row = store.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << fmt::format("{}", row[c]);
    }
    out << "]}\n";
  }
}

Qrels load_qrels(const fs::path& path, const EmbeddingStore& collection,
                 const LabelMap& remap) {
  std::map<std::string, Qrels::Judgments> judgments;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_skippable(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 3) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected 3 tab-separated fields");
    }
    const auto raw = parse_int(fields[2], path, i + 1, ErrorCode::kUnknownLabel);
    Label label;
    if (auto it = remap.find(static_cast<int>(raw)); it != remap.end()) {
      label = it->second;
    } else if (raw == 1) {
      label = Label::kRelevant;
    } else if (raw == 0) {
      label = Label::kNonRelevant;
    } else if (raw == -1) {
      label = Label::kIgnore;
    } else {
      throw Error(ErrorCode::kUnknownLabel, where(path, i + 1) + ": label " + fields[2]);
    }
    auto [it, inserted] = judgments[fields[0]].emplace(fields[1], label);
    if (!inserted) {
      throw Error(ErrorCode::kFormatError,
                  where(path, i + 1) + ": duplicate judgment for (" + fields[0] + ", " + fields[1] + ")");
    }
  }
  return Qrels::create(std::move(judgments), collection);
}

void write_qrels(const Qrels& qrels, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& [query, docs] : qrels.queries()) {
    for (const auto& [doc, label] : docs) {
      const int code = label == Label::kRelevant ? 1 : label == Label::kIgnore ? -1 : 0;
      out << query << '\t' << doc << '\t' << code << '\n';
    }
  }
}

PredictorOutput load_scores(const fs::path& path) {
  PredictorOutput output;
  output.name = path.stem().string();
  bool have_orientation = false;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string key, value;
    if (parse_header(lines[i], key, value)) {
      if (key == "orientation") {
        output.orientation = orientation_from_string(value);
        have_orientation = true;
      } else if (key == "predictor") {
        output.name = value;
      }
      continue;
    }
    if (is_skippable(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 2) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected 'query_id\\tscore'");
    }
    const double score = parse_double(fields[1], path, i + 1);
    if (!output.scores.emplace(fields[0], score).second) {
      throw Error(ErrorCode::kDuplicateId, where(path, i + 1) + ": duplicate query '" + fields[0] + "'");
    }
  }
  if (!have_orientation) {
    throw Error(ErrorCode::kFormatError, "'" + path.string() + "' lacks '# orientation=' header");
  }
  return output;
}

void write_scores(const PredictorOutput& output, const fs::path& path, const Metadata& meta) {
  auto out = open_out(path);
  out << "# predictor=" << output.name << '\n';
  out << "# orientation=" << to_string(output.orientation) << '\n';
  write_metadata(out, meta);
  for (const auto& [query, score] : output.scores) {
    out << query << '\t' << fmt::format("{}", score) << '\n';
  }
}

DetectionFile load_detections(const fs::path& path) {
  DetectionFile detections;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json row;
    try {
      row = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("id") || !row["id"].is_string() ||
        !row.contains("boxes") || !row["boxes"].is_array()) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected {\"id\", \"boxes\"}");
    }
    std::vector<Box> boxes;
    for (const auto& b : row["boxes"]) {
      if (!b.is_object() || !b.contains("w") || !b.contains("h") || !b["w"].is_number() ||
          !b["h"].is_number()) {
        throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": box needs numeric w and h");
      }
      Box box{b["w"].get<double>(), b["h"].get<double>()};
      if (!std::isfinite(box.width) || !std::isfinite(box.height) || box.width <= 0 ||
          box.height <= 0) {
        throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": box sides must be positive");
      }
      boxes.push_back(box);
    }
    const auto id = row["id"].get<std::string>();
    if (!detections.emplace(id, std::move(boxes)).second) {
      throw Error(ErrorCode::kDuplicateId, where(path, i + 1) + ": duplicate query '" + id + "'");
    }
  }
  return detections;
}

void write_detections(const DetectionFile& detections, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& [id, boxes] : detections) {
    json row;
    row["id"] = id;
    row["boxes"] = json::array();
    for (const auto& b : boxes) row["boxes"].push_back({{"w", b.width}, {"h", b.height}});
    out << row.dump() << '\n';
  }
}

void write_ranked_lists(const std::vector<RankedList>& lists, const fs::path& path,
                        const Metadata& meta) {
  auto out = open_out(path);
  write_metadata(out, meta);
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      const auto& e = list.entries[r];
      out << list.query_id << '\t' << (r + 1) << '\t' << e.id << '\t'
          << fmt::format("{}", e.score) << '\n';
    }
  }
}

std::vector<RankedList> load_ranked_lists(const fs::path& path) {
  std::vector<RankedList> lists;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_skippable(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 4) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected 4 fields");
    }
    if (lists.empty() || lists.back().query_id != fields[0]) {
      lists.push_back(RankedList{fields[0], {}});
    }
    auto& list = lists.back();
    const auto rank = parse_int(fields[1], path, i + 1, ErrorCode::kFormatError);
    if (rank != static_cast<long long>(list.entries.size()) + 1) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": ranks must be consecutive");
    }
    list.entries.push_back(
        RankedEntry{EmbeddingStore::npos, fields[2], parse_double(fields[3], path, i + 1)});
  }
  return lists;
}

void write_effectiveness(const EffectivenessTable& table, const fs::path& path,
                         const Metadata& meta) {
  auto out = open_out(path);
  out << "# measure=" << table.name() << '\n';
  write_metadata(out, meta);
  for (const auto& [query, value] : table.values) {
    out << query << '\t' << fmt::format("{}", value) << '\n';
  }
}

EffectivenessTable load_effectiveness(const fs::path& path) {
  std::optional<EffectivenessTable> table;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string key, value;
    if (parse_header(lines[i], key, value)) {
      if (key == "measure") table = parse_measure(value);
      continue;
    }
    if (is_skippable(lines[i])) continue;
    if (!table) throw Error(ErrorCode::kFormatError, "'" + path.string() + "' lacks '# measure='");
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 2) throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected 2 fields");
    const double v = parse_double(fields[1], path, i + 1);
    if (v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": effectiveness outside [0,1]");
    }
    if (!table->values.emplace(fields[0], v).second) {
      throw Error(ErrorCode::kDuplicateId, where(path, i + 1) + ": duplicate query '" + fields[0] + "'");
    }
  }
  if (!table) throw Error(ErrorCode::kFormatError, "'" + path.string() + "' lacks '# measure='");
  return *table;
}

void write_folds(const std::map<std::string, std::size_t>& folds, const fs::path& path,
                 const Metadata& meta) {
  auto out = open_out(path);
  write_metadata(out, meta);
  for (const auto& [query, fold] : folds) out << query << '\t' << fold << '\n';
}

std::map<std::string, std::size_t> load_folds(const fs::path& path) {
  std::map<std::string, std::size_t> folds;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_skippable(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 2) throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": expected 2 fields");
    const auto fold = parse_int(fields[1], path, i + 1, ErrorCode::kFormatError);
    if (fold < 0) throw Error(ErrorCode::kFormatError, where(path, i + 1) + ": negative fold");
    if (!folds.emplace(fields[0], static_cast<std::size_t>(fold)).second) {
      throw Error(ErrorCode::kDuplicateId, where(path, i + 1) + ": duplicate query '" + fields[0] + "'");
    }
  }
  return folds;
}

void write_similarity_matrices(const std::vector<SimilarityMatrix>& matrices,
                               const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::BinaryWriter out(path);
  out.magic(kMatrixMagic);
  out.u32(static_cast<std::uint32_t>(matrices.size()));
  for (const auto& m : matrices) {
    if (m.values.size() != m.size * m.size) {
      throw Error(ErrorCode::kDimensionMismatch, "matrix for '" + m.query_id + "' is not square");
    }
    out.short_string(m.query_id);
    out.u32(static_cast<std::uint32_t>(m.size));
    for (double v : m.values) out.f64(v);
  }
  out.finish();
}

std::vector<SimilarityMatrix> load_similarity_matrices(const fs::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kMatrixMagic);
  const auto count = in.u32();
  in.require(count, 6);
  std::vector<SimilarityMatrix> matrices;
  matrices.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SimilarityMatrix m;
    m.query_id = in.short_string();
    m.size = in.u32();
    in.require(static_cast<std::uint64_t>(m.size) * m.size, sizeof(double));
    m.values.resize(m.size * m.size);
    for (auto& v : m.values) v = in.f64();
    matrices.push_back(std::move(m));
  }
  in.expect_end();
  return matrices;
}

namespace {

// JSON has no NaN/inf: NaN (undefined) becomes null, infinities "inf"/"-inf".
json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_or_nan(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kFormatError, "bad number '" + s + "' in report");
  }
  return j.get<double>();
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "UNDEFINED";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6f}", v);
}

}  // namespace

void write_report(const EvaluationReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  json root;
  root["config_hash"] = report.config_hash;
  root["seed"] = report.seed;
  root["alpha"] = report.alpha;
  root["rows"] = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["predictor"] = r.predictor;
    row["system"] = r.system;
    row["measure"] = r.measure;
    row["orientation"] = std::string(to_string(r.orientation));
    row["supervised"] = r.supervised;
    row["n"] = r.n;
    row["pearson"] = number_or_null(r.pearson);
    row["pearson_t"] = number_or_null(r.pearson_t);
    row["pearson_significant"] = r.pearson_significant;
    row["kendall"] = number_or_null(r.kendall);
    row["kendall_t"] = number_or_null(r.kendall_t);
    row["kendall_significant"] = r.kendall_significant;
    row["pooled_pearson"] = number_or_null(r.pooled_pearson);
    row["pooled_kendall"] = number_or_null(r.pooled_kendall);
    row["folds"] = json::array();
    for (const auto& f : r.folds) {
      row["folds"].push_back({{"fold", f.fold},
                              {"n", f.n},
                              {"pearson", number_or_null(f.pearson)},
                              {"kendall", number_or_null(f.kendall)}});
    }
    root["rows"].push_back(std::move(row));
  }
  {
    auto out = open_out(dir / "report.json");
    out << root.dump(2) << '\n';
  }
  auto csv = open_out(dir / "report.csv");
  csv << "# config_hash=" << report.config_hash << '\n';
  csv << "# seed=" << report.seed << '\n';
  csv << "predictor,system,measure,orientation,supervised,n,pearson,pearson_t,"
         "pearson_significant,kendall,kendall_t,kendall_significant,pooled_pearson,"
         "pooled_kendall\n";
  for (const auto& r : report.rows) {
    csv << r.predictor << ',' << r.system << ',' << r.measure << ',' << to_string(r.orientation)
        << ',' << (r.supervised ? 1 : 0) << ',' << r.n << ',' << csv_number(r.pearson) << ','
        << csv_number(r.pearson_t) << ',' << (r.pearson_significant ? 1 : 0) << ','
        << csv_number(r.kendall) << ',' << csv_number(r.kendall_t) << ','
        << (r.kendall_significant ? 1 : 0) << ','
        << (r.supervised ? csv_number(r.pooled_pearson) : "") << ','
        << (r.supervised ? csv_number(r.pooled_kendall) : "") << '\n';
  }
}

EvaluationReport load_report(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + json_path.string() + "'");
  json root;
  try {
    root = json::parse(in);
    EvaluationReport report;
    report.config_hash = root.at("config_hash").get<std::string>();
    report.seed = root.at("seed").get<std::uint64_t>();
    report.alpha = root.at("alpha").get<double>();
    for (const auto& row : root.at("rows")) {
      ReportRow r;
      r.predictor = row.at("predictor").get<std::string>();
      r.system = row.at("system").get<std::string>();
      r.measure = row.at("measure").get<std::string>();
      r.orientation = orientation_from_string(row.at("orientation").get<std::string>());
      r.supervised = row.at("supervised").get<bool>();
      r.n = row.at("n").get<std::size_t>();
      r.pearson = number_or_nan(row.at("pearson"));
      r.pearson_t = number_or_nan(row.at("pearson_t"));
      r.pearson_significant = row.at("pearson_significant").get<bool>();
      r.kendall = number_or_nan(row.at("kendall"));
      r.kendall_t = number_or_nan(row.at("kendall_t"));
      r.kendall_significant = row.at("kendall_significant").get<bool>();
      r.pooled_pearson = number_or_nan(row.at("pooled_pearson"));
      r.pooled_kendall = number_or_nan(row.at("pooled_kendall"));
      for (const auto& f : row.at("folds")) {
        r.folds.push_back(FoldCorrelation{f.at("fold").get<std::size_t>(),
                                          f.at("n").get<std::size_t>(),
                                          number_or_nan(f.at("pearson")),
                                          number_or_nan(f.at("kendall"))});
      }
      report.rows.push_back(std::move(r));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, "'" + json_path.string() + "': " + e.what());
  }
}

void write_plot_data(const std::vector<PlotSeries>& series, const fs::path& dir) {
  std::map<std::string, std::vector<const PlotSeries*>> by_predictor;
  for (const auto& s : series) by_predictor[s.predictor].push_back(&s);
  for (const auto& [predictor, group] : by_predictor) {
    auto out = open_out(dir / "plotdata" / (predictor + ".tsv"));
    out << "system\tmeasure\tquery_id\tground_truth\tpredicted\n";
    for (const auto* s : group) {
      for (std::size_t i = 0; i < s->query_ids.size(); ++i) {
        out << s->system << '\t' << s->measure << '\t' << s->query_ids[i] << '\t'
            << fmt::format("{}", s->ground_truth[i]) << '\t' << fmt::format("{}", s->predicted[i])
            << '\n';
      }
    }
  }
}

}  // namespace iqpp
