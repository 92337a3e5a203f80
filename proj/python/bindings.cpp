#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iqpp/corpus_io.hpp"
#include "iqpp/evaluation.hpp"
#include "iqpp/pipeline.hpp"
#include "iqpp/retrieval.hpp"

namespace py = pybind11;
using namespace iqpp;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

EmbeddingStore store_from_array(std::vector<std::string> ids, const FloatArray& values) {
  if (values.ndim() != 2) throw Error(ErrorCode::kDimensionMismatch, "expected a 2-D array");
  const auto* data = values.data();
  std::vector<float> flat(data, data + values.size());
  return EmbeddingStore::create(std::move(ids), static_cast<std::size_t>(values.shape(1)),
                                std::move(flat));
}

py::array_t<float> store_values(const EmbeddingStore& s) {
  py::array_t<float> out({s.size(), s.dim()});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

std::vector<float> vector_of(const FloatArray& a) {
  if (a.ndim() != 1) throw Error(ErrorCode::kDimensionMismatch, "expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::list ranked_to_list(const RankedList& r) {
  py::list out;
  for (const auto& e : r.entries) out.append(py::make_tuple(e.id, e.score));
  return out;
}

RankedList list_from_ids(const std::vector<std::string>& ids, const EmbeddingStore& store,
                         const std::string& query_id) {
  RankedList r{query_id, {}};
  for (const auto& id : ids) {
    const auto row = store.find(id);
    if (row == EmbeddingStore::npos) throw Error(ErrorCode::kUnknownDocId, "unknown doc '" + id + "'");
    r.entries.push_back({row, id, 0.0});
  }
  return r;
}

py::dict row_to_dict(const ReportRow& row) {
  py::dict d;
  d["predictor"] = row.predictor;
  d["system"] = row.system;
  d["measure"] = row.measure;
  d["orientation"] = std::string(to_string(row.orientation));
  d["supervised"] = row.supervised;
  d["n"] = row.n;
  d["pearson"] = row.pearson;
  d["pearson_t"] = row.pearson_t;
  d["pearson_significant"] = row.pearson_significant;
  d["kendall"] = row.kendall;
  d["kendall_t"] = row.kendall_t;
  d["kendall_significant"] = row.kendall_significant;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Query performance prediction engine for query-by-example image retrieval";

  static py::exception<Error> error_type(m, "IqppError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object args = py::make_tuple(std::string(to_string(e.code())), e.detail());
      PyErr_SetObject(error_type.ptr(), args.ptr());
    }
  });

  py::enum_<Similarity>(m, "Similarity")
      .value("COSINE", Similarity::kCosine)
      .value("NEG_EUCLIDEAN", Similarity::kNegEuclidean);

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init(&store_from_array), py::arg("ids"), py::arg("values"))
      .def_property_readonly("ids", &EmbeddingStore::ids)
      .def_property_readonly("dim", &EmbeddingStore::dim)
      .def_property_readonly("normalized", &EmbeddingStore::normalized)
      .def_property_readonly("values", &store_values)
      .def("__len__", &EmbeddingStore::size)
      .def("l2_normalized", &EmbeddingStore::l2_normalized);

  m.def("load_embeddings", &load_embeddings, py::arg("path"));
  m.def("write_embeddings", [](const EmbeddingStore& s, const fs::path& p, bool jsonl) {
    jsonl ? write_embeddings_jsonl(s, p) : write_embeddings_binary(s, p);
  }, py::arg("store"), py::arg("path"), py::arg("jsonl") = false);
  m.def("validate_embeddings", [](std::vector<std::string> ids, const FloatArray& values) {
    const std::size_t dim = values.ndim() == 2 ? static_cast<std::size_t>(values.shape(1)) : 0;
    const auto r = validate_store(ids, dim, {values.data(), static_cast<std::size_t>(values.size())});
    py::list out;
    for (const auto& v : r.violations) out.append(py::make_tuple(std::string(to_string(v.code)), v.detail));
    return out;
  }, py::arg("ids"), py::arg("values"), "List of (code, detail) violations; empty when valid.");

  m.def("rank", [](const FloatArray& query, const EmbeddingStore& store, Similarity sim, std::size_t k) {
    const auto prepared = prepare_store(store, sim);
    return ranked_to_list(rank(vector_of(query), prepared, {sim, k}));
  }, py::arg("query"), py::arg("store"), py::arg("similarity") = Similarity::kCosine,
        py::arg("k") = kDefaultCutoff);

  py::class_<Qrels>(m, "Qrels")
      .def("relevant_count", &Qrels::relevant_count);
  m.def("load_qrels", [](const fs::path& p, const EmbeddingStore& s) { return load_qrels(p, s); },
        py::arg("path"), py::arg("collection"));
  m.def("average_precision", [](const std::vector<std::string>& ranked, const Qrels& q,
                                const std::string& query_id, const EmbeddingStore& s) {
    return average_precision(list_from_ids(ranked, s, query_id), q);
  }, py::arg("ranked_ids"), py::arg("qrels"), py::arg("query_id"), py::arg("collection"));
  m.def("precision_at_k", [](const std::vector<std::string>& ranked, const Qrels& q,
                             const std::string& query_id, const EmbeddingStore& s, std::size_t k) {
    return precision_at_k(list_from_ids(ranked, s, query_id), q, k);
  }, py::arg("ranked_ids"), py::arg("qrels"), py::arg("query_id"), py::arg("collection"),
        py::arg("k") = kDefaultCutoff);

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(x, y).value;
  }, py::arg("x"), py::arg("y"), "NaN when either side is constant.");
  m.def("kendall_tau", [](const std::vector<double>& x, const std::vector<double>& y) {
    return kendall_tau(x, y).value;
  }, py::arg("x"), py::arg("y"));
  m.def("significance", [](double r, std::size_t n, double alpha) {
    const auto s = significance(r, n, alpha);
    return py::dict(py::arg("t") = s.t, py::arg("critical") = s.critical,
                    py::arg("significant") = s.significant, py::arg("degenerate") = s.degenerate);
  }, py::arg("r"), py::arg("n"), py::arg("alpha") = 0.01);

  m.def("load_scores", [](const fs::path& p) {
    const auto s = load_scores(p);
    return py::make_tuple(s.name, std::string(to_string(s.orientation)), s.scores);
  }, py::arg("path"), "(name, orientation, {query_id: score})");
  m.def("load_detections", [](const fs::path& p) {
    std::map<std::string, std::vector<std::pair<double, double>>> out;
    for (const auto& [id, boxes] : load_detections(p)) {
      auto& dst = out[id];
      for (const auto& b : boxes) dst.emplace_back(b.width, b.height);
    }
    return out;
  }, py::arg("path"), "{query_id: [(w, h), ...]}");
  m.def("load_similarity_matrices", [](const fs::path& p) {
    py::list out;
    for (const auto& mat : load_similarity_matrices(p)) {
      py::array_t<double> a({mat.size, mat.size});
      std::copy(mat.values.begin(), mat.values.end(), a.mutable_data());
      out.append(py::make_tuple(mat.query_id, a));
    }
    return out;
  }, py::arg("path"));

  m.def("run_pipeline", [](const fs::path& config, std::optional<std::size_t> threads) {
    auto cfg = load_config(config);
    if (threads) cfg.threads = *threads;
    PipelineResult result;
    {
      py::gil_scoped_release release;
      result = run_pipeline(cfg);
    }
    py::dict out;
    out["config_hash"] = cfg.config_hash;
    py::list artifacts;
    for (const auto& a : result.artifacts) artifacts.append(a);
    out["artifacts"] = artifacts;
    py::list rows;
    if (result.bundle) {
      for (const auto& row : result.bundle->report.rows) rows.append(row_to_dict(row));
    }
    out["rows"] = rows;
    return out;
  }, py::arg("config"), py::arg("threads") = py::none());

  m.def("emit_matrices", [](const fs::path& config) {
    const auto cfg = load_config(config);
    py::gil_scoped_release release;
    return emit_matrices(cfg);
  }, py::arg("config"), "Write top-k similarity matrices per system; returns the file paths.");
}
