#include "iqpp/predictors_pre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "iqpp/detail/binary_io.hpp"
#include "iqpp/parallel.hpp"

namespace iqpp {

double objects_over_area(std::span<const Box> boxes) {
  if (boxes.empty()) return 0.0;
  double area = 0.0;
  for (const auto& b : boxes) area += b.width * b.height;
  const auto m = static_cast<double>(boxes.size());
  return m / (area / m);
}

double objects_over_area(const DetectionFile& detections, const std::string& query_id) {
  auto it = detections.find(query_id);
  if (it == detections.end()) {
    throw Error(ErrorCode::kMissingDetections, "no detections for query '" + query_id + "'");
  }
  return objects_over_area(it->second);
}

namespace {

double squared_distance(std::span<const float> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

struct Assignment {
  std::size_t cluster = 0;
  double distance2 = 0.0;
};

Assignment nearest_centroid(std::span<const float> v, const std::vector<double>& centroids,
                            std::size_t clusters, std::size_t dim,
                            const std::vector<std::size_t>* sizes = nullptr) {
  Assignment best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < clusters; ++j) {
    if (sizes && (*sizes)[j] == 0) continue;
    const double d = squared_distance(v, {centroids.data() + j * dim, dim});
    if (d < best.distance2) best = {j, d};
  }
  return best;
}

std::vector<double> seed_plus_plus(const EmbeddingStore& data, std::size_t clusters,
                                   std::mt19937_64& rng) {
  const auto n = data.size();
  const auto dim = data.dim();
  std::vector<double> centroids;
  centroids.reserve(clusters * dim);
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t row) {
    chosen[row] = true;
    for (float v : data.row(row)) centroids.push_back(v);
  };

  take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data.row(i), {centroids.data(), dim});

  while (centroids.size() < clusters * dim) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        running += d2[i];
        if (d2[i] > 0.0 && running >= target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // Rounding left the target just past the last positive weight.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    take(pick);
    const std::span<const double> c(centroids.data() + centroids.size() - dim, dim);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(data.row(i), c));
  }
  return centroids;
}

}  // namespace

std::size_t KMeansModel::nearest(std::span<const float> v) const {
  if (v.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "query dimension differs from model");
  return nearest_centroid(v, centroids, clusters, dim, &sizes).cluster;
}

KMeansModel fit_kmeans(const EmbeddingStore& collection, const KMeansOptions& options) {
  const auto n = collection.size();
  const auto dim = collection.dim();
  const auto k = options.clusters;
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "cluster count must be positive");
  if (k > n) {
    throw Error(ErrorCode::kKTooLarge, fmt::format("{} clusters for {} points", k, n));
  }

  std::mt19937_64 rng(options.seed);
  KMeansModel model;
  model.clusters = k;
  model.dim = dim;
  model.centroids = seed_plus_plus(collection, k, rng);

  std::vector<Assignment> assigned(n);
  auto assign_all = [&] {
    parallel_for(n, options.threads, [&](std::size_t i) {
      assigned[i] = nearest_centroid(collection.row(i), model.centroids, k, dim);
    });
  };

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    assign_all();
    double sse = 0.0;
    for (const auto& a : assigned) sse += a.distance2;
    model.sse_history.push_back(sse);

    // Fixed-order reduction keeps results identical across thread counts.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = assigned[i].cluster;
      ++counts[c];
      const auto row = collection.row(i);
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
    }

    std::vector<double> next(k * dim);
    std::set<std::size_t> reseeded;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          next[j * dim + d] = sums[j * dim + d] / static_cast<double>(counts[j]);
        }
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (reseeded.count(i)) continue;
        if (far == n || assigned[i].distance2 > assigned[far].distance2) far = i;
      }
      reseeded.insert(far);
      const auto row = collection.row(far);
      for (std::size_t d = 0; d < dim; ++d) next[j * dim + d] = row[d];
    }

    double displacement = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double delta = next[j * dim + d] - model.centroids[j * dim + d];
        moved += delta * delta;
      }
      displacement = std::max(displacement, std::sqrt(moved));
    }
    model.centroids = std::move(next);
    model.iterations = iter + 1;
    if (displacement < options.tolerance) break;
  }

  assign_all();
  model.assignments.resize(n);
  model.sizes.assign(k, 0);
  model.variances.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    model.assignments[i] = assigned[i].cluster;
    ++model.sizes[assigned[i].cluster];
    model.variances[assigned[i].cluster] += assigned[i].distance2;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (model.sizes[j] > 0) model.variances[j] /= static_cast<double>(model.sizes[j]);
  }
  return model;
}

double cluster_density(const KMeansModel& model, std::span<const float> query) {
  const auto j = model.nearest(query);
  const double distance = std::sqrt(squared_distance(query, model.centroid(j)));
  return (distance + model.variances[j]) / static_cast<double>(model.sizes[j]);
}

namespace {

constexpr char kKMeansMagic[] = "IQPPKMS1";
constexpr char kClassHeadMagic[] = "IQPPCLH1";
constexpr std::uint32_t kModelVersion = 1;

void expect_version(detail::BinaryReader& in) {
  if (const auto v = in.u32(); v != kModelVersion) {
    throw Error(ErrorCode::kFormatError, fmt::format("unsupported model version {}", v));
  }
}

}  // namespace

void save_kmeans(const KMeansModel& model, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.magic(kKMeansMagic);
  out.u32(kModelVersion);
  out.u64(model.clusters);
  out.u64(model.dim);
  out.u64(model.iterations);
  for (double v : model.centroids) out.f64(v);
  for (std::size_t s : model.sizes) out.u64(s);
  for (double v : model.variances) out.f64(v);
  out.u64(model.assignments.size());
  for (std::size_t a : model.assignments) out.u64(a);
  out.u64(model.sse_history.size());
  for (double v : model.sse_history) out.f64(v);
  out.finish();
}

KMeansModel load_kmeans(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kKMeansMagic);
  expect_version(in);
  KMeansModel model;
  model.clusters = in.u64();
  model.dim = in.u64();
  model.iterations = in.u64();
  in.require(model.clusters * model.dim, 8);
  model.centroids.resize(model.clusters * model.dim);
  for (auto& v : model.centroids) v = in.f64();
  in.require(model.clusters, 16);
  model.sizes.resize(model.clusters);
  for (auto& s : model.sizes) s = in.u64();
  model.variances.resize(model.clusters);
  for (auto& v : model.variances) v = in.f64();
  const auto n = in.u64();
  in.require(n, 8);
  model.assignments.resize(n);
  for (auto& a : model.assignments) {
    a = in.u64();
    if (a >= model.clusters) throw Error(ErrorCode::kFormatError, "assignment out of range");
  }
  const auto h = in.u64();
  in.require(h, 8);
  model.sse_history.resize(h);
  for (auto& v : model.sse_history) v = in.f64();
  in.expect_end();
  return model;
}

// ---------------------------------------------------------------------------
// Classification head

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatrixMap weights_of(const ClassHead::Layer& l) {
  return ConstMatrixMap(l.weights.data(), static_cast<Eigen::Index>(l.out),
                        static_cast<Eigen::Index>(l.in));
}
ConstVectorMap bias_of(const ClassHead::Layer& l) {
  return ConstVectorMap(l.bias.data(), static_cast<Eigen::Index>(l.out));
}

void softmax_rows(RowMatrix& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double peak = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - peak).exp().matrix();
    z.row(r) /= z.row(r).sum();
  }
}

struct Forward {
  std::vector<RowMatrix> activations;  // input, hidden..., probabilities
};

Forward forward(const std::vector<ClassHead::Layer>& layers, const RowMatrix& input) {
  Forward f;
  f.activations.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    RowMatrix z = f.activations.back() * weights_of(layers[l]).transpose();
    z.rowwise() += bias_of(layers[l]);
    if (l + 1 < layers.size()) {
      z = z.cwiseMax(0.0);
    } else {
      softmax_rows(z);
    }
    f.activations.push_back(std::move(z));
  }
  return f;
}

RowMatrix gather_rows(const EmbeddingStore& store, std::span<const std::size_t> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(store.dim()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = store.row(rows[i]);
    for (std::size_t d = 0; d < src.size(); ++d) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = src[d];
    }
  }
  return m;
}

double mean_cross_entropy(const RowMatrix& probabilities, std::span<const std::size_t> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i]));
    loss -= std::log(std::max(p, 1e-300));
  }
  return loss / static_cast<double>(labels.size());
}

double accuracy(const RowMatrix& probabilities, std::span<const std::size_t> labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Eigen::Index best = 0;
    probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    if (static_cast<std::size_t>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

void adam_step(std::vector<double>& params, const double* grad, AdamState& state, double lr,
               std::size_t step) {
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grad[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kAdamEpsilon);
  }
}

}  // namespace

ClassHead::ClassHead(std::vector<Layer> layers, ClassHeadOptions options)
    : layers_(std::move(layers)), options_(options) {
  if (layers_.empty()) throw Error(ErrorCode::kInvalidArgument, "class head needs layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out ||
        (l > 0 && layers_[l - 1].out != layer.in)) {
      throw Error(ErrorCode::kDimensionMismatch, "inconsistent class head layer shapes");
    }
  }
}

std::vector<double> ClassHead::predict(std::span<const float> input) const {
  if (input.size() != input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "input dimension differs from class head");
  }
  RowMatrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t d = 0; d < input.size(); ++d) x(0, static_cast<Eigen::Index>(d)) = input[d];
  const auto f = forward(layers_, x);
  const auto& p = f.activations.back();
  return {p.data(), p.data() + p.size()};
}

ClassHead train_class_head(const EmbeddingStore& collection, std::span<const std::size_t> labels,
                           const ClassHeadOptions& options) {
  if (labels.size() != collection.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one label per collection row is required");
  }
  if (options.batch_size == 0 || options.hidden == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch size and hidden width must be positive");
  }
  const std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw Error(ErrorCode::kDegenerateLabels, "class head needs at least two distinct labels");
  }
  const std::size_t classes = *distinct.rbegin() + 1;

  std::mt19937_64 rng(options.seed);
  const std::size_t widths[] = {collection.dim(), options.hidden, options.hidden, classes};
  std::vector<ClassHead::Layer> layers;
  for (std::size_t l = 0; l + 1 < std::size(widths); ++l) {
    ClassHead::Layer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = init(rng);
    layer.bias.assign(layer.out, 0.0);
    layers.push_back(std::move(layer));
  }

  std::vector<std::size_t> all(collection.size());
  std::iota(all.begin(), all.end(), 0);
  const RowMatrix everything = gather_rows(collection, all);
  std::vector<double> history;
  history.push_back(mean_cross_entropy(forward(layers, everything).activations.back(), labels));

  std::vector<AdamState> weight_state(layers.size());
  std::vector<AdamState> bias_state(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    weight_state[l] = {std::vector<double>(layers[l].weights.size()),
                       std::vector<double>(layers[l].weights.size())};
    bias_state[l] = {std::vector<double>(layers[l].out), std::vector<double>(layers[l].out)};
  }

  std::size_t step = 0;
  std::vector<std::size_t> order = all;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const auto count = std::min(options.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      const RowMatrix x = gather_rows(collection, batch);
      const auto f = forward(layers, x);

      RowMatrix delta = f.activations.back();
      for (std::size_t i = 0; i < count; ++i) {
        delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[batch[i]])) -= 1.0;
      }
      delta /= static_cast<double>(count);

      ++step;
      for (std::size_t l = layers.size(); l-- > 0;) {
        const RowMatrix grad_w = delta.transpose() * f.activations[l];
        const Eigen::RowVectorXd grad_b = delta.colwise().sum();
        RowMatrix next_delta;
        if (l > 0) {
          next_delta = delta * weights_of(layers[l]);
          next_delta = next_delta.cwiseProduct(
              (f.activations[l].array() > 0.0).cast<double>().matrix());
        }
        adam_step(layers[l].weights, grad_w.data(), weight_state[l], options.learning_rate, step);
        adam_step(layers[l].bias, grad_b.data(), bias_state[l], options.learning_rate, step);
        delta = std::move(next_delta);
      }
    }
    history.push_back(mean_cross_entropy(forward(layers, everything).activations.back(), labels));
  }

  ClassHead head(std::move(layers), options);
  head.loss_history = std::move(history);
  head.training_accuracy = accuracy(forward(head.layers(), everything).activations.back(), labels);
  return head;
}

void save_class_head(const ClassHead& head, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.magic(kClassHeadMagic);
  out.u32(kModelVersion);
  const auto& o = head.options();
  out.f64(o.learning_rate);
  out.u64(o.epochs);
  out.u64(o.batch_size);
  out.u64(o.hidden);
  out.u64(o.seed);
  out.u64(head.layers().size());
  for (const auto& l : head.layers()) {
    out.u64(l.in);
    out.u64(l.out);
    for (double w : l.weights) out.f64(w);
    for (double b : l.bias) out.f64(b);
  }
  out.u64(head.loss_history.size());
  for (double v : head.loss_history) out.f64(v);
  out.f64(head.training_accuracy);
  out.finish();
}

ClassHead load_class_head(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kClassHeadMagic);
  expect_version(in);
  ClassHeadOptions o;
  o.learning_rate = in.f64();
  o.epochs = in.u64();
  o.batch_size = in.u64();
  o.hidden = in.u64();
  o.seed = in.u64();
  const auto count = in.u64();
  in.require(count, 16);
  std::vector<ClassHead::Layer> layers(count);
  for (auto& l : layers) {
    l.in = in.u64();
    l.out = in.u64();
    in.require(l.in * l.out + l.out, 8);
    l.weights.resize(l.in * l.out);
    for (auto& w : l.weights) w = in.f64();
    l.bias.resize(l.out);
    for (auto& b : l.bias) b = in.f64();
  }
  ClassHead head(std::move(layers), o);
  const auto h = in.u64();
  in.require(h, 8);
  head.loss_history.resize(h);
  for (auto& v : head.loss_history) v = in.f64();
  head.training_accuracy = in.f64();
  in.expect_end();
  return head;
}

double probability_dispersion(std::span<const double> p) {
  if (p.empty()) throw Error(ErrorCode::kEmptyList, "empty probability vector");
  const double n = static_cast<double>(p.size());
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
  double m2 = 0.0;
  for (double v : p) m2 += (v - mean) * (v - mean);
  return m2 / n;
}

double probability_kurtosis(std::span<const double> p) {
  if (p.empty()) throw Error(ErrorCode::kEmptyList, "empty probability vector");
  const double n = static_cast<double>(p.size());
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : p) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

PredictorOutput register_external_predictor(const std::filesystem::path& path,
                                            const std::vector<std::string>& query_ids) {
  auto output = load_scores(path);
  for (const auto& q : query_ids) {
    if (!output.scores.count(q)) {
      throw Error(ErrorCode::kMissingScores,
                  "'" + path.string() + "' has no score for query '" + q + "'");
    }
  }
  const std::set<std::string> expected(query_ids.begin(), query_ids.end());
  for (const auto& [q, s] : output.scores) {
    if (!expected.count(q)) {
      throw Error(ErrorCode::kUnknownQueryId, "'" + path.string() + "' scores unknown query '" + q + "'");
    }
  }
  return output;
}

}  // namespace iqpp
