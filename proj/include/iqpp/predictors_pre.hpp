#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iqpp/core.hpp"
#include "iqpp/corpus_io.hpp"

namespace iqpp {

inline constexpr std::size_t kDefaultClusterCount = 150;

// Number of detected objects divided by their mean box area. A query with
// no detections scores 0. Orientation: higher is harder.
double objects_over_area(std::span<const Box> boxes);
// Looks the query up first; throws kMissingDetections when it is absent.
double objects_over_area(const DetectionFile& detections, const std::string& query_id);

struct KMeansOptions {
  std::size_t clusters = kDefaultClusterCount;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // max centroid displacement
  std::size_t threads = 1;
};

struct KMeansModel {
  std::size_t clusters = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;          // clusters x dim, row-major
  std::vector<std::size_t> assignments;   // one per collection row
  std::vector<std::size_t> sizes;         // members per cluster
  std::vector<double> variances;          // mean squared distance to centroid
  std::vector<double> sse_history;        // within-cluster SSE per Lloyd iteration
  std::size_t iterations = 0;

  std::span<const double> centroid(std::size_t j) const {
    return {centroids.data() + j * dim, dim};
  }
  // Nearest non-empty centroid (Euclidean), ties to the lowest index.
  std::size_t nearest(std::span<const float> v) const;
};

// Lloyd iterations from a k-means++ seeding. Deterministic for a given seed
// regardless of `threads`; empty clusters are re-seeded with the point
// farthest from its centroid. Throws kKTooLarge when clusters > rows.
KMeansModel fit_kmeans(const EmbeddingStore& collection, const KMeansOptions& options);

// (distance to the assigned centroid + cluster variance) / cluster size.
// Orientation: higher is harder.
double cluster_density(const KMeansModel& model, std::span<const float> query);

void save_kmeans(const KMeansModel& model, const std::filesystem::path& path);
KMeansModel load_kmeans(const std::filesystem::path& path);

struct ClassHeadOptions {
  double learning_rate = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t hidden = 50;
  std::uint64_t seed = 0;
};

// Two ReLU hidden layers and a softmax output, trained on frozen
// embeddings against pseudo-labels.
class ClassHead {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out
  };

  ClassHead() = default;
  ClassHead(std::vector<Layer> layers, ClassHeadOptions options);

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t classes() const { return layers_.back().out; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const ClassHeadOptions& options() const noexcept { return options_; }

  // Softmax probabilities for one input vector.
  std::vector<double> predict(std::span<const float> input) const;

  // Mean cross-entropy at initialization and after each epoch.
  std::vector<double> loss_history;
  double training_accuracy = 0.0;

 private:
  std::vector<Layer> layers_;
  ClassHeadOptions options_;
};

// Mini-batch Adam on cross-entropy. Labels must take at least two distinct
// values (kDegenerateLabels otherwise); the output width is max label + 1.
ClassHead train_class_head(const EmbeddingStore& collection, std::span<const std::size_t> labels,
                           const ClassHeadOptions& options);

void save_class_head(const ClassHead& head, const std::filesystem::path& path);
ClassHead load_class_head(const std::filesystem::path& path);

// Population variance of a probability vector.
double probability_dispersion(std::span<const double> probabilities);
// Population excess kurtosis (m4 / m2^2 - 3); 0 for a constant vector.
double probability_kurtosis(std::span<const double> probabilities);

inline double class_head_dispersion(const ClassHead& head, std::span<const float> query) {
  return probability_dispersion(head.predict(query));
}
inline double class_head_kurtosis(const ClassHead& head, std::span<const float> query) {
  return probability_kurtosis(head.predict(query));
}

// Loads an externally computed score file (auto-encoder error, fine-tuned
// regressor, image difficulty...) and checks it covers `query_ids` exactly.
PredictorOutput register_external_predictor(const std::filesystem::path& path,
                                            const std::vector<std::string>& query_ids);

}  // namespace iqpp
