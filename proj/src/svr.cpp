// nu-SVR trained by SMO with the two-class-aware working set selection of
// libsvm's Solver_NU (no shrinking, no kernel cache).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "iqpp/meta_regressor.hpp"

namespace iqpp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTau = 1e-12;

double kernel_value(std::span<const double> a, std::span<const double> b, const SvrParams& p) {
  if (p.kernel == KernelType::kLinear) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-p.gamma * d2);
}

double default_gamma(std::span<const double> x, std::size_t features) {
  if (x.empty()) return 1.0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  return var > 0.0 ? 1.0 / (static_cast<double>(features) * var) : 1.0;
}

class NuSolver {
 public:
  NuSolver(std::vector<double> kernel, std::size_t n, std::span<const double> targets, double C)
      : kernel_(std::move(kernel)), n_(n), size_(2 * n), C_(C) {
    y_.resize(size_);
    p_.resize(size_);
    alpha_.resize(size_);
    for (std::size_t i = 0; i < n; ++i) {
      y_[i] = 1;
      y_[i + n] = -1;
      p_[i] = -targets[i];
      p_[i + n] = targets[i];
    }
  }

  // Feasible start: spread C*nu*n/2 over both halves in index order.
  void initialize(double nu) {
    double sum = C_ * nu * static_cast<double>(n_) / 2.0;
    for (std::size_t i = 0; i < n_; ++i) {
      alpha_[i] = alpha_[i + n_] = std::min(sum, C_);
      sum -= alpha_[i];
    }
    G_ = p_;
    for (std::size_t j = 0; j < size_; ++j) {
      if (alpha_[j] == 0.0) continue;
      for (std::size_t i = 0; i < size_; ++i) G_[i] += q(i, j) * alpha_[j];
    }
  }

  std::size_t solve(double tolerance, std::size_t max_iterations, bool& converged) {
    std::size_t iter = 0;
    converged = false;
    while (iter < max_iterations) {
      std::size_t i = 0;
      std::size_t j = 0;
      if (select_working_set(tolerance, i, j)) {
        converged = true;
        break;
      }
      ++iter;
      update_pair(i, j);
    }
    return iter;
  }

  // (rho, r) as in libsvm's Solver_NU::calculate_rho.
  std::pair<double, double> rho_and_r() const {
    double ub[2] = {kInf, kInf};
    double lb[2] = {-kInf, -kInf};
    double sum_free[2] = {0.0, 0.0};
    std::size_t free_count[2] = {0, 0};
    for (std::size_t i = 0; i < size_; ++i) {
      const int s = y_[i] == 1 ? 0 : 1;
      if (at_upper(i)) {
        lb[s] = std::max(lb[s], G_[i]);
      } else if (at_lower(i)) {
        ub[s] = std::min(ub[s], G_[i]);
      } else {
        ++free_count[s];
        sum_free[s] += G_[i];
      }
    }
    double r[2];
    for (int s = 0; s < 2; ++s) {
      r[s] = free_count[s] > 0 ? sum_free[s] / static_cast<double>(free_count[s])
                               : (ub[s] + lb[s]) / 2.0;
    }
    return {(r[0] - r[1]) / 2.0, (r[0] + r[1]) / 2.0};
  }

  double coefficient(std::size_t i) const { return alpha_[i] - alpha_[i + n_]; }
  double alpha(std::size_t i) const { return alpha_[i]; }

 private:
  double q(std::size_t i, std::size_t j) const {
    return static_cast<double>(y_[i] * y_[j]) * kernel_[(i % n_) * n_ + (j % n_)];
  }
  double qd(std::size_t i) const { return kernel_[(i % n_) * n_ + (i % n_)]; }
  bool at_upper(std::size_t i) const { return alpha_[i] >= C_; }
  bool at_lower(std::size_t i) const { return alpha_[i] <= 0.0; }

  // Returns true when the KKT gap is below tolerance.
  bool select_working_set(double tolerance, std::size_t& out_i, std::size_t& out_j) const {
    double gmax_p = -kInf, gmax_p2 = -kInf;
    double gmax_n = -kInf, gmax_n2 = -kInf;
    std::size_t ip = size_, in = size_;
    for (std::size_t t = 0; t < size_; ++t) {
      if (y_[t] == 1) {
        if (!at_upper(t) && -G_[t] >= gmax_p) {
          gmax_p = -G_[t];
          ip = t;
        }
      } else if (!at_lower(t) && G_[t] >= gmax_n) {
        gmax_n = G_[t];
        in = t;
      }
    }

    std::size_t best_j = size_;
    double best_obj = kInf;
    for (std::size_t j = 0; j < size_; ++j) {
      if (y_[j] == 1) {
        if (at_lower(j)) continue;
        const double grad_diff = gmax_p + G_[j];
        gmax_p2 = std::max(gmax_p2, G_[j]);
        if (grad_diff > 0.0) {
          const double quad = qd(ip) + qd(j) - 2.0 * q(ip, j);
          const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= best_obj) {
            best_j = j;
            best_obj = obj;
          }
        }
      } else {
        if (at_upper(j)) continue;
        const double grad_diff = gmax_n - G_[j];
        gmax_n2 = std::max(gmax_n2, -G_[j]);
        if (grad_diff > 0.0) {
          const double quad = qd(in) + qd(j) - 2.0 * q(in, j);
          const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= best_obj) {
            best_j = j;
            best_obj = obj;
          }
        }
      }
    }
    if (std::max(gmax_p + gmax_p2, gmax_n + gmax_n2) < tolerance || best_j == size_) return true;
    out_i = y_[best_j] == 1 ? ip : in;
    out_j = best_j;
    return false;
  }

  // Both indices share a label, so only the same-sign update applies.
  void update_pair(std::size_t i, std::size_t j) {
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double quad = qd(i) + qd(j) - 2.0 * q(i, j);
    if (quad <= 0.0) quad = kTau;
    const double delta = (G_[i] - G_[j]) / quad;
    const double sum = alpha_[i] + alpha_[j];
    alpha_[i] -= delta;
    alpha_[j] += delta;
    if (sum > C_) {
      if (alpha_[i] > C_) {
        alpha_[i] = C_;
        alpha_[j] = sum - C_;
      }
    } else if (alpha_[j] < 0.0) {
      alpha_[j] = 0.0;
      alpha_[i] = sum;
    }
    if (sum > C_) {
      if (alpha_[j] > C_) {
        alpha_[j] = C_;
        alpha_[i] = sum - C_;
      }
    } else if (alpha_[i] < 0.0) {
      alpha_[i] = 0.0;
      alpha_[j] = sum;
    }
    const double di = alpha_[i] - old_i;
    const double dj = alpha_[j] - old_j;
    for (std::size_t t = 0; t < size_; ++t) G_[t] += q(t, i) * di + q(t, j) * dj;
  }

  std::vector<double> kernel_;
  std::size_t n_;
  std::size_t size_;
  double C_;
  std::vector<int> y_;
  std::vector<double> p_;
  std::vector<double> alpha_;
  std::vector<double> G_;
};

}  // namespace

std::string_view to_string(KernelType k) { return k == KernelType::kLinear ? "linear" : "rbf"; }

double predict(const SvrModel& model, std::span<const double> row) {
  if (row.size() != model.features) {
    throw Error(ErrorCode::kNormalizationMismatch, "feature row width differs from the model");
  }
  double sum = model.bias;
  for (std::size_t s = 0; s < model.coefficients.size(); ++s) {
    const std::span<const double> sv(model.support_vectors.data() + s * model.features,
                                     model.features);
    sum += model.coefficients[s] * kernel_value(sv, row, model.params);
  }
  return sum;
}

SvrModel fit_nu_svr(std::span<const double> x, std::size_t features,
                    std::span<const double> targets, const SvrParams& params) {
  if (features == 0 || x.size() != targets.size() * features) {
    throw Error(ErrorCode::kLengthMismatch, "feature matrix does not match target count");
  }
  if (targets.empty()) throw Error(ErrorCode::kTooFewRows, "nu-SVR needs at least one row");
  if (!(params.C > 0.0) || !(params.nu > 0.0 && params.nu <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "nu-SVR needs C > 0 and nu in (0, 1]");
  }
  const std::size_t n = targets.size();
  SvrModel model;
  model.params = params;
  model.features = features;
  if (params.kernel == KernelType::kRbf && params.gamma <= 0.0) {
    model.params.gamma = default_gamma(x, features);
  }

  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) {
    model.degenerate_targets = true;
    model.bias = *lo;
    return model;
  }

  auto row = [&](std::size_t i) { return x.subspan(i * features, features); };
  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      kernel[i * n + j] = kernel[j * n + i] = kernel_value(row(i), row(j), model.params);
    }
  }

  NuSolver solver(std::move(kernel), n, targets, params.C);
  solver.initialize(params.nu);
  bool converged = false;
  model.iterations = solver.solve(params.tolerance, params.max_iterations, converged);
  model.converged = converged;
  const auto [rho, r] = solver.rho_and_r();
  model.bias = -rho;
  model.epsilon = -r;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = solver.coefficient(i);
    if (c == 0.0) continue;
    model.coefficients.push_back(c);
    const auto v = row(i);
    model.support_vectors.insert(model.support_vectors.end(), v.begin(), v.end());
  }
  return model;
}

}  // namespace iqpp
