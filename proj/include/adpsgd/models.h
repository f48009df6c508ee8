// Copyright 2026 The ADP-SGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Empirical-risk objectives F(theta) = (1/n) sum_i f(theta; x_i) with
// closed-form gradients.
#ifndef ADPSGD_MODELS_H_
#define ADPSGD_MODELS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "adpsgd/errors.h"

namespace adpsgd {

// Row i of `features` is x_i. Logistic-regression labels are in {0, 1}.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }
  // Throws DomainError on shape mismatch, n == 0 or non-finite entries.
  void Validate() const;
};

// Reads the CSV layout: header row `f0,...,f{p-1},label`, one example per row.
Dataset ReadDatasetCsv(const std::string& path);
void WriteDatasetCsv(const Dataset& data, const std::string& path);

// f = 1/2 (x^T theta - y)^2
struct LinearRegressionMse {
  bool operator==(const LinearRegressionMse&) const = default;
};

// f = log(1 + e^{x^T theta}) - y x^T theta, y in {0, 1}
struct LogisticRegression {
  bool operator==(const LogisticRegression&) const = default;
};

enum class Activation { kTanh, kRelu };
enum class MlpLoss { kSquared, kLogistic };

// Fully connected network. `layer_sizes` runs from the input width p to a
// single output unit, e.g. {p, 16, 1}. Hidden layers use `activation`; the
// output is linear and fed to `loss`. Parameters are packed layer by layer
// as W_l (column-major, out x in) followed by bias_l.
struct Mlp {
  std::vector<int> layer_sizes;
  Activation activation = Activation::kTanh;
  MlpLoss loss = MlpLoss::kSquared;
  bool operator==(const Mlp&) const = default;
};

using ModelSpec = std::variant<LinearRegressionMse, LogisticRegression, Mlp>;

Eigen::Index ParameterDimension(const ModelSpec& model, Eigen::Index p);
void Validate(const ModelSpec& model, Eigen::Index p);
std::string Describe(const ModelSpec& model);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Batch-averaged loss and gradient over `batch` (indices into data).
// Throws NumericalError if the result is not finite.
LossGrad LossAndGrad(const ModelSpec& model,
                     const Eigen::Ref<const Eigen::VectorXd>& theta,
                     std::span<const Eigen::Index> batch, const Dataset& data);

// Full objective F and its gradient.
LossGrad FullLossAndGrad(const ModelSpec& model,
                         const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const Dataset& data);

// Scale-to-norm clipping: g * min(1, radius / ||g||).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> Clip(
    const Eigen::MatrixBase<Derived>& grad, typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  if (!(radius > Scalar(0))) throw DomainError("clipping radius must be positive");
  const Scalar norm = grad.norm();
  if (norm <= radius) return grad;
  return grad * (radius / norm);
}

struct SmoothnessEstimate {
  double L_hat = 0.0;
  double G_hat = 0.0;
  // lambda_max((1/n) X^T X), only for linear regression.
  std::optional<double> exact_L;
  // All probe gradients vanished (e.g. all-zero features).
  bool degenerate = false;
};

// Empirical surrogates for the smoothness and bounded-gradient assumptions.
// Probes theta uniformly in the ball of `radius` around the origin.
// G_hat is the largest per-example gradient norm seen at a probe; L_hat is
// the largest gradient difference quotient over probe pairs, refined by a
// few power iterations on gradient differences.
SmoothnessEstimate EstimateBounds(const ModelSpec& model, const Dataset& data,
                                  int probe_count, double radius,
                                  std::uint64_t seed);

// lambda_max((1/n) X^T X).
double LinearRegressionSmoothness(const Dataset& data);

}  // namespace adpsgd

#endif  // ADPSGD_MODELS_H_
