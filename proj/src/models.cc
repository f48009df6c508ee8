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
#include "adpsgd/models.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "adpsgd/errors.h"

namespace adpsgd {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// log(1 + e^z) without overflow.
double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd Rows(const Dataset& data, std::span<const Eigen::Index> batch) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()), data.p());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.features.row(batch[i]);
  }
  return out;
}

Eigen::VectorXd Labels(const Dataset& data, std::span<const Eigen::Index> batch) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = data.labels[batch[i]];
  }
  return out;
}

LossGrad LinearLossGrad(const Eigen::Ref<const Eigen::VectorXd>& theta,
                        const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  const Eigen::VectorXd residual = x * theta - y;
  LossGrad out;
  out.loss = 0.5 * residual.squaredNorm() * inv_b;
  out.grad = x.transpose() * residual * inv_b;
  return out;
}

LossGrad LogisticLossGrad(const Eigen::Ref<const Eigen::VectorXd>& theta,
                          const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  const Eigen::VectorXd z = x * theta;
  Eigen::VectorXd dz(z.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += Softplus(z[i]) - y[i] * z[i];
    dz[i] = Sigmoid(z[i]) - y[i];
  }
  LossGrad out;
  out.loss = loss * inv_b;
  out.grad = x.transpose() * dz * inv_b;
  return out;
}

struct LayerView {
  Eigen::Index weight_offset;
  Eigen::Index bias_offset;
  int in;
  int out;
};

std::vector<LayerView> Layout(const Mlp& mlp) {
  std::vector<LayerView> layers;
  Eigen::Index offset = 0;
  for (std::size_t l = 1; l < mlp.layer_sizes.size(); ++l) {
    LayerView v;
    v.in = mlp.layer_sizes[l - 1];
    v.out = mlp.layer_sizes[l];
    v.weight_offset = offset;
    offset += static_cast<Eigen::Index>(v.in) * v.out;
    v.bias_offset = offset;
    offset += v.out;
    layers.push_back(v);
  }
  return layers;
}

LossGrad MlpLossGrad(const Mlp& mlp, const Eigen::Ref<const Eigen::VectorXd>& theta,
                     const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  using Eigen::Map;
  using Eigen::MatrixXd;
  const std::vector<LayerView> layers = Layout(mlp);
  const Eigen::Index batch = x.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  // activations[l] has shape (width_l x batch); pre[l] holds the hidden
  // pre-activations.
  std::vector<MatrixXd> activations;
  std::vector<MatrixXd> pre;
  activations.push_back(x.transpose());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerView& v = layers[l];
    Map<const MatrixXd> w(theta.data() + v.weight_offset, v.out, v.in);
    Map<const Eigen::VectorXd> bias(theta.data() + v.bias_offset, v.out);
    MatrixXd z = (w * activations.back()).colwise() + bias;
    if (l + 1 == layers.size()) {
      activations.push_back(std::move(z));
    } else {
      MatrixXd a = mlp.activation == Activation::kTanh
                       ? MatrixXd(z.array().tanh())
                       : MatrixXd(z.array().max(0.0));
      pre.push_back(std::move(z));
      activations.push_back(std::move(a));
    }
  }

  const Eigen::RowVectorXd out = activations.back().row(0);
  Eigen::RowVectorXd d_out(batch);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    if (mlp.loss == MlpLoss::kSquared) {
      const double r = out[i] - y[i];
      loss += 0.5 * r * r;
      d_out[i] = r;
    } else {
      loss += Softplus(out[i]) - y[i] * out[i];
      d_out[i] = Sigmoid(out[i]) - y[i];
    }
  }

  LossGrad result;
  result.loss = loss * inv_b;
  result.grad = Eigen::VectorXd::Zero(theta.size());
  MatrixXd delta = d_out * inv_b;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerView& v = layers[l];
    Map<MatrixXd> gw(result.grad.data() + v.weight_offset, v.out, v.in);
    Map<Eigen::VectorXd> gb(result.grad.data() + v.bias_offset, v.out);
    gw = delta * activations[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0) break;
    Map<const MatrixXd> w(theta.data() + v.weight_offset, v.out, v.in);
    MatrixXd back = w.transpose() * delta;
    const MatrixXd& z = pre[l - 1];
    if (mlp.activation == Activation::kTanh) {
      back.array() *= 1.0 - activations[l].array().square();
    } else {
      // Subgradient 0 at the kink.
      back.array() *= (z.array() > 0.0).cast<double>();
    }
    delta = std::move(back);
  }
  return result;
}

void CheckFinite(const LossGrad& lg) {
  if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
    throw NumericalError("loss or gradient overflowed to a non-finite value");
  }
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
      field.pop_back();
    }
    std::size_t start = field.find_first_not_of(' ');
    fields.push_back(start == std::string::npos ? "" : field.substr(start));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double ParseDouble(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw IoError("cannot parse number '" + s + "' at " + where);
  }
  return v;
}

}  // namespace

void Dataset::Validate() const {
  if (features.rows() != labels.size()) {
    throw DomainError("features and labels disagree on the number of rows");
  }
  if (features.rows() < 1) throw DomainError("dataset must contain n >= 1 rows");
  if (!features.allFinite() || !labels.allFinite()) {
    throw DomainError("dataset contains non-finite entries");
  }
}

Dataset ReadDatasetCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file " + path);
  const std::vector<std::string> header = SplitCsvLine(line);
  if (header.size() < 2 || header.back() != "label") {
    throw IoError(path + ": header must be f0,...,f{p-1},label");
  }
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw IoError(path + ": expected column f" + std::to_string(j) +
                    ", found '" + header[j] + "'");
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = SplitCsvLine(line);
    if (fields.size() != p + 1) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(p + 1) + " fields");
    }
    for (const std::string& f : fields) {
      values.push_back(ParseDouble(f, path + ":" + std::to_string(line_no)));
    }
    ++rows;
  }
  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  data.labels.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values[i * (p + 1) + j];
    }
    data.labels[static_cast<Eigen::Index>(i)] = values[i * (p + 1) + p];
  }
  data.Validate();
  return data;
}

void WriteDatasetCsv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path);
  for (Eigen::Index j = 0; j < data.p(); ++j) out << 'f' << j << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) out << data.features(i, j) << ',';
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

Eigen::Index ParameterDimension(const ModelSpec& model, Eigen::Index p) {
  return std::visit(Overloaded{
                        [&](const LinearRegressionMse&) { return p; },
                        [&](const LogisticRegression&) { return p; },
                        [&](const Mlp& mlp) {
                          Eigen::Index d = 0;
                          for (const LayerView& v : Layout(mlp)) {
                            d += static_cast<Eigen::Index>(v.in) * v.out + v.out;
                          }
                          return d;
                        },
                    },
                    model);
}

void Validate(const ModelSpec& model, Eigen::Index p) {
  if (p < 1) throw DomainError("feature dimension must be >= 1");
  if (const auto* mlp = std::get_if<Mlp>(&model)) {
    const auto& sizes = mlp->layer_sizes;
    if (sizes.size() < 2) throw DomainError("MLP needs at least input and output layers");
    if (sizes.front() != p) {
      throw DomainError("MLP input width " + std::to_string(sizes.front()) +
                        " does not match feature dimension " + std::to_string(p));
    }
    if (sizes.back() != 1) throw DomainError("MLP output width must be 1");
    for (int s : sizes) {
      if (s < 1) throw DomainError("MLP layer sizes must be positive");
    }
  }
}

std::string Describe(const ModelSpec& model) {
  return std::visit(
      Overloaded{
          [](const LinearRegressionMse&) { return std::string("linreg"); },
          [](const LogisticRegression&) { return std::string("logreg"); },
          [](const Mlp& mlp) {
            std::ostringstream os;
            os << "mlp(";
            for (std::size_t i = 0; i < mlp.layer_sizes.size(); ++i) {
              os << (i ? "," : "") << mlp.layer_sizes[i];
            }
            os << ';' << (mlp.activation == Activation::kTanh ? "tanh" : "relu")
               << ';' << (mlp.loss == MlpLoss::kSquared ? "squared" : "logistic")
               << ')';
            return os.str();
          },
      },
      model);
}

LossGrad LossAndGrad(const ModelSpec& model,
                     const Eigen::Ref<const Eigen::VectorXd>& theta,
                     std::span<const Eigen::Index> batch, const Dataset& data) {
  if (batch.empty()) throw DomainError("empty batch");
  if (theta.size() != ParameterDimension(model, data.p())) {
    throw DomainError("theta has dimension " + std::to_string(theta.size()) +
                      ", model expects " +
                      std::to_string(ParameterDimension(model, data.p())));
  }
  for (Eigen::Index i : batch) {
    if (i < 0 || i >= data.n()) {
      throw DomainError("batch index " + std::to_string(i) + " out of range");
    }
  }
  if (!theta.allFinite()) throw NumericalError("theta is not finite");
  const Eigen::MatrixXd x = Rows(data, batch);
  const Eigen::VectorXd y = Labels(data, batch);
  LossGrad out = std::visit(
      Overloaded{
          [&](const LinearRegressionMse&) { return LinearLossGrad(theta, x, y); },
          [&](const LogisticRegression&) { return LogisticLossGrad(theta, x, y); },
          [&](const Mlp& mlp) { return MlpLossGrad(mlp, theta, x, y); },
      },
      model);
  CheckFinite(out);
  return out;
}

LossGrad FullLossAndGrad(const ModelSpec& model,
                         const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const Dataset& data) {
  if (theta.size() != ParameterDimension(model, data.p())) {
    throw DomainError("theta dimension does not match model");
  }
  if (!theta.allFinite()) throw NumericalError("theta is not finite");
  LossGrad out = std::visit(
      Overloaded{
          [&](const LinearRegressionMse&) {
            return LinearLossGrad(theta, data.features, data.labels);
          },
          [&](const LogisticRegression&) {
            return LogisticLossGrad(theta, data.features, data.labels);
          },
          [&](const Mlp& mlp) {
            return MlpLossGrad(mlp, theta, data.features, data.labels);
          },
      },
      model);
  CheckFinite(out);
  return out;
}

double LinearRegressionSmoothness(const Dataset& data) {
  const Eigen::MatrixXd gram =
      data.features.transpose() * data.features / static_cast<double>(data.n());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

SmoothnessEstimate EstimateBounds(const ModelSpec& model, const Dataset& data,
                                  int probe_count, double radius,
                                  std::uint64_t seed) {
  if (probe_count < 2) throw DomainError("probe_count must be >= 2");
  if (!(radius > 0.0)) throw DomainError("probe radius must be positive");
  data.Validate();
  Validate(model, data.p());
  const Eigen::Index d = ParameterDimension(model, data.p());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  auto random_unit = [&]() {
    Eigen::VectorXd v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = normal(rng);
    return Eigen::VectorXd(v / v.norm());
  };

  std::vector<Eigen::VectorXd> probes;
  std::vector<Eigen::VectorXd> grads;
  SmoothnessEstimate est;
  for (int k = 0; k < probe_count; ++k) {
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(d));
    Eigen::VectorXd theta = random_unit() * r;
    grads.push_back(FullLossAndGrad(model, theta, data).grad);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const Eigen::Index idx[1] = {i};
      est.G_hat = std::max(est.G_hat, LossAndGrad(model, theta, idx, data).grad.norm());
    }
    probes.push_back(std::move(theta));
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      const double dist = (probes[i] - probes[j]).norm();
      if (dist > 0.0) {
        est.L_hat = std::max(est.L_hat, (grads[i] - grads[j]).norm() / dist);
      }
    }
  }
  // Power iteration on gradient differences sharpens L_hat towards the
  // largest local curvature. The centre of the probe ball is always an anchor.
  probes.push_back(Eigen::VectorXd::Zero(d));
  grads.push_back(FullLossAndGrad(model, probes.back(), data).grad);
  const double h = 1e-4 * std::max(1.0, radius);
  std::vector<std::size_t> anchors = {probes.size() - 1};
  for (int k = 0; k < std::min(probe_count, 8); ++k) anchors.push_back(static_cast<std::size_t>(k));
  for (std::size_t k : anchors) {
    Eigen::VectorXd v = random_unit();
    for (int iter = 0; iter < 30; ++iter) {
      const Eigen::VectorXd diff =
          FullLossAndGrad(model, probes[k] + h * v, data).grad - grads[k];
      const double q = diff.norm() / h;
      if (!(q > 0.0)) break;
      est.L_hat = std::max(est.L_hat, q);
      v = diff / diff.norm();
    }
  }
  est.degenerate = !(est.G_hat > 0.0);
  if (std::holds_alternative<LinearRegressionMse>(model)) {
    est.exact_L = LinearRegressionSmoothness(data);
    if (est.L_hat > *est.exact_L * (1.0 + 1e-6)) {
      std::ostringstream os;
      os << "estimated L " << est.L_hat << " exceeds spectral bound " << *est.exact_L;
      throw NumericalError(os.str());
    }
  }
  return est;
}

}  // namespace adpsgd
