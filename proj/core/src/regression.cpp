#include "hbma/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SVD>

#include "hbma/errors.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "regression";

// Orthogonalized norm below this fraction of the raw column norm marks the
// column as linearly dependent on the ones before it.
constexpr double kDependenceTolerance = 1e-13;

}  // namespace

bool RegressionModel::contains(std::size_t regressor) const {
  return std::binary_search(regressors.begin(), regressors.end(), regressor);
}

std::optional<double> RegressionModel::coefficient_of(std::size_t regressor) const {
  auto it = std::lower_bound(regressors.begin(), regressors.end(), regressor);
  if (it == regressors.end() || *it != regressor) return std::nullopt;
  return coefficients[static_cast<std::size_t>(it - regressors.begin())];
}

ModelPrior ModelPrior::per_size(std::vector<double> weights) {
  for (double w : weights) {
    if (!std::isfinite(w) || w <= 0.0) throw InputError(kModule, "prior weights must be positive and finite");
  }
  return ModelPrior{Kind::per_size, std::move(weights)};
}

double ModelPrior::log_weight(std::size_t model_size) const {
  if (kind == Kind::uniform) return 0.0;
  if (model_size == 0 || model_size > size_weights.size()) {
    throw InputError(kModule, "no prior weight for models of size " + std::to_string(model_size));
  }
  return std::log(size_weights[model_size - 1]);
}

double bic(double rss, std::size_t n_obs, std::size_t parameter_count) {
  const double n = static_cast<double>(n_obs);
  return n * std::log(std::max(rss, kRssFloor) / n) + static_cast<double>(parameter_count) * std::log(n);
}

double bic(const RegressionModel& model) { return bic(model.rss, model.n_obs, model.parameter_count()); }

double log_likelihood(const RegressionModel& model) { return -model.bic / 2.0; }

LeastSquaresFit::LeastSquaresFit(Eigen::VectorXd response, bool intercept)
    : response_(std::move(response)), intercept_(intercept) {
  const Eigen::Index n = response_.size();
  if (n == 0) throw InputError(kModule, "response is empty");
  if (!response_.allFinite()) throw InputError(kModule, "response has non-finite entries");
  residual_ = response_;
  if (intercept_) {
    if (n < 2) throw InputError(kModule, "an intercept needs at least 2 observations");
    const double norm = std::sqrt(static_cast<double>(n));
    q_ = Eigen::MatrixXd::Constant(n, 1, 1.0 / norm);
    r_ = Eigen::MatrixXd::Constant(1, 1, norm);
    column_norms_ = Eigen::VectorXd::Constant(1, norm);
    qty_ = q_.transpose() * response_;
    residual_ -= q_.col(0) * qty_[0];
    dependent_.push_back(false);
  } else {
    q_.resize(n, 0);
    r_.resize(0, 0);
    column_norms_.resize(0);
    qty_.resize(0);
  }
}

LeastSquaresFit LeastSquaresFit::extended(const Eigen::Ref<const Eigen::VectorXd>& column,
                                          std::size_t id) const {
  const Eigen::Index n = response_.size();
  if (column.size() != n) throw InputError(kModule, "column length does not match response");
  if (!column.allFinite()) throw InputError(kModule, "column " + std::to_string(id) + " has non-finite entries");
  const Eigen::Index m = q_.cols();
  if (m + 1 >= n) {
    throw InputError(kModule, "model with " + std::to_string(m + 1) +
                                  " coefficients needs more than " + std::to_string(n) + " observations");
  }
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
    throw InputError(kModule, "regressor " + std::to_string(id) + " is already in the model");
  }

  LeastSquaresFit out = *this;
  const double raw_norm = column.norm();
  Eigen::VectorXd v = column;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m);
  for (int pass = 0; pass < 2 && m > 0; ++pass) {
    const Eigen::VectorXd proj = q_.transpose() * v;
    v.noalias() -= q_ * proj;
    h += proj;
  }
  double rho = v.norm();
  const bool dependent = raw_norm == 0.0 || rho <= kDependenceTolerance * raw_norm;

  out.q_.conservativeResize(n, m + 1);
  out.r_.conservativeResize(m + 1, m + 1);
  out.r_.row(m).setZero();
  out.r_.col(m).head(m) = h;
  out.column_norms_.conservativeResize(m + 1);
  out.column_norms_[m] = raw_norm;
  out.qty_.conservativeResize(m + 1);
  if (dependent) {
    out.q_.col(m).setZero();
    out.r_(m, m) = 0.0;
    out.qty_[m] = 0.0;
  } else {
    out.q_.col(m) = v / rho;
    out.r_(m, m) = rho;
    const double along = out.q_.col(m).dot(residual_);
    out.qty_[m] = along;
    out.residual_ -= out.q_.col(m) * along;
  }
  out.ids_.push_back(id);
  out.dependent_.push_back(dependent);
  return out;
}

double LeastSquaresFit::condition() const {
  const Eigen::Index m = r_.cols();
  if (m == 0) return 1.0;
  for (bool d : dependent_) {
    if (d) return std::numeric_limits<double>::infinity();
  }
  Eigen::MatrixXd scaled = r_;
  for (Eigen::Index j = 0; j < m; ++j) scaled.col(j) /= column_norms_[j];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& s = svd.singularValues();
  const double smin = s[m - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

std::vector<std::size_t> LeastSquaresFit::dependent_ids() const {
  std::vector<std::size_t> out;
  const std::size_t offset = intercept_ ? 1 : 0;
  for (std::size_t j = 0; j < ids_.size(); ++j) {
    if (dependent_[j + offset]) out.push_back(ids_[j]);
  }
  return out;
}

RegressionModel LeastSquaresFit::model(std::span<const std::string> names) const {
  const Eigen::Index m = r_.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = m; i-- > 0;) {
    if (dependent_[static_cast<std::size_t>(i)]) continue;
    double acc = qty_[i];
    for (Eigen::Index j = i + 1; j < m; ++j) acc -= r_(i, j) * beta[j];
    beta[i] = acc / r_(i, i);
  }

  RegressionModel model;
  const std::size_t offset = intercept_ ? 1 : 0;
  if (intercept_) model.intercept = beta[0];

  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  for (std::size_t j : order) {
    const std::size_t id = ids_[j];
    model.regressors.push_back(id);
    model.names.push_back(id < names.size() ? names[id] : "x" + std::to_string(id));
    model.coefficients.push_back(beta[static_cast<Eigen::Index>(j + offset)]);
  }
  model.rss = rss();
  model.n_obs = n_obs();
  model.bic = bic(model);
  model.condition = condition();
  model.condition_flag = !(model.condition <= kConditionLimit);
  return model;
}

RegressionModel fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, bool with_intercept,
                    std::span<const std::string> names) {
  if (design.rows() != y.size()) throw InputError(kModule, "design and response lengths differ");
  if (design.cols() + (with_intercept ? 1 : 0) >= y.size()) {
    throw InputError(kModule, "design has too many columns for " + std::to_string(y.size()) + " observations");
  }
  LeastSquaresFit state(y, with_intercept);
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    state = state.extended(design.col(j), static_cast<std::size_t>(j));
  }
  return state.model(names);
}

LeastSquaresFit refit_extend(const LeastSquaresFit& parent,
                             const Eigen::Ref<const Eigen::VectorXd>& new_column, std::size_t id) {
  return parent.extended(new_column, id);
}

LeastSquaresFit RegressionProblem::fit_subset(std::span<const std::size_t> regressors) const {
  std::vector<std::size_t> sorted(regressors.begin(), regressors.end());
  std::sort(sorted.begin(), sorted.end());
  LeastSquaresFit state(response, intercept);
  for (std::size_t j : sorted) {
    if (j >= candidate_count()) throw InputError(kModule, "regressor index out of range");
    state = state.extended(candidates.col(static_cast<Eigen::Index>(j)), j);
  }
  return state;
}

void RegressionProblem::validate() const {
  if (response.size() == 0) throw InputError(kModule, "response is empty");
  if (candidates.rows() != response.size()) throw InputError(kModule, "candidate rows do not match response length");
  if (static_cast<std::size_t>(candidates.cols()) != names.size()) {
    throw InputError(kModule, "candidate names do not match column count");
  }
  if (!response.allFinite() || !candidates.allFinite()) throw InputError(kModule, "non-finite inputs");
}

RegressionProblem make_spectral_problem(const Spectrum& pixel, const SpectralLibrary& library) {
  if (!same_grid(pixel.grid(), library.grid())) {
    throw AlignmentError(kModule, "pixel spectrum and library are on different band grids; resample first");
  }
  const std::size_t bands = library.grid()->size();
  std::vector<Eigen::Index> rows;
  for (std::size_t b = 0; b < bands; ++b) {
    bool ok = library.band_mask()[b] != 0 && pixel.valid(b);
    for (const auto& s : library.spectra()) ok = ok && s.valid(b);
    if (ok) rows.push_back(static_cast<Eigen::Index>(b));
  }
  if (rows.empty()) throw InputError(kModule, "no valid bands shared by pixel and library");

  RegressionProblem problem;
  problem.intercept = false;
  const auto n = static_cast<Eigen::Index>(rows.size());
  problem.response.resize(n);
  problem.candidates.resize(n, static_cast<Eigen::Index>(library.size()));
  for (Eigen::Index i = 0; i < n; ++i) problem.response[i] = pixel.values()[rows[static_cast<std::size_t>(i)]];
  for (std::size_t j = 0; j < library.size(); ++j) {
    const auto& v = library[j].values();
    for (Eigen::Index i = 0; i < n; ++i) {
      problem.candidates(i, static_cast<Eigen::Index>(j)) = v[rows[static_cast<std::size_t>(i)]];
    }
    problem.names.push_back(library[j].name());
  }
  return problem;
}

}  // namespace hbma
