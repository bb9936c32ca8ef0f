#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hbma/spectral.hpp"

namespace hbma {

/// Designs whose column-equilibrated condition number exceeds this are flagged.
inline constexpr double kConditionLimit = 1e10;
/// Floor applied to the residual sum of squares before taking its log.
inline constexpr double kRssFloor = 1e-300;

/// A fitted least-squares model over a subset of candidate regressors.
struct RegressionModel {
  std::vector<std::size_t> regressors;  // candidate indices, ascending
  std::vector<std::string> names;       // parallel to regressors
  std::vector<double> coefficients;     // parallel to regressors
  std::optional<double> intercept;
  double rss = 0.0;
  std::size_t n_obs = 0;
  double bic = 0.0;
  double condition = 1.0;
  bool condition_flag = false;

  std::size_t size() const { return regressors.size(); }
  /// Coefficient count used in the penalty: regressors, intercept, noise variance.
  std::size_t parameter_count() const { return regressors.size() + (intercept ? 1 : 0) + 1; }
  bool contains(std::size_t regressor) const;
  std::optional<double> coefficient_of(std::size_t regressor) const;
};

/// Prior over models. Uniform, or a positive weight per model size
/// (weights[k - 1] applies to models with k regressors).
struct ModelPrior {
  enum class Kind { uniform, per_size };
  Kind kind = Kind::uniform;
  std::vector<double> size_weights;

  static ModelPrior uniform() { return {}; }
  static ModelPrior per_size(std::vector<double> weights);

  /// ln Pr(M) up to a constant shared by all models.
  double log_weight(std::size_t model_size) const;
};

/// n ln(max(rss, floor) / n) + k' ln n.
double bic(double rss, std::size_t n_obs, std::size_t parameter_count);
double bic(const RegressionModel& model);

/// -bic / 2.
double log_likelihood(const RegressionModel& model);

/// Incrementally built QR factorization of [1? | x_1 | ... | x_k] against a
/// fixed response. Columns are orthogonalized with two passes of classical
/// Gram-Schmidt, and the residual vector is carried explicitly so that tiny
/// residual sums stay accurate.
class LeastSquaresFit {
 public:
  LeastSquaresFit(Eigen::VectorXd response, bool intercept);

  /// New fit with one more column appended; this fit is unchanged.
  LeastSquaresFit extended(const Eigen::Ref<const Eigen::VectorXd>& column, std::size_t id) const;

  std::size_t n_obs() const { return static_cast<std::size_t>(response_.size()); }
  std::size_t column_count() const { return ids_.size(); }
  const std::vector<std::size_t>& ids() const { return ids_; }
  bool has_intercept() const { return intercept_; }
  double rss() const { return residual_.squaredNorm(); }
  const Eigen::VectorXd& residual() const { return residual_; }
  const Eigen::VectorXd& response() const { return response_; }

  /// Condition number of the design after scaling every column to unit norm.
  double condition() const;

  /// Ids of columns that were numerically dependent on earlier ones.
  std::vector<std::size_t> dependent_ids() const;

  /// Materializes the model. `names` maps candidate ids to names; when empty,
  /// names are "x<id>".
  RegressionModel model(std::span<const std::string> names = {}) const;

 private:
  Eigen::VectorXd response_;
  bool intercept_;
  std::vector<std::size_t> ids_;   // insertion order, excluding intercept
  Eigen::MatrixXd q_;              // n x m orthonormal columns (zero for dependent ones)
  Eigen::MatrixXd r_;              // m x m upper triangular
  Eigen::VectorXd column_norms_;   // per design column, intercept first
  Eigen::VectorXd qty_;
  Eigen::VectorXd residual_;
  std::vector<bool> dependent_;
};

/// Least-squares fit of y on the columns of `design`. Column j gets id j.
RegressionModel fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, bool with_intercept,
                    std::span<const std::string> names = {});

/// Extends a parent fit by one column through a factorization update.
LeastSquaresFit refit_extend(const LeastSquaresFit& parent,
                             const Eigen::Ref<const Eigen::VectorXd>& new_column, std::size_t id);

/// Response, candidate columns and their names: everything a model search
/// needs. Spectral problems restrict every vector to the jointly valid bands.
struct RegressionProblem {
  Eigen::VectorXd response;
  Eigen::MatrixXd candidates;  // n_obs x p
  std::vector<std::string> names;
  bool intercept = false;

  std::size_t n_obs() const { return static_cast<std::size_t>(response.size()); }
  std::size_t candidate_count() const { return names.size(); }

  /// Fits the subset `regressors` (any order) from scratch.
  LeastSquaresFit fit_subset(std::span<const std::size_t> regressors) const;

  void validate() const;
};

/// Pixel on library: no intercept, bands restricted to those valid in the
/// library band mask, the pixel, and every library spectrum.
RegressionProblem make_spectral_problem(const Spectrum& pixel, const SpectralLibrary& library);

}  // namespace hbma
