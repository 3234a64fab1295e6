#pragma once

// Beta regression with crossed random intercepts,
//   y ~ Beta(mu * phi, (1 - mu) * phi),  logit(mu) = X beta + u_item + u_name,
//   u_f ~ Normal(0, sigma_f^2),
// fitted by maximum marginal likelihood with the random effects integrated out
// by a Laplace approximation.

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ideolens/prompts.hpp"

namespace ideolens {

/// Binary condition coding for the consistency model. Constructed through
/// make(), which rejects best/refer without indirect and more than one preamble flag.
struct ConditionCode {
  bool indirect = false;
  bool best = false;
  bool refer = false;
  bool choices = false;
  bool ind_dec = false;
  bool ideo_dec = false;

  static ConditionCode make(bool indirect, bool best, bool refer, bool choices, bool ind_dec,
                            bool ideo_dec);
  static ConditionCode from(const WayOfAsking& way, PreambleGroup preamble);

  static const std::vector<std::string>& predictor_names();  // without intercept
  std::array<double, 6> values() const;
};

struct RandomFactor {
  std::string name;
  std::vector<int> level_of;  // per observation, 0..levels-1
  int levels = 0;
};

/// Encodes string labels to dense level indices in first-seen order.
RandomFactor make_factor(std::string name, std::span<const std::string> labels);

struct MixedBetaData {
  Eigen::VectorXd y;  // strictly inside (0,1)
  Eigen::MatrixXd X;  // first column is the intercept
  std::vector<std::string> predictors;
  std::vector<RandomFactor> factors;
};

/// Design with an intercept column plus the six condition predictors.
MixedBetaData condition_design(std::span<const double> y, std::span<const ConditionCode> codes,
                               std::span<const std::string> items,
                               std::span<const std::string> names);

/// Conditional log-likelihood sum_i log Beta(y_i; mu_i phi, (1-mu_i) phi) with
/// eta = X beta + offset. Gradient w.r.t. (beta, log phi) when requested.
double beta_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& beta, double log_phi, const Eigen::VectorXd& offset,
                   Eigen::VectorXd* gradient = nullptr);

/// Laplace-approximated marginal log-likelihood of a MixedBetaData. Parameters
/// are theta = (beta, log phi, log sigma_f for each active factor). Factors can
/// be switched off (variance pinned at 0), which removes their parameter.
class LaplaceBetaModel {
 public:
  explicit LaplaceBetaModel(const MixedBetaData& data);

  int dimension() const;
  void set_active(std::size_t factor, bool active);
  bool active(std::size_t factor) const { return active_[factor]; }

  /// Marginal log-likelihood; fills the analytic gradient when requested.
  double value(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient = nullptr);

  /// Conditional modes of the random effects from the last evaluation.
  const Eigen::VectorXd& modes() const { return u_; }

 private:
  bool solve_modes(const Eigen::VectorXd& beta, double phi, const Eigen::VectorXd& lambda);

  const MixedBetaData& data_;
  std::vector<bool> active_;
  std::vector<int> offset_;  // first column of each factor in u
  int q_ = 0;
  Eigen::VectorXd u_;
  std::vector<std::array<double, 2>> log_y_;  // log y, log(1 - y)
};

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  bool pin_variances_to_zero = false;
  double boundary_sigma = 1e-4;  // sigma below this is reported as 0
};

struct Coefficient {
  std::string predictor;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct RandomInterceptVariance {
  std::string factor;
  double variance = 0.0;
  bool at_boundary = false;
};

struct BetaRegressionFit {
  std::vector<Coefficient> coefficients;  // "(Intercept)" first
  double dispersion_phi = 0.0;
  double log_phi_std_error = 0.0;
  std::vector<RandomInterceptVariance> random_intercept_variances;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string message;
  std::string mu_link = "logit";

  const Coefficient& coefficient(std::string_view predictor) const;
};

/// Newton iterations with backtracking line search on the Laplace objective,
/// started from a least-squares fit of logit(y). Non-convergence is reported
/// in the result, not thrown. Throws StatsError for y outside (0,1), a rank
/// deficient design, or a random factor with fewer than 2 levels.
BetaRegressionFit fit_beta_regression(const MixedBetaData& data, const FitOptions& options = {});

}  // namespace ideolens
