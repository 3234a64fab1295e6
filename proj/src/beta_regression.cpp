#include "ideolens/beta_regression.hpp"

#include <fmt/format.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "ideolens/error.hpp"

namespace ideolens {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Derivatives of one observation's log-density with respect to the linear
// predictor eta and tau = log(phi). w = -d2l/deta2 (observed information).
struct ObsTerms {
  double ll = 0.0;
  double g = 0.0;
  double w = 0.0;
  double w_fisher = 0.0;
  double w_eta = 0.0;
  double ll_tau = 0.0;
  double g_tau = 0.0;
  double w_tau = 0.0;
};

using ObsData = std::array<double, 2>;

enum class Order { Value, Newton, Full };

ObsTerms obs_terms(double eta, double phi, const ObsData& o, Order order) {
  const double mu = 1.0 / (1.0 + std::exp(-eta));
  const double nu = 1.0 / (1.0 + std::exp(eta));  // 1 - mu
  const double a = mu * phi;
  const double b = nu * phi;
  ObsTerms t;
  t.ll = std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * o[0] +
         (b - 1.0) * o[1];
  if (order == Order::Value) return t;

  const double ystar = o[0] - o[1];
  const double psi_a = boost::math::digamma(a);
  const double psi_b = boost::math::digamma(b);
  const double psi1_a = boost::math::trigamma(a);
  const double psi1_b = boost::math::trigamma(b);
  const double m1 = mu * nu;
  const double m2 = m1 * (nu - mu);
  const double f = phi * (ystar - psi_a + psi_b);
  const double f1 = -phi * phi * (psi1_a + psi1_b);
  t.g = f * m1;
  t.w = -(f1 * m1 * m1 + f * m2);
  t.w_fisher = -f1 * m1 * m1;
  if (order == Order::Newton) return t;

  const double psi2_a = boost::math::polygamma(2, a);
  const double psi2_b = boost::math::polygamma(2, b);
  const double m3 = m1 * (1.0 - 6.0 * mu * nu);
  const double f2 = -phi * phi * phi * (psi2_a - psi2_b);
  t.w_eta = -(f2 * m1 * m1 * m1 + 3.0 * f1 * m1 * m2 + f * m3);

  t.ll_tau = phi * (boost::math::digamma(phi) - mu * psi_a - nu * psi_b + mu * o[0] +
                    nu * o[1]);
  const double f_tau = phi * ((ystar - psi_a + psi_b) + phi * (-mu * psi1_a + nu * psi1_b));
  const double f1_tau =
      phi * (-2.0 * phi * (psi1_a + psi1_b) - phi * phi * (mu * psi2_a + nu * psi2_b));
  t.g_tau = f_tau * m1;
  t.w_tau = -(f1_tau * m1 * m1 + f_tau * m2);
  return t;
}

std::vector<ObsData> prepare(const VectorXd& y) {
  std::vector<ObsData> out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0 && y[i] < 1.0))
      throw StatsError(fmt::format("response {} at row {} is not strictly inside (0,1)", y[i], i));
    out[i] = {std::log(y[i]), std::log1p(-y[i])};
  }
  return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Condition coding

ConditionCode ConditionCode::make(bool indirect, bool best, bool refer, bool choices,
                                  bool ind_dec, bool ideo_dec) {
  if ((best || refer) && !indirect)
    throw ValidationError("condition code: best/refer require indirect");
  if (int(choices) + int(ind_dec) + int(ideo_dec) > 1)
    throw ValidationError("condition code: at most one of choices/ind_dec/ideo_dec");
  return {indirect, best, refer, choices, ind_dec, ideo_dec};
}

ConditionCode ConditionCode::from(const WayOfAsking& way, PreambleGroup preamble) {
  if (!way.legal()) throw ValidationError("illegal way of asking");
  const bool indirect = way.directness == Directness::Indirect;
  const bool best = indirect && *way.adjective == Adjective::Best;
  const bool refer = indirect && *way.verb == Verb::Refer;
  switch (preamble) {
    case PreambleGroup::Null:
      return make(indirect, best, refer, false, false, false);
    case PreambleGroup::Choices:
      return make(indirect, best, refer, true, false, false);
    case PreambleGroup::IndividualDeclaration:
      return make(indirect, best, refer, false, true, false);
    case PreambleGroup::IdeologyDeclaration:
      return make(indirect, best, refer, false, false, true);
    default:
      throw ValidationError(
          fmt::format("preamble group {} is not an Experiment 2 condition", to_string(preamble)));
  }
}

const std::vector<std::string>& ConditionCode::predictor_names() {
  static const std::vector<std::string> names{"indirect", "best",    "refer",
                                              "choices",  "ind_dec", "ideo_dec"};
  return names;
}

std::array<double, 6> ConditionCode::values() const {
  return {double(indirect), double(best), double(refer),
          double(choices),  double(ind_dec), double(ideo_dec)};
}

RandomFactor make_factor(std::string name, std::span<const std::string> labels) {
  RandomFactor f;
  f.name = std::move(name);
  std::map<std::string, int> index;
  f.level_of.reserve(labels.size());
  for (const auto& l : labels) {
    auto [it, inserted] = index.emplace(l, static_cast<int>(index.size()));
    f.level_of.push_back(it->second);
  }
  f.levels = static_cast<int>(index.size());
  return f;
}

MixedBetaData condition_design(std::span<const double> y, std::span<const ConditionCode> codes,
                               std::span<const std::string> items,
                               std::span<const std::string> names) {
  const auto n = y.size();
  if (codes.size() != n || items.size() != n || names.size() != n)
    throw StatsError("condition design: inputs differ in length");
  MixedBetaData d;
  d.y = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(n));
  d.X.resize(static_cast<Eigen::Index>(n), 7);
  for (std::size_t i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    const auto v = codes[i].values();
    for (int k = 0; k < 6; ++k) d.X(i, k + 1) = v[k];
  }
  d.predictors = {"(Intercept)"};
  for (const auto& p : ConditionCode::predictor_names()) d.predictors.push_back(p);
  d.factors = {make_factor("item", items), make_factor("name", names)};
  return d;
}

double beta_loglik(const VectorXd& y, const MatrixXd& X, const VectorXd& beta, double log_phi,
                   const VectorXd& offset, VectorXd* gradient) {
  const auto obs = prepare(y);
  const double phi = std::exp(log_phi);
  const VectorXd eta = X * beta + offset;
  double ll = 0.0;
  if (gradient) *gradient = VectorXd::Zero(beta.size() + 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto t = obs_terms(eta[i], phi, obs[i], gradient ? Order::Full : Order::Value);
    ll += t.ll;
    if (gradient) {
      gradient->head(beta.size()) += t.g * X.row(i).transpose();
      (*gradient)[beta.size()] += t.ll_tau;
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Laplace objective

LaplaceBetaModel::LaplaceBetaModel(const MixedBetaData& data)
    : data_(data), active_(data.factors.size(), true), log_y_(prepare(data.y)) {
  if (data_.factors.size() > 8) throw StatsError("at most 8 random factors are supported");
  for (const auto& f : data_.factors) {
    if (f.level_of.size() != static_cast<std::size_t>(data_.y.size()))
      throw StatsError(fmt::format("factor '{}' has wrong length", f.name));
  }
  set_active(data_.factors.size(), true);
}

int LaplaceBetaModel::dimension() const {
  int d = static_cast<int>(data_.X.cols()) + 1;
  for (bool a : active_) d += a ? 1 : 0;
  return d;
}

void LaplaceBetaModel::set_active(std::size_t factor, bool active) {
  if (factor < active_.size()) active_[factor] = active;
  offset_.assign(data_.factors.size(), -1);
  q_ = 0;
  for (std::size_t f = 0; f < data_.factors.size(); ++f) {
    if (!active_[f]) continue;
    offset_[f] = q_;
    q_ += data_.factors[f].levels;
  }
  u_ = VectorXd::Zero(q_);
}

bool LaplaceBetaModel::solve_modes(const VectorXd& beta, double phi, const VectorXd& lambda) {
  const auto& obs = log_y_;
  const auto n = data_.y.size();
  const VectorXd xb = data_.X * beta;

  auto eta_at = [&](const VectorXd& u, Eigen::Index i) {
    double e = xb[i];
    for (std::size_t f = 0; f < data_.factors.size(); ++f)
      if (active_[f]) e += u[offset_[f] + data_.factors[f].level_of[i]];
    return e;
  };
  auto objective = [&](const VectorXd& u) {
    double h = -0.5 * (lambda.array() * u.array().square()).sum();
    for (Eigen::Index i = 0; i < n; ++i) h += obs_terms(eta_at(u, i), phi, obs[i], Order::Value).ll;
    return h;
  };

  double h = objective(u_);
  for (int iter = 0; iter < 200; ++iter) {
    VectorXd grad = -(lambda.array() * u_.array()).matrix();
    MatrixXd H = lambda.asDiagonal();
    MatrixXd H_fisher = H;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto t = obs_terms(eta_at(u_, i), phi, obs[i], Order::Newton);
      for (std::size_t f = 0; f < data_.factors.size(); ++f) {
        if (!active_[f]) continue;
        const int cf = offset_[f] + data_.factors[f].level_of[i];
        grad[cf] += t.g;
        for (std::size_t e = 0; e < data_.factors.size(); ++e) {
          if (!active_[e]) continue;
          const int ce = offset_[e] + data_.factors[e].level_of[i];
          H(cf, ce) += t.w;
          H_fisher(cf, ce) += t.w_fisher;
        }
      }
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10) return true;

    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) llt.compute(H_fisher);
    if (llt.info() != Eigen::Success) return false;
    const VectorXd step = llt.solve(grad);

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      const VectorXd trial = u_ + t * step;
      const double ht = objective(trial);
      if (std::isfinite(ht) && ht >= h - 1e-12 * std::abs(h)) {
        u_ = trial;
        h = ht;
        accepted = true;
        break;
      }
    }
    if (!accepted || (t * step).lpNorm<Eigen::Infinity>() < 1e-13) return accepted;
  }
  return false;
}

double LaplaceBetaModel::value(const VectorXd& theta, VectorXd* gradient) {
  const auto p = data_.X.cols();
  if (theta.size() != dimension()) throw StatsError("theta has wrong dimension");
  const VectorXd beta = theta.head(p);
  const double phi = std::exp(theta[p]);
  const auto n = data_.y.size();
  const auto& obs = log_y_;

  // lambda_j = 1 / sigma^2 for the factor owning column j
  VectorXd lambda(q_);
  std::vector<double> rho(data_.factors.size(), 0.0);
  {
    Eigen::Index k = p + 1;
    for (std::size_t f = 0; f < data_.factors.size(); ++f) {
      if (!active_[f]) continue;
      rho[f] = theta[k++];
      lambda.segment(offset_[f], data_.factors[f].levels).setConstant(std::exp(-2.0 * rho[f]));
    }
  }

  if (gradient) *gradient = VectorXd::Zero(theta.size());
  const Order order = gradient ? Order::Full : Order::Newton;

  if (q_ == 0) {
    const VectorXd eta = data_.X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto t = obs_terms(eta[i], phi, obs[i], gradient ? Order::Full : Order::Value);
      ll += t.ll;
      if (gradient) {
        gradient->head(p) += t.g * data_.X.row(i).transpose();
        (*gradient)[p] += t.ll_tau;
      }
    }
    return ll;
  }

  if (!solve_modes(beta, phi, lambda)) {
    u_.setZero();
    return kNegInf;
  }

  std::vector<ObsTerms> terms(n);
  std::vector<std::array<int, 8>> cols(n);
  const auto nf = data_.factors.size();
  const VectorXd xb = data_.X * beta;
  MatrixXd H = lambda.asDiagonal();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = xb[i];
    for (std::size_t f = 0; f < nf; ++f) {
      cols[i][f] = active_[f] ? offset_[f] + data_.factors[f].level_of[i] : -1;
      if (cols[i][f] >= 0) eta += u_[cols[i][f]];
    }
    terms[i] = obs_terms(eta, phi, obs[i], order);
    ll += terms[i].ll;
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t e = 0; e < nf; ++e)
        if (cols[i][f] >= 0 && cols[i][e] >= 0) H(cols[i][f], cols[i][e]) += terms[i].w;
  }
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return kNegInf;
  const MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();

  double sum_rho = 0.0;
  for (std::size_t f = 0; f < nf; ++f)
    if (active_[f]) sum_rho += rho[f] * data_.factors[f].levels;
  const double value =
      ll - 0.5 * (lambda.array() * u_.array().square()).sum() - sum_rho - 0.5 * logdet;
  if (!gradient) return value;

  const MatrixXd P = llt.solve(MatrixXd::Identity(q_, q_));
  std::vector<double> s(n);
  VectorXd Ztr = VectorXd::Zero(q_);
  for (Eigen::Index i = 0; i < n; ++i) {
    double si = 0.0;
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t e = 0; e < nf; ++e)
        if (cols[i][f] >= 0 && cols[i][e] >= 0) si += P(cols[i][f], cols[i][e]);
    s[i] = si;
    const double r = 0.5 * terms[i].w_eta * si;
    for (std::size_t f = 0; f < nf; ++f)
      if (cols[i][f] >= 0) Ztr[cols[i][f]] += r;
  }
  const VectorXd v = P * Ztr;

  auto& g = *gradient;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = terms[i];
    double zv = 0.0;
    for (std::size_t f = 0; f < nf; ++f)
      if (cols[i][f] >= 0) zv += v[cols[i][f]];
    const double r = 0.5 * t.w_eta * s[i];
    g.head(p) += (t.g - r + zv * t.w) * data_.X.row(i).transpose();
    g[p] += t.ll_tau - zv * t.g_tau - 0.5 * s[i] * t.w_tau;
  }
  Eigen::Index k = p + 1;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!active_[f]) continue;
    double gf = 0.0;
    for (int l = 0; l < data_.factors[f].levels; ++l) {
      const int j = offset_[f] + l;
      gf += lambda[j] * u_[j] * u_[j] - 1.0 - 2.0 * v[j] * lambda[j] * u_[j] + P(j, j) * lambda[j];
    }
    g[k++] = gf;
  }
  return value;
}

// ---------------------------------------------------------------------------
// Fitting

const Coefficient& BetaRegressionFit::coefficient(std::string_view predictor) const {
  for (const auto& c : coefficients)
    if (c.predictor == predictor) return c;
  throw StatsError(fmt::format("no coefficient '{}'", predictor));
}

namespace {

MatrixXd fd_hessian(LaplaceBetaModel& model, const VectorXd& theta) {
  const auto d = theta.size();
  MatrixXd H(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
    VectorXd tp = theta, tm = theta, gp, gm;
    tp[k] += h;
    tm[k] -= h;
    model.value(tp, &gp);
    model.value(tm, &gm);
    H.col(k) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace

BetaRegressionFit fit_beta_regression(const MixedBetaData& data, const FitOptions& options) {
  const auto n = data.y.size();
  const auto p = data.X.cols();
  prepare(data.y);
  if (data.X.rows() != n) throw StatsError("design matrix rows differ from response length");
  if (static_cast<Eigen::Index>(data.predictors.size()) != p)
    throw StatsError("predictor names differ from design columns");
  if (n <= p) throw StatsError("fewer observations than coefficients");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(data.X);
  if (qr.rank() < p) throw StatsError("design matrix is rank deficient");
  for (const auto& f : data.factors)
    if (f.levels < 2)
      throw StatsError(fmt::format("random factor '{}' needs at least 2 levels", f.name));

  // Least-squares start on the logit scale.
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = std::log(data.y[i] / (1.0 - data.y[i]));
  VectorXd beta0 = qr.solve(z);
  const VectorXd resid = z - data.X * beta0;
  const double s2 = resid.squaredNorm() / static_cast<double>(n - p);
  double phi0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = logistic(data.X.row(i).dot(beta0));
    const double m = mu * (1.0 - mu);
    phi0 += m / (s2 * m * m);
  }
  // a constant response has s2 = 0 and no finite dispersion estimate
  phi0 = std::isfinite(phi0) ? std::clamp(phi0 / static_cast<double>(n) - 1.0, 1.0, 1e6) : 1e6;

  LaplaceBetaModel model(data);
  std::vector<bool> boundary(data.factors.size(), false);
  std::vector<double> rho0(data.factors.size(), std::log(0.1));
  for (std::size_t f = 0; f < data.factors.size(); ++f) {
    const auto& fac = data.factors[f];
    std::vector<double> sum(fac.levels, 0.0), count(fac.levels, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum[fac.level_of[i]] += resid[i];
      count[fac.level_of[i]] += 1.0;
    }
    double m = 0.0, ss = 0.0;
    for (int l = 0; l < fac.levels; ++l) m += sum[l] / count[l];
    m /= fac.levels;
    for (int l = 0; l < fac.levels; ++l) ss += std::pow(sum[l] / count[l] - m, 2);
    rho0[f] = std::log(std::clamp(std::sqrt(ss / (fac.levels - 1)), 0.05, 2.0));
    model.set_active(f, !options.pin_variances_to_zero);
  }

  auto assemble = [&] {
    VectorXd theta(model.dimension());
    theta.head(p) = beta0;
    theta[p] = std::log(phi0);
    Eigen::Index k = p + 1;
    for (std::size_t f = 0; f < data.factors.size(); ++f)
      if (model.active(f)) theta[k++] = rho0[f];
    return theta;
  };
  VectorXd theta = assemble();

  BetaRegressionFit fit;
  VectorXd grad;
  double value = model.value(theta, &grad);
  if (!std::isfinite(value)) {
    fit.message = "objective not finite at the starting point";
    return fit;
  }

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (grad.norm() < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    MatrixXd A = -fd_hessian(model, theta);
    model.value(theta, &grad);  // restore modes at theta
    Eigen::LLT<MatrixXd> llt(A);
    double damping = 1e-8 * std::max(1.0, A.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      llt.compute(A + damping * MatrixXd::Identity(A.rows(), A.cols()));
      damping *= 10.0;
    }
    const VectorXd step = llt.solve(grad);

    double t = 1.0;
    bool accepted = false;
    VectorXd trial_grad;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      const VectorXd trial = theta + t * step;
      const double tv = model.value(trial, &trial_grad);
      if (std::isfinite(tv) && tv >= value + 1e-4 * t * grad.dot(step) - 1e-12 * std::abs(value)) {
        theta = trial;
        value = tv;
        grad = trial_grad;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      model.value(theta, &grad);
      fit.message = "line search failed to improve the objective";
      break;
    }

    // Variance components collapsing to zero are pinned there.
    bool dropped = false;
    Eigen::Index k = p + 1;
    for (std::size_t f = 0; f < data.factors.size(); ++f) {
      if (!model.active(f)) continue;
      if (theta[k] < std::log(options.boundary_sigma)) {
        boundary[f] = true;
        dropped = true;
      } else {
        rho0[f] = theta[k];
      }
      ++k;
    }
    if (dropped) {
      beta0 = theta.head(p);
      phi0 = std::exp(theta[p]);
      for (std::size_t f = 0; f < data.factors.size(); ++f)
        if (boundary[f] && model.active(f)) model.set_active(f, false);
      theta = assemble();
      value = model.value(theta, &grad);
    }
  }
  fit.iterations = iter;
  fit.gradient_norm = grad.norm();
  if (!fit.converged && fit.message.empty())
    fit.message = fmt::format("no convergence after {} iterations", iter);
  if (fit.converged) fit.message = "converged";

  MatrixXd A = -fd_hessian(model, theta);
  model.value(theta);
  VectorXd se = VectorXd::Constant(theta.size(), std::numeric_limits<double>::quiet_NaN());
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const MatrixXd cov = ldlt.solve(MatrixXd::Identity(A.rows(), A.cols()));
    se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    Coefficient c;
    c.predictor = data.predictors[j];
    c.estimate = theta[j];
    c.std_error = se[j];
    c.z = c.estimate / c.std_error;
    c.p_value = std::erfc(std::abs(c.z) / std::sqrt(2.0));
    fit.coefficients.push_back(c);
  }
  fit.dispersion_phi = std::exp(theta[p]);
  fit.log_phi_std_error = se[p];
  Eigen::Index k = p + 1;
  for (std::size_t f = 0; f < data.factors.size(); ++f) {
    RandomInterceptVariance v;
    v.factor = data.factors[f].name;
    if (model.active(f)) {
      v.variance = std::exp(2.0 * theta[k++]);
    } else {
      v.variance = 0.0;
      v.at_boundary = boundary[f] || options.pin_variances_to_zero;
    }
    fit.random_intercept_variances.push_back(v);
  }
  fit.log_likelihood = value;
  return fit;
}

}  // namespace ideolens
