#include "wqdil/xnes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace wqdil::qd {

namespace {

constexpr double kEigenFloor = 1e-8;

Eigen::MatrixXd symmetric_exp(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

CoeffDistribution::CoeffDistribution(int dim, double initial_variance)
    : mean_(Eigen::VectorXd::Zero(dim)),
      sigma_(std::sqrt(initial_variance)),
      shape_(Eigen::MatrixXd::Identity(dim, dim)) {
  if (dim <= 0 || !(initial_variance > 0.0)) {
    throw std::invalid_argument("CoeffDistribution: need dim > 0 and positive variance");
  }
}

CoeffDistribution::CoeffDistribution(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance)
    : mean_(std::move(mean)) {
  const auto d = mean_.size();
  if (covariance.rows() != d || covariance.cols() != d) {
    throw std::invalid_argument("CoeffDistribution: covariance shape mismatch");
  }
  Eigen::MatrixXd cov = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || (covariance - covariance.transpose()).norm() > 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd floored = es.eigenvalues().cwiseMax(kEigenFloor);
    cov = es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
    llt.compute(cov);
    repaired_ = true;
  }
  // A = L; sigma = det(A)^(1/d), B = A / sigma.
  const Eigen::MatrixXd a = llt.matrixL();
  const double log_det = a.diagonal().array().log().sum();
  sigma_ = std::exp(log_det / static_cast<double>(d));
  shape_ = a / sigma_;
}

Eigen::MatrixXd CoeffDistribution::covariance() const {
  return sigma_ * sigma_ * shape_ * shape_.transpose();
}

double CoeffDistribution::eta_shape() const {
  const double d = dim();
  return (9.0 + 3.0 * std::log(d)) / (5.0 * d * std::sqrt(d));
}

void CoeffDistribution::set(Eigen::VectorXd mean, double sigma, Eigen::MatrixXd shape) {
  mean_ = std::move(mean);
  sigma_ = sigma;
  shape_ = std::move(shape);
}

std::vector<CoeffSample> sample_coefficients(const CoeffDistribution& dist, int count, Random& rng) {
  std::vector<CoeffSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    CoeffSample s;
    s.noise.resize(dist.dim());
    for (int j = 0; j < dist.dim(); ++j) s.noise[j] = rng.normal();
    s.raw = dist.mean() + dist.sigma() * dist.shape() * s.noise;
    s.coeffs = s.raw;
    s.coeffs[0] = std::abs(s.coeffs[0]);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> rank_utilities(std::span<const double> fitness) {
  const std::size_t n = fitness.size();
  if (n == 0) return {};
  // Best first; equal fitness keeps index order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });

  std::vector<double> by_rank(n);
  double total = 0.0;
  const double top = std::log(n / 2.0 + 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    by_rank[k] = std::max(0.0, top - std::log(static_cast<double>(k + 1)));
    total += by_rank[k];
  }
  for (double& u : by_rank) u = u / total - 1.0 / n;

  std::vector<double> utilities(n);
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k + 1;
    while (end < n && fitness[order[end]] == fitness[order[k]]) ++end;
    // A tie spanning the whole population carries no ranking information.
    const double mean = end - k == n ? 0.0
                                     : std::accumulate(by_rank.begin() + k, by_rank.begin() + end, 0.0) /
                                           static_cast<double>(end - k);
    for (std::size_t j = k; j < end; ++j) utilities[order[j]] = mean;
    k = end;
  }
  return utilities;
}

CoeffDistribution adapt(const CoeffDistribution& dist, std::span<const CoeffSample> samples,
                        std::span<const double> improvements) {
  if (samples.size() != improvements.size() || samples.empty()) {
    throw std::invalid_argument("adapt: need one improvement per sample");
  }
  const int d = dist.dim();
  const auto utilities = rank_utilities(improvements);
  Eigen::VectorXd grad_delta = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd grad_m = Eigen::MatrixXd::Zero(d, d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i].noise;
    grad_delta += utilities[i] * s;
    grad_m += utilities[i] * (s * s.transpose() - eye);
  }
  const double grad_sigma = grad_m.trace() / d;
  const Eigen::MatrixXd grad_b = grad_m - grad_sigma * eye;

  const double eta = dist.eta_shape();
  Eigen::VectorXd mean = dist.mean() + dist.eta_mean() * dist.sigma() * dist.shape() * grad_delta;
  double sigma = dist.sigma() * std::exp(0.5 * eta * grad_sigma);
  Eigen::MatrixXd shape = dist.shape() * symmetric_exp(0.5 * eta * grad_b);
  // exp of a traceless matrix has unit determinant; fold rounding drift into
  // sigma so det(B) = 1 holds over long runs.
  const double det = shape.determinant();
  if (det > 0.0) {
    const double scale = std::pow(det, 1.0 / d);
    shape /= scale;
    sigma *= scale;
  }

  CoeffDistribution next = dist;
  next.set(std::move(mean), sigma, std::move(shape));
  return next;
}

}  // namespace wqdil::qd
