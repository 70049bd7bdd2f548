#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "wqdil/random.hpp"

namespace wqdil::qd {

/// Gaussian over gradient coefficients, adapted with exponential natural
/// evolution strategies. Covariance = sigma^2 * B * B^T with det(B) = 1.
class CoeffDistribution {
 public:
  /// mean = 0, covariance = initial_variance * I.
  CoeffDistribution(int dim, double initial_variance);

  /// Arbitrary mean and covariance. A covariance that is not symmetric
  /// positive definite is repaired by flooring eigenvalues at 1e-8;
  /// `repaired()` reports it.
  CoeffDistribution(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Eigen::MatrixXd& shape() const { return shape_; }
  Eigen::MatrixXd covariance() const;
  bool repaired() const { return repaired_; }

  /// xNES defaults: eta_mu = 1, eta_sigma = eta_B = (9 + 3 ln d) / (5 d sqrt d).
  double eta_mean() const { return 1.0; }
  double eta_shape() const;

  void set(Eigen::VectorXd mean, double sigma, Eigen::MatrixXd shape);

 private:
  Eigen::VectorXd mean_;
  double sigma_;
  Eigen::MatrixXd shape_;
  bool repaired_ = false;
};

struct CoeffSample {
  /// Standard-normal draw.
  Eigen::VectorXd noise;
  /// mean + sigma * B * noise.
  Eigen::VectorXd raw;
  /// raw with the objective weight replaced by its absolute value.
  Eigen::VectorXd coeffs;
};

std::vector<CoeffSample> sample_coefficients(const CoeffDistribution& dist, int count, Random& rng);

/// Rank-based utilities, zero-sum. Tied fitnesses share the mean utility of
/// the ranks they span, so an all-equal population yields all zeros.
std::vector<double> rank_utilities(std::span<const double> fitness);

/// Natural-gradient update from ranked improvements.
CoeffDistribution adapt(const CoeffDistribution& dist, std::span<const CoeffSample> samples,
                        std::span<const double> improvements);

}  // namespace wqdil::qd
