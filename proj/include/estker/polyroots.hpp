#ifndef ESTKER_POLYROOTS_HPP
#define ESTKER_POLYROOTS_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <complex>
#include <limits>
#include <vector>

#include "estker/errors.hpp"

namespace estker {

struct RootCluster {
  std::complex<double> root;
  int multiplicity = 1;
};

namespace detail {

inline std::complex<double> horner(const std::vector<double>& c, std::complex<double> z) {
  std::complex<double> v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * z + *it;
  return v;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t j = 1; j < c.size(); ++j) d.push_back(double(j) * c[j]);
  return d;
}

// Attainable eigenvalue accuracy for a root of multiplicity mu scales like
// eps^(1/mu); clusters must be merged at that granularity.
inline double multiplicity_radius(int mu, double scale) {
  double eps = std::numeric_limits<double>::epsilon();
  return 20.0 * std::pow(eps, 1.0 / double(mu)) * scale;
}

}  // namespace detail

/**
 * Roots with multiplicities of sum_j coeffs[j] * lambda^j.
 *
 * Companion-matrix eigenvalues with a Newton polish give the raw roots;
 * clusters merge agglomeratively, widening the radius with the candidate
 * multiplicity (a mu-fold eigenvalue is only computable to eps^(1/mu)).
 * Each multiple cluster is then re-refined by Newton on the (mu-1)-th
 * derivative, where the root is simple, restoring full accuracy.
 */
inline std::vector<RootCluster> polynomial_roots(const std::vector<double>& coeffs,
                                                 double cluster_tol = 1e-8) {
  int degree = int(coeffs.size()) - 1;
  while (degree > 0 && coeffs[degree] == 0.0) --degree;
  if (degree <= 0) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -coeffs[i] / coeffs[degree];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);

  std::vector<double> poly(coeffs.begin(), coeffs.begin() + degree + 1);
  std::vector<double> dpoly = detail::poly_derivative(poly);
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(degree), 0.0);
  for (int i = 0; i < degree; ++i) {
    std::complex<double> z = es.eigenvalues()[i];
    std::complex<double> p = detail::horner(poly, z);
    std::complex<double> dp = detail::horner(dpoly, z);
    if (std::abs(dp) > 0.0) {
      std::complex<double> znew = z - p / dp;
      if (std::abs(detail::horner(poly, znew)) <= std::abs(p)) z = znew;
    }
    roots[std::size_t(i)] = z;
  }

  std::vector<RootCluster> clusters;
  for (const auto& z : roots) clusters.push_back({z, 1});

  // agglomerate until stable
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < clusters.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
        double scale = std::max(1.0, std::abs(clusters[i].root));
        int mu = clusters[i].multiplicity + clusters[j].multiplicity;
        double radius = std::max(cluster_tol * scale, detail::multiplicity_radius(mu, scale));
        if (std::abs(clusters[i].root - clusters[j].root) <= radius) {
          double wi = clusters[i].multiplicity, wj = clusters[j].multiplicity;
          clusters[i].root = (clusters[i].root * wi + clusters[j].root * wj) / (wi + wj);
          clusters[i].multiplicity = mu;
          clusters.erase(clusters.begin() + long(j));
          merged = true;
        }
      }
  }

  // refine multiple roots on the derivative where they are simple
  for (RootCluster& c : clusters) {
    if (c.multiplicity < 2) continue;
    std::vector<double> der = poly;
    for (int k = 1; k < c.multiplicity; ++k) der = detail::poly_derivative(der);
    std::vector<double> dder = detail::poly_derivative(der);
    std::complex<double> z = c.root;
    for (int it = 0; it < 6; ++it) {
      std::complex<double> p = detail::horner(der, z);
      std::complex<double> dp = detail::horner(dder, z);
      if (std::abs(dp) == 0.0) break;
      std::complex<double> step = p / dp;
      z -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    if (std::abs(z - c.root) <= detail::multiplicity_radius(c.multiplicity, std::max(1.0, std::abs(c.root))))
      c.root = z;
  }

  for (RootCluster& c : clusters)
    if (std::abs(c.root.imag()) <= cluster_tol * std::max(1.0, std::abs(c.root)))
      c.root = {c.root.real(), 0.0};

  std::sort(clusters.begin(), clusters.end(), [](const RootCluster& a, const RootCluster& b) {
    if (a.root.real() != b.root.real()) return a.root.real() < b.root.real();
    return a.root.imag() < b.root.imag();
  });
  return clusters;
}

}  // namespace estker

#endif  // ESTKER_POLYROOTS_HPP
