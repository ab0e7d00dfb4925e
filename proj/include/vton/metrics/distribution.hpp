#ifndef VTON_METRICS_DISTRIBUTION_HPP
#define VTON_METRICS_DISTRIBUTION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vton/common.hpp"

namespace vton::metrics {

namespace detail {

// Symmetric PSD square root by eigendecomposition, clamping the tiny
// negative eigenvalues numerical noise produces.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  Eigen::VectorXd d = es.eigenvalues();
  for (int i = 0; i < d.size(); ++i) d[i] = std::sqrt(std::max(d[i], 0.0));
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& feats, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = feats.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(feats.rows() - 1);
}

}  // namespace detail

// Fréchet distance between the Gaussian fits of two feature sets:
// ||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^{1/2}), with the cross term
// computed as Tr(sqrt(S Cb S)) for S = sqrt(Ca) so every step stays on
// symmetric matrices. Tiny negative residue clamps to zero.
inline double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ShapeError("fid: feature dimensions differ");
  if (a.rows() < 2 || b.rows() < 2) throw DataError("fid: need at least 2 samples per side");
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const Eigen::MatrixXd ca = detail::covariance(a, mu_a);
  const Eigen::MatrixXd cb = detail::covariance(b, mu_b);
  const Eigen::MatrixXd s = detail::psd_sqrt(ca);
  const Eigen::MatrixXd m = s * cb * s;
  const double tr_sqrt = detail::psd_sqrt(m).trace();
  const double value = (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

struct KidOptions {
  int subsets = 10;
  int subset_size = 1000;
  std::uint64_t seed = 0x51D5EED;
};

// Unbiased squared MMD with the cubic polynomial kernel (x.y/d + 1)^3,
// averaged over random equal-size subsets (deterministic in the seed).
inline double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, KidOptions opt = {}) {
  if (a.cols() != b.cols()) throw ShapeError("kid: feature dimensions differ");
  const int m = static_cast<int>(std::min<Eigen::Index>({opt.subset_size, a.rows(), b.rows()}));
  if (m < 2) throw DataError("kid: need at least 2 samples per side");
  const double d = static_cast<double>(a.cols());
  Rng rng(opt.seed);

  std::vector<int> ia(static_cast<std::size_t>(a.rows())), ib(static_cast<std::size_t>(b.rows()));
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), 0);

  auto take = [&](const Eigen::MatrixXd& src, std::vector<int>& idx) {
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(idx.size()) - 1 - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    Eigen::MatrixXd out(m, src.cols());
    for (int i = 0; i < m; ++i) out.row(i) = src.row(idx[static_cast<std::size_t>(i)]);
    return out;
  };

  double total = 0;
  for (int s = 0; s < opt.subsets; ++s) {
    const Eigen::MatrixXd xs = take(a, ia);
    const Eigen::MatrixXd ys = take(b, ib);
    const Eigen::MatrixXd kxx = ((xs * xs.transpose()).array() / d + 1.0).cube();
    const Eigen::MatrixXd kyy = ((ys * ys.transpose()).array() / d + 1.0).cube();
    const Eigen::MatrixXd kxy = ((xs * ys.transpose()).array() / d + 1.0).cube();
    const double sxx = (kxx.sum() - kxx.trace()) / (static_cast<double>(m) * (m - 1));
    const double syy = (kyy.sum() - kyy.trace()) / (static_cast<double>(m) * (m - 1));
    const double sxy = kxy.sum() / (static_cast<double>(m) * m);
    total += sxx + syy - 2.0 * sxy;
  }
  return total / opt.subsets;
}

// exp(mean KL(p(y|x) || p(y))) averaged over contiguous splits.
inline double inception_score(const Eigen::MatrixXd& probs, int splits = 10) {
  const int n = static_cast<int>(probs.rows());
  if (n < 1) throw DataError("inception score: no samples");
  for (int i = 0; i < n; ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-4)
      throw DataError("inception score: row " + std::to_string(i) + " does not sum to 1");
    if ((probs.row(i).array() < -1e-12).any())
      throw DataError("inception score: negative probability in row " + std::to_string(i));
  }
  const int k = std::min(splits, n);
  double total = 0;
  for (int s = 0; s < k; ++s) {
    const int lo = static_cast<int>(static_cast<long long>(n) * s / k);
    const int hi = static_cast<int>(static_cast<long long>(n) * (s + 1) / k);
    const auto part = probs.middleRows(lo, hi - lo);
    const Eigen::RowVectorXd marginal = part.colwise().mean();
    double kl = 0;
    for (int i = 0; i < part.rows(); ++i)
      for (int j = 0; j < part.cols(); ++j) {
        const double p = part(i, j);
        if (p > 1e-12) kl += p * (std::log(p) - std::log(std::max(marginal[j], 1e-12)));
      }
    total += std::exp(kl / static_cast<double>(part.rows()));
  }
  return total / k;
}

}  // namespace vton::metrics

#endif  // VTON_METRICS_DISTRIBUTION_HPP
