#ifndef VTON_GEOMETRY_TPS_HPP
#define VTON_GEOMETRY_TPS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <utility>
#include <vector>

#include "vton/nn/losses.hpp"
#include "vton/tensor.hpp"

namespace vton::geometry {

// 5x5 anchor lattice spanning [-1,1]^2 inclusive; 2x5x5 = 50 offsets.
inline constexpr int kTpsLattice = 5;
inline constexpr int kTpsAnchors = kTpsLattice * kTpsLattice;

inline double tps_anchor_coord(int i) { return -1.0 + 2.0 * i / (kTpsLattice - 1); }

namespace detail {

inline double tps_kernel(double r2) {
  // U(r) = r^2 log r = 0.5 * r^2 * log(r^2); define U(0) = 0.
  return r2 > 0 ? 0.5 * r2 * std::log(r2) : 0.0;
}

// Basis fields for one output size. The sampling grid is linear in the
// offsets: grid = identity + sum_k theta_k * basis_k, where basis_k solves
// the thin-plate system with a unit displacement at anchor k. The same
// scalar field serves both coordinates.
struct TpsBasis {
  int h = 0, w = 0;
  Tensor<double> fields;    // [25, H, W]
  Tensor<double> identity;  // [2, H, W] normalized x then y

  TpsBasis(int height, int width) : h(height), w(width) {
    constexpr int n = kTpsAnchors;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 3, n + 3);
    std::vector<double> ax(n), ay(n);
    for (int i = 0; i < n; ++i) {
      ax[static_cast<std::size_t>(i)] = tps_anchor_coord(i % kTpsLattice);
      ay[static_cast<std::size_t>(i)] = tps_anchor_coord(i / kTpsLattice);
    }
    constexpr double ridge = 1e-6;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double dx = ax[static_cast<std::size_t>(i)] - ax[static_cast<std::size_t>(j)];
        const double dy = ay[static_cast<std::size_t>(i)] - ay[static_cast<std::size_t>(j)];
        m(i, j) = tps_kernel(dx * dx + dy * dy);
      }
      m(i, i) += ridge;
      m(i, n) = m(n, i) = 1.0;
      m(i, n + 1) = m(n + 1, i) = ax[static_cast<std::size_t>(i)];
      m(i, n + 2) = m(n + 2, i) = ay[static_cast<std::size_t>(i)];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    // The lattice is fixed and well-separated, so the system is regular;
    // guard anyway because a singular solve would poison every grid.
    if (!lu.matrixLU().diagonal().array().isFinite().all() ||
        std::abs(lu.determinant()) < 1e-30)
      throw NumericError("thin-plate radial-basis system is singular");

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, n);
    for (int k = 0; k < n; ++k) rhs(k, k) = 1.0;
    Eigen::MatrixXd sol = lu.solve(rhs);  // column k: weights for basis k

    fields = Tensor<double>({n, h, w});
    identity = Tensor<double>({2, h, w});
    for (int y = 0; y < h; ++y) {
      const double ny = h > 1 ? -1.0 + 2.0 * y / (h - 1) : 0.0;
      for (int x = 0; x < w; ++x) {
        const double nx = w > 1 ? -1.0 + 2.0 * x / (w - 1) : 0.0;
        identity.at(0, y, x) = nx;
        identity.at(1, y, x) = ny;
        for (int k = 0; k < n; ++k) {
          double v = sol(n, k) + sol(n + 1, k) * nx + sol(n + 2, k) * ny;
          for (int i = 0; i < n; ++i) {
            const double dx = nx - ax[static_cast<std::size_t>(i)];
            const double dy = ny - ay[static_cast<std::size_t>(i)];
            v += sol(i, k) * tps_kernel(dx * dx + dy * dy);
          }
          fields.at(k, y, x) = v;
        }
      }
    }
  }

  static const TpsBasis& get(int h, int w) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<TpsBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{h, w}];
    if (!slot) slot = std::make_unique<TpsBasis>(h, w);
    return *slot;
  }
};

}  // namespace detail

template <typename T>
void check_theta(const Tensor<T>& theta) {
  if (theta.ndim() != 4 || theta.dim(1) != 2 || theta.dim(2) != kTpsLattice || theta.dim(3) != kTpsLattice)
    throw ShapeError("theta must be [N,2,5,5], got " + theta.shape_str());
  if (!theta.all_finite()) {
    std::ostringstream os;
    os << "non-finite TPS offsets:";
    for (std::size_t i = 0; i < std::min<std::size_t>(theta.numel(), 50); ++i) os << " " << theta[i];
    throw NumericError(os.str());
  }
}

// Sampling grid in normalized [-1,1] coordinates: for each output pixel the
// source location to read from. theta=0 gives the identity grid; affine
// anchor displacements reproduce the affine map exactly.
template <typename T>
Tensor<T> tps_grid(const Tensor<T>& theta, int h, int w) {
  check_theta(theta);
  const auto& basis = detail::TpsBasis::get(h, w);
  const int n = theta.dim(0);
  Tensor<T> grid({n, 2, h, w});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      T* gp = &grid.at(i, c, 0, 0);
      const double* idp = &basis.identity.at(c, 0, 0);
      for (int j = 0; j < h * w; ++j) gp[j] = static_cast<T>(idp[j]);
      for (int k = 0; k < kTpsAnchors; ++k) {
        const T t = theta.at(i, c, k / kTpsLattice, k % kTpsLattice);
        if (t == T(0)) continue;
        const double* bp = &basis.fields.at(k, 0, 0);
        for (int j = 0; j < h * w; ++j) gp[j] += static_cast<T>(t * bp[j]);
      }
    }
  return grid;
}

// d loss / d theta from d loss / d grid (the grid is linear in theta).
template <typename T>
Tensor<T> tps_grid_backward(const Tensor<T>& dgrid) {
  const int n = dgrid.dim(0), h = dgrid.dim(2), w = dgrid.dim(3);
  const auto& basis = detail::TpsBasis::get(h, w);
  Tensor<T> dtheta({n, 2, kTpsLattice, kTpsLattice});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      const T* dp = &dgrid.at(i, c, 0, 0);
      for (int k = 0; k < kTpsAnchors; ++k) {
        const double* bp = &basis.fields.at(k, 0, 0);
        double s = 0;
        for (int j = 0; j < h * w; ++j) s += static_cast<double>(dp[j]) * bp[j];
        dtheta.at(i, c, k / kTpsLattice, k % kTpsLattice) = static_cast<T>(s);
      }
    }
  return dtheta;
}

// Bilinear sampling with zero padding outside the source frame. Normalized
// coordinates map corner-to-corner: -1 -> pixel 0, +1 -> pixel W-1.
template <typename T>
Tensor<T> apply_tps(const Tensor<T>& img, const Tensor<T>& grid) {
  if (img.ndim() != 4 || grid.ndim() != 4 || grid.dim(1) != 2 || img.dim(0) != grid.dim(0))
    throw ShapeError("apply_tps: expected img [N,C,H,W] and grid [N,2,Ho,Wo]");
  if (!grid.all_finite()) throw NumericError("apply_tps: non-finite sampling grid");
  const int n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const int oh = grid.dim(2), ow = grid.dim(3);
  Tensor<T> out({n, c, oh, ow});
  for (int i = 0; i < n; ++i)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double sx = (static_cast<double>(grid.at(i, 0, oy, ox)) + 1.0) * 0.5 * (w - 1);
        const double sy = (static_cast<double>(grid.at(i, 1, oy, ox)) + 1.0) * 0.5 * (h - 1);
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int yy = y0 + dy, xx = x0 + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              const double wgt = (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx);
              acc += wgt * img.at(i, ch, yy, xx);
            }
          out.at(i, ch, oy, ox) = static_cast<T>(acc);
        }
      }
  return out;
}

// Gradients of apply_tps w.r.t. both the image and the grid.
template <typename T>
void apply_tps_backward(const Tensor<T>& dy, const Tensor<T>& img, const Tensor<T>& grid, Tensor<T>* dimg,
                        Tensor<T>* dgrid) {
  const int n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const int oh = grid.dim(2), ow = grid.dim(3);
  if (dimg) *dimg = Tensor<T>(img.shape());
  if (dgrid) *dgrid = Tensor<T>(grid.shape());
  for (int i = 0; i < n; ++i)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double sx = (static_cast<double>(grid.at(i, 0, oy, ox)) + 1.0) * 0.5 * (w - 1);
        const double sy = (static_cast<double>(grid.at(i, 1, oy, ox)) + 1.0) * 0.5 * (h - 1);
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        double gx = 0, gy = 0;
        for (int ch = 0; ch < c; ++ch) {
          const double g = dy.at(i, ch, oy, ox);
          if (g == 0) continue;
          for (int dyy = 0; dyy < 2; ++dyy)
            for (int dxx = 0; dxx < 2; ++dxx) {
              const int yy = y0 + dyy, xx = x0 + dxx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              const double wy = dyy ? fy : 1 - fy;
              const double wx = dxx ? fx : 1 - fx;
              if (dimg) dimg->at(i, ch, yy, xx) += static_cast<T>(g * wy * wx);
              const double v = img.at(i, ch, yy, xx);
              gx += g * wy * (dxx ? 1.0 : -1.0) * v;
              gy += g * wx * (dyy ? 1.0 : -1.0) * v;
            }
        }
        if (dgrid) {
          dgrid->at(i, 0, oy, ox) = static_cast<T>(gx * 0.5 * (w - 1));
          dgrid->at(i, 1, oy, ox) = static_cast<T>(gy * 0.5 * (h - 1));
        }
      }
}

// Sum over interior anchors, along rows and columns, both coordinates, of
// |2 a_i - a_{i-1} - a_{i+1}|^2 of the displaced lattice. The regular
// lattice's own second differences vanish, so only the offsets contribute.
template <typename T>
double second_order_constraint(const Tensor<T>& theta, Tensor<T>* dtheta = nullptr) {
  check_theta(theta);
  const int n = theta.dim(0);
  if (dtheta) *dtheta = Tensor<T>(theta.shape());
  double total = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      auto th = [&](int r, int col) { return static_cast<double>(theta.at(i, c, r, col)); };
      auto add = [&](int r, int col, double v) {
        if (dtheta) dtheta->at(i, c, r, col) += static_cast<T>(v);
      };
      for (int r = 0; r < kTpsLattice; ++r)
        for (int col = 1; col + 1 < kTpsLattice; ++col) {
          const double d = 2 * th(r, col) - th(r, col - 1) - th(r, col + 1);
          total += d * d;
          add(r, col, 4 * d);
          add(r, col - 1, -2 * d);
          add(r, col + 1, -2 * d);
        }
      for (int col = 0; col < kTpsLattice; ++col)
        for (int r = 1; r + 1 < kTpsLattice; ++r) {
          const double d = 2 * th(r, col) - th(r - 1, col) - th(r + 1, col);
          total += d * d;
          add(r, col, 4 * d);
          add(r - 1, col, -2 * d);
          add(r + 1, col, -2 * d);
        }
    }
  return total;
}

// Mean L1 between warped and ground-truth garment plus the bending penalty.
template <typename T>
struct WarpLoss {
  double total = 0;
  double l1 = 0;
  double constraint = 0;
  Tensor<T> d_warped;  // d total / d warped image
  Tensor<T> d_theta;   // d total / d theta (constraint term only)
};

template <typename T>
WarpLoss<T> warp_loss(const Tensor<T>& warped, const Tensor<T>& target, const Tensor<T>& theta,
                      double lambda_const = 0.01) {
  WarpLoss<T> out;
  auto l1 = nn::l1_loss(warped, target);
  out.l1 = l1.loss;
  out.d_warped = std::move(l1.grad);
  Tensor<T> dc;
  out.constraint = second_order_constraint(theta, &dc);
  dc *= static_cast<T>(lambda_const);
  out.d_theta = std::move(dc);
  out.total = out.l1 + lambda_const * out.constraint;
  return out;
}

}  // namespace vton::geometry

#endif  // VTON_GEOMETRY_TPS_HPP
