#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "vton/geometry/tps.hpp"
#include "vton/geometry/warp_net.hpp"

using vton::Rng;
using vton::Tensor;
using namespace vton::geometry;

namespace {

// Independent reference: solve the thin-plate interpolation system directly
// (naive Gauss elimination in long double) for the displaced anchor targets,
// then evaluate the interpolant pointwise. Shares no code with tps_grid
// beyond the kernel definition and the ridge constant.
class DenseTpsOracle {
 public:
  explicit DenseTpsOracle(const Tensor<float>& theta_sample /* [2,5,5] */) {
    std::array<long double, 25> ax, ay;
    for (int gy = 0; gy < 5; ++gy)
      for (int gx = 0; gx < 5; ++gx) {
        ax[gy * 5 + gx] = -1.0L + 0.5L * gx;
        ay[gy * 5 + gx] = -1.0L + 0.5L * gy;
      }
    std::array<std::array<long double, 29>, 28> m{};  // augmented, one rhs at a time
    for (int coord = 0; coord < 2; ++coord) {
      for (auto& row : m) row.fill(0.0L);
      for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 25; ++j) {
          const long double r2 = (ax[i] - ax[j]) * (ax[i] - ax[j]) + (ay[i] - ay[j]) * (ay[i] - ay[j]);
          m[i][j] = kernel(r2);
        }
        m[i][i] += 1e-6L;  // same ridge as the production solve
        m[i][25] = 1.0L;
        m[i][26] = ax[i];
        m[i][27] = ay[i];
        m[25][i] = 1.0L;
        m[26][i] = ax[i];
        m[27][i] = ay[i];
        const long double target = (coord == 0 ? ax[i] : ay[i]) + theta_sample.at(coord, i / 5, i % 5);
        m[i][28] = target;
      }
      auto sol = solve(m);
      for (int i = 0; i < 25; ++i) w_[coord][i] = sol[i];
      c0_[coord] = sol[25];
      cx_[coord] = sol[26];
      cy_[coord] = sol[27];
    }
    for (int i = 0; i < 25; ++i) {
      ax_[i] = ax[i];
      ay_[i] = ay[i];
    }
  }

  // Maps an output-space point to its source-space sample location.
  std::pair<double, double> map(double x, double y) const {
    long double out[2];
    for (int coord = 0; coord < 2; ++coord) {
      long double v = c0_[coord] + cx_[coord] * x + cy_[coord] * y;
      for (int i = 0; i < 25; ++i) {
        const long double r2 = (x - ax_[i]) * (x - ax_[i]) + (y - ay_[i]) * (y - ay_[i]);
        v += w_[coord][i] * kernel(r2);
      }
      out[coord] = v;
    }
    return {static_cast<double>(out[0]), static_cast<double>(out[1])};
  }

 private:
  static long double kernel(long double r2) { return r2 > 0.0L ? 0.5L * r2 * std::log(r2) : 0.0L; }

  static std::array<long double, 28> solve(std::array<std::array<long double, 29>, 28> m) {
    for (int col = 0; col < 28; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 28; ++r)
        if (std::fabs(static_cast<double>(m[r][col])) > std::fabs(static_cast<double>(m[pivot][col]))) pivot = r;
      std::swap(m[col], m[pivot]);
      for (int r = 0; r < 28; ++r) {
        if (r == col) continue;
        const long double f = m[r][col] / m[col][col];
        for (int k = col; k < 29; ++k) m[r][k] -= f * m[col][k];
      }
    }
    std::array<long double, 28> sol{};
    for (int i = 0; i < 28; ++i) sol[i] = m[i][28] / m[i][i];
    return sol;
  }

  std::array<std::array<long double, 25>, 2> w_{};
  long double c0_[2]{}, cx_[2]{}, cy_[2]{};
  double ax_[25]{}, ay_[25]{};
};

Tensor<float> random_theta(Rng& rng, int n, float amplitude) {
  Tensor<float> theta({n, 2, 5, 5});
  theta.fill_uniform(rng, -amplitude, amplitude);
  return theta;
}

}  // namespace

TEST(TpsGrid, IdentityAtZeroTheta) {
  Tensor<float> theta({1, 2, 5, 5});
  Tensor<float> grid = tps_grid(theta, 256, 192);
  double worst = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 192; ++x) {
      worst = std::max(worst, std::abs(grid.at(0, 0, y, x) - (-1.0 + 2.0 * x / 191)));
      worst = std::max(worst, std::abs(grid.at(0, 1, y, x) - (-1.0 + 2.0 * y / 255)));
    }
  EXPECT_LT(worst, 1e-5);
}

TEST(TpsGrid, IdentityWarpLeavesImageUnchanged) {
  Rng rng(11);
  Tensor<float> img({2, 3, 32, 24});
  img.fill_uniform(rng, 0.f, 1.f);
  Tensor<float> theta({2, 2, 5, 5});
  Tensor<float> warped = apply_tps(img, tps_grid(theta, 32, 24));
  double worst = 0;
  for (std::size_t i = 0; i < img.numel(); ++i) worst = std::max(worst, std::abs(double(warped[i]) - img[i]));
  EXPECT_LT(worst, 1e-5);
}

TEST(TpsGrid, MatchesIndependentDenseSolve) {
  Rng rng(7);
  const int h = 24, w = 18;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> theta = random_theta(rng, 1, 0.3f);
    Tensor<float> grid = tps_grid(theta, h, w);
    Tensor<float> sample({2, 5, 5});
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) sample.at(c, i, j) = theta.at(0, c, i, j);
    DenseTpsOracle oracle(sample);
    double worst = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double ox = -1.0 + 2.0 * x / (w - 1);
        const double oy = -1.0 + 2.0 * y / (h - 1);
        auto [mx, my] = oracle.map(ox, oy);
        worst = std::max(worst, std::abs(grid.at(0, 0, y, x) - mx));
        worst = std::max(worst, std::abs(grid.at(0, 1, y, x) - my));
      }
    EXPECT_LT(worst, 1e-5) << "trial " << trial;
  }
}

TEST(TpsGrid, ReproducesAffineMapsExactly) {
  // Anchor displacements drawn from an affine map are interpolated by that
  // affine map everywhere: the radial weights vanish, so even the ridge term
  // has no effect.
  const double a11 = 1.07, a12 = -0.04, a21 = 0.06, a22 = 0.93, tx = 0.11, ty = -0.08;
  Tensor<float> theta({1, 2, 5, 5});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double x = tps_anchor_coord(j), y = tps_anchor_coord(i);
      theta.at(0, 0, i, j) = static_cast<float>(a11 * x + a12 * y + tx - x);
      theta.at(0, 1, i, j) = static_cast<float>(a21 * x + a22 * y + ty - y);
    }
  const int h = 20, w = 16;
  Tensor<float> grid = tps_grid(theta, h, w);
  double worst = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ox = -1.0 + 2.0 * x / (w - 1);
      const double oy = -1.0 + 2.0 * y / (h - 1);
      worst = std::max(worst, std::abs(grid.at(0, 0, y, x) - (a11 * ox + a12 * oy + tx)));
      worst = std::max(worst, std::abs(grid.at(0, 1, y, x) - (a21 * ox + a22 * oy + ty)));
    }
  EXPECT_LT(worst, 2e-6);
}

TEST(TpsGrid, BackwardMatchesLinearStructure) {
  // grid is linear in theta, so the analytic gradient of <R, grid(theta)>
  // must equal the finite difference exactly (up to float noise).
  Rng rng(3);
  const int h = 10, w = 8;
  Tensor<float> theta = random_theta(rng, 1, 0.2f);
  Tensor<float> r({1, 2, h, w});
  r.fill_uniform(rng, -1.f, 1.f);
  Tensor<float> dtheta = tps_grid_backward(r);
  ASSERT_EQ(dtheta.dim(1), 2);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 25; k += 4) {
      Tensor<float> tp = theta, tm = theta;
      const float step = 1e-2f;  // exact linearity: any step works
      tp.at(0, c, k / 5, k % 5) += step;
      tm.at(0, c, k / 5, k % 5) -= step;
      double fp = 0, fm = 0;
      Tensor<float> gp = tps_grid(tp, h, w), gm = tps_grid(tm, h, w);
      for (std::size_t i = 0; i < gp.numel(); ++i) {
        fp += double(r[i]) * gp[i];
        fm += double(r[i]) * gm[i];
      }
      const double fd = (fp - fm) / (2.0 * step);
      EXPECT_NEAR(dtheta.at(0, c, k / 5, k % 5), fd, 1e-3 * std::max(1.0, std::abs(fd)));
    }
}

TEST(ApplyTps, ConstantShiftMovesImageByWholePixels) {
  const int h = 9, w = 11;
  Rng rng(5);
  Tensor<float> img({1, 1, h, w});
  img.fill_uniform(rng, 0.f, 1.f);
  // +2/(w-1) in x samples exactly one pixel to the right.
  Tensor<float> grid = tps_grid(Tensor<float>({1, 2, 5, 5}), h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) grid.at(0, 0, y, x) += 2.0f / (w - 1);
  Tensor<float> warped = apply_tps(img, grid);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) EXPECT_NEAR(warped.at(0, 0, y, x), img.at(0, 0, y, x + 1), 1e-4);
    EXPECT_NEAR(warped.at(0, 0, y, w - 1), 0.f, 1e-4);  // zero padding beyond the edge
  }
}

TEST(ApplyTps, ConstantImageInvariantUnderInRangeWarp) {
  Rng rng(17);
  Tensor<float> img({1, 2, 16, 12});
  img.fill(0.73f);
  Tensor<float> theta = random_theta(rng, 1, 0.05f);
  Tensor<float> warped = apply_tps(img, tps_grid(theta, 16, 12));
  // A small warp keeps every interior sample in bounds; check away from the border.
  for (int y = 2; y < 14; ++y)
    for (int x = 2; x < 10; ++x) {
      EXPECT_NEAR(warped.at(0, 0, y, x), 0.73f, 1e-5);
      EXPECT_NEAR(warped.at(0, 1, y, x), 0.73f, 1e-5);
    }
}

TEST(ApplyTps, BackwardFiniteDifference) {
  Rng rng(23);
  Tensor<double> img({1, 2, 8, 6});
  img.fill_uniform(rng, 0.1, 0.9);
  Tensor<double> theta({1, 2, 5, 5});
  theta.fill_uniform(rng, -0.08, 0.08);
  Tensor<double> grid = tps_grid(theta, 8, 6);
  Tensor<double> r({1, 2, 8, 6});
  r.fill_uniform(rng, -1.0, 1.0);

  Tensor<double> warped = apply_tps(img, grid);
  Tensor<double> dimg, dgrid;
  apply_tps_backward(r, img, grid, &dimg, &dgrid);

  auto value = [&](const Tensor<double>& im, const Tensor<double>& g) {
    Tensor<double> out = apply_tps(im, g);
    double s = 0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += r[i] * out[i];
    return s;
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < img.numel(); i += 7) {
    Tensor<double> ip = img, im2 = img;
    ip[i] += h;
    im2[i] -= h;
    const double fd = (value(ip, grid) - value(im2, grid)) / (2 * h);
    EXPECT_NEAR(dimg[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
  for (std::size_t i = 0; i < grid.numel(); i += 5) {
    Tensor<double> gp = grid, gm = grid;
    gp[i] += h;
    gm[i] -= h;
    const double fd = (value(img, gp) - value(img, gm)) / (2 * h);
    EXPECT_NEAR(dgrid[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SecondOrderConstraint, HandComputedAnchors) {
  // One corner anchor displaced by d: it heads one row pair and one column
  // pair -> 2 d^2. The center anchor sits inside 2 row and 2 column triples
  // and is doubled in each -> (4+4+4) d^2 ... enumerated by hand: 12 d^2.
  const double d = 0.3;
  Tensor<float> corner({1, 2, 5, 5});
  corner.at(0, 0, 0, 0) = static_cast<float>(d);
  EXPECT_NEAR(second_order_constraint(corner), 2 * d * d, 1e-6);

  Tensor<float> center({1, 2, 5, 5});
  center.at(0, 1, 2, 2) = static_cast<float>(d);
  EXPECT_NEAR(second_order_constraint(center), 12 * d * d, 1e-6);
}

TEST(SecondOrderConstraint, TranslationInvariant) {
  Rng rng(29);
  Tensor<float> theta = random_theta(rng, 2, 0.2f);
  Tensor<float> shifted = theta;
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        shifted.at(n, 0, i, j) += 0.4f;
        shifted.at(n, 1, i, j) -= 0.7f;
      }
  EXPECT_NEAR(second_order_constraint(theta), second_order_constraint(shifted), 1e-4);
}

TEST(SecondOrderConstraint, MatchesDirectSummation) {
  Rng rng(31);
  Tensor<float> theta = random_theta(rng, 3, 0.25f);
  double expect = 0;
  for (int n = 0; n < 3; ++n)
    for (int c = 0; c < 2; ++c) {
      for (int i = 0; i < 5; ++i)
        for (int j = 1; j < 4; ++j) {
          const double d = 2.0 * theta.at(n, c, i, j) - theta.at(n, c, i, j - 1) - theta.at(n, c, i, j + 1);
          expect += d * d;
        }
      for (int j = 0; j < 5; ++j)
        for (int i = 1; i < 4; ++i) {
          const double d = 2.0 * theta.at(n, c, i, j) - theta.at(n, c, i - 1, j) - theta.at(n, c, i + 1, j);
          expect += d * d;
        }
    }
  EXPECT_NEAR(second_order_constraint(theta), expect, 1e-5 * std::max(1.0, expect));
}

TEST(SecondOrderConstraint, GradientFiniteDifference) {
  Rng rng(37);
  Tensor<double> theta({1, 2, 5, 5});
  theta.fill_uniform(rng, -0.2, 0.2);
  Tensor<double> grad;
  second_order_constraint(theta, &grad);
  const double h = 1e-6;
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    Tensor<double> tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (second_order_constraint(tp) - second_order_constraint(tm)) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(WarpLoss, ComposesL1AndConstraint) {
  Rng rng(41);
  Tensor<float> warped({2, 3, 8, 6}), target({2, 3, 8, 6});
  warped.fill_uniform(rng, 0.f, 1.f);
  target.fill_uniform(rng, 0.f, 1.f);
  Tensor<float> theta = random_theta(rng, 2, 0.2f);
  auto parts = warp_loss(warped, target, theta);
  EXPECT_NEAR(parts.total, parts.l1 + 0.01 * parts.constraint, 1e-7);
  EXPECT_NEAR(parts.l1, vton::mean_l1(warped, target), 1e-7);
  EXPECT_NEAR(parts.constraint, second_order_constraint(theta), 1e-6);
}

TEST(WarpLoss, ThetaGradientFiniteDifference) {
  // End-to-end through sampling: L(theta) = warp_loss(apply_tps(img, grid(theta)), target, theta).
  Rng rng(43);
  const int h = 16, w = 12;
  Tensor<double> img({1, 3, h, w}), target({1, 3, h, w});
  img.fill_uniform(rng, 0.05, 0.95);
  target.fill_uniform(rng, 0.05, 0.95);
  Tensor<double> theta({1, 2, 5, 5});
  theta.fill_uniform(rng, -0.1, 0.1);

  auto loss_at = [&](const Tensor<double>& t) {
    Tensor<double> warped = apply_tps(img, tps_grid(t, h, w));
    return warp_loss(warped, target, t).total;
  };

  Tensor<double> grid = tps_grid(theta, h, w);
  Tensor<double> warped = apply_tps(img, grid);
  auto parts = warp_loss(warped, target, theta);
  Tensor<double> dgrid;
  apply_tps_backward(parts.d_warped, img, grid, static_cast<Tensor<double>*>(nullptr), &dgrid);
  Tensor<double> dtheta = tps_grid_backward(dgrid);
  dtheta += parts.d_theta;

  const double step = 1e-5;
  double worst_rel = 0;
  for (std::size_t i = 0; i < theta.numel(); ++i) {
    Tensor<double> tp = theta, tm = theta;
    tp[i] += step;
    tm[i] -= step;
    const double fd = (loss_at(tp) - loss_at(tm)) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(double(dtheta[i])), 1e-6});
    worst_rel = std::max(worst_rel, std::abs(fd - dtheta[i]) / denom);
  }
  EXPECT_LT(worst_rel, 1e-3);
}

TEST(Correlation, MatchesHandDotProducts) {
  // 1 sample, 2 channels, 1x2 spatial: correlations are plain dot products
  // of the two per-location feature vectors.
  Tensor<float> a({1, 2, 1, 2}), b({1, 2, 1, 2});
  a.at(0, 0, 0, 0) = 1;
  a.at(0, 1, 0, 0) = 2;
  a.at(0, 0, 0, 1) = 3;
  a.at(0, 1, 0, 1) = 4;
  b.at(0, 0, 0, 0) = 5;
  b.at(0, 1, 0, 0) = 6;
  b.at(0, 0, 0, 1) = 7;
  b.at(0, 1, 0, 1) = 8;
  Correlation<float> corr;
  Tensor<float> out = corr.forward(a, b, false);
  ASSERT_EQ(out.dim(1), 2);
  EXPECT_NEAR(out.at(0, 0, 0, 0), 1 * 5 + 2 * 6, 1e-5);  // a(:,0) . b(:,0)
  EXPECT_NEAR(out.at(0, 0, 0, 1), 1 * 7 + 2 * 8, 1e-5);  // a(:,0) . b(:,1)
  EXPECT_NEAR(out.at(0, 1, 0, 0), 3 * 5 + 4 * 6, 1e-5);
  EXPECT_NEAR(out.at(0, 1, 0, 1), 3 * 7 + 4 * 8, 1e-5);
}

TEST(Correlation, NormalizedValuesAreCosines) {
  Tensor<float> a({1, 2, 1, 1}), b({1, 2, 1, 1});
  a.at(0, 0, 0, 0) = 3;
  a.at(0, 1, 0, 0) = 0;
  b.at(0, 0, 0, 0) = 5;
  b.at(0, 1, 0, 0) = 5;
  Correlation<float> corr;
  Tensor<float> out = corr.forward(a, b, true);
  EXPECT_NEAR(out.at(0, 0, 0, 0), std::sqrt(0.5), 1e-5);
}

TEST(Correlation, BackwardFiniteDifference) {
  Rng rng(47);
  Tensor<double> a({2, 3, 2, 2}), b({2, 3, 2, 2});
  a.fill_uniform(rng, -1.0, 1.0);
  b.fill_uniform(rng, -1.0, 1.0);
  Tensor<double> r({2, 4, 2, 2});
  r.fill_uniform(rng, -1.0, 1.0);

  for (bool normalize : {false, true}) {
    Correlation<double> corr;
    corr.forward(a, b, normalize);
    Tensor<double> da, db;
    corr.backward(r, &da, &db);

    auto value = [&](const Tensor<double>& aa, const Tensor<double>& bb) {
      Correlation<double> c2;
      Tensor<double> out = c2.forward(aa, bb, normalize);
      double s = 0;
      for (std::size_t i = 0; i < out.numel(); ++i) s += r[i] * out[i];
      return s;
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.numel(); i += 3) {
      Tensor<double> ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      const double fd = (value(ap, b) - value(am, b)) / (2 * h);
      EXPECT_NEAR(da[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "normalize=" << normalize;
      Tensor<double> bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      const double fd2 = (value(a, bp) - value(a, bm)) / (2 * h);
      EXPECT_NEAR(db[i], fd2, 1e-4 * std::max(1.0, std::abs(fd2))) << "normalize=" << normalize;
    }
  }
}

TEST(WarpNet, ZeroInitializedHeadPredictsIdentity) {
  WarpNetConfig cfg;
  cfg.base_channels = 4;
  cfg.regressor_base = 4;
  cfg.downs = 2;
  cfg.input_h = 64;
  cfg.input_w = 48;
  WarpNet<float> net(cfg);
  Rng rng(53);
  net.init(rng);
  net.set_train(false);
  Tensor<float> garment({2, 3, 64, 48}), person({2, 3 + 18, 64, 48});
  garment.fill_uniform(rng, 0.f, 1.f);
  person.fill_uniform(rng, 0.f, 1.f);
  Tensor<float> theta = net.forward(garment, person);
  ASSERT_EQ(theta.dim(0), 2);
  ASSERT_EQ(theta.dim(1), 2);
  ASSERT_EQ(theta.dim(2), 5);
  ASSERT_EQ(theta.dim(3), 5);
  EXPECT_EQ(theta.max_abs(), 0.0);
}

TEST(WarpNet, DeterministicForwardAndGradientFlow) {
  WarpNetConfig cfg;
  cfg.base_channels = 4;
  cfg.regressor_base = 4;
  cfg.downs = 2;
  cfg.input_h = 64;
  cfg.input_w = 48;
  WarpNet<float> net(cfg);
  Rng rng(59);
  net.init(rng);
  net.set_train(true);
  Tensor<float> garment({1, 3, 64, 48}), person({1, 21, 64, 48});
  garment.fill_uniform(rng, 0.f, 1.f);
  person.fill_uniform(rng, 0.f, 1.f);

  // The zero head blocks trunk gradients until it moves off zero (as it does
  // after the first optimizer step); emulate that before probing flow.
  auto params = net.parameters();
  for (auto& p : params)
    if (p.name == "head.weight") p.param->value.fill_uniform(rng, -0.01f, 0.01f);

  Tensor<float> t1 = net.forward(garment, person);
  Tensor<float> dtheta({1, 2, 5, 5});
  dtheta.fill_uniform(rng, -1.f, 1.f);
  net.zero_grad();
  net.backward(dtheta);
  double head_grad = 0, garment_grad = 0, person_grad = 0;
  for (auto& p : params) {
    if (p.name.rfind("head.", 0) == 0) head_grad += p.param->grad.max_abs();
    if (p.name.rfind("garment.", 0) == 0) garment_grad += p.param->grad.max_abs();
    if (p.name.rfind("person.", 0) == 0) person_grad += p.param->grad.max_abs();
  }
  EXPECT_GT(head_grad, 0.0);
  EXPECT_GT(garment_grad, 0.0);
  EXPECT_GT(person_grad, 0.0);

  net.set_train(false);
  Tensor<float> t2 = net.forward(garment, person);
  Tensor<float> t3 = net.forward(garment, person);
  for (std::size_t i = 0; i < t2.numel(); ++i) EXPECT_EQ(t2[i], t3[i]);
  (void)t1;
}

TEST(WarpNet, RejectsMisconfiguredSizes) {
  WarpNetConfig cfg;
  cfg.base_channels = 4;
  cfg.downs = 4;
  cfg.input_h = 100;  // not divisible by the downsampling chain
  cfg.input_w = 48;
  EXPECT_THROW(WarpNet<float> net(cfg), vton::ConfigError);
}
