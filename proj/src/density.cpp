#include "sfpe/density.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfpe/parallel.hpp"
#include "sfpe/stats.hpp"

namespace sfpe {

namespace {

constexpr double kBoundaryTol = 0.01;

void require_uniform_axes(const std::vector<GridAxis>& axes) {
  if (axes.empty() || axes.size() > 2)
    throw std::domain_error("grids must have one or two axes");
  for (const auto& ax : axes)
    if (ax.n < 2 || !(ax.step > 0)) throw std::domain_error("non-uniform or empty axis");
}

// phase rotors recomputed every kSpan points; fixed span keeps results
// byte-identical across thread counts
constexpr int kSpan = 256;

void ecf_axis_table(const Eigen::VectorXd& coords, const GridAxis& ax,
                    Eigen::MatrixXcd& table, int col_begin, int col_end) {
  const auto n = coords.size();
  for (int g0 = col_begin; g0 < col_end; g0 += kSpan) {
    const int len = std::min(kSpan, col_end - g0);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double x = coords(k);
      std::complex<double> rot(std::cos(ax.at(g0) * x), std::sin(ax.at(g0) * x));
      const std::complex<double> delta(std::cos(ax.step * x), std::sin(ax.step * x));
      for (int g = 0; g < len; ++g) {
        table(g0 + g, k) = rot;
        rot *= delta;
      }
    }
  }
}

// grid index of -t for symmetric axes, or -1 when off-grid
int mirror_index(const GridAxis& ax, int i) {
  const int cand = 2 * (ax.n / 2) - i;
  if (cand >= 0 && cand < ax.n && ax.at(cand) == -ax.at(i)) return cand;
  return -1;
}

// averages phi(t) with conj(phi(-t)) so conjugate symmetry holds exactly
void symmetrize(CharFunGrid& cf) {
  if (cf.dim() == 1) {
    const GridAxis& ax = cf.axes[0];
    for (int i = 0; i < ax.n; ++i) {
      const int j = mirror_index(ax, i);
      if (j <= i) continue;
      const std::complex<double> v = 0.5 * (cf.values(i) + std::conj(cf.values(j)));
      cf.values(i) = v;
      cf.values(j) = std::conj(v);
    }
    return;
  }
  const GridAxis& ax0 = cf.axes[0];
  const GridAxis& ax1 = cf.axes[1];
  for (int i0 = 0; i0 < ax0.n; ++i0) {
    const int j0 = mirror_index(ax0, i0);
    if (j0 < 0) continue;
    for (int i1 = 0; i1 < ax1.n; ++i1) {
      const int j1 = mirror_index(ax1, i1);
      if (j1 < 0) continue;
      const Eigen::Index a = static_cast<Eigen::Index>(i0) * ax1.n + i1;
      const Eigen::Index b = static_cast<Eigen::Index>(j0) * ax1.n + j1;
      if (b <= a) continue;
      const std::complex<double> v = 0.5 * (cf.values(a) + std::conj(cf.values(b)));
      cf.values(a) = v;
      cf.values(b) = std::conj(v);
    }
  }
}

}  // namespace

double DensityGrid::cell_volume() const {
  double v = 1;
  for (const auto& ax : axes) v *= ax.step;
  return v;
}

double DensityGrid::total_mass() const { return values.sum() * cell_volume(); }

CharFunGrid ecf(const SamplePool& pool, const std::vector<GridAxis>& axes, int threads) {
  require_uniform_axes(axes);
  if (pool.size() == 0) throw std::domain_error("ecf: empty pool");
  if (pool.dim() != static_cast<int>(axes.size()))
    throw std::domain_error("ecf: axis count must match pool dimension");

  CharFunGrid cf;
  cf.axes = axes;
  cf.n_samples = pool.size();
  const auto n = pool.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  if (axes.size() == 1) {
    const GridAxis& ax = axes[0];
    cf.values.setZero(ax.n);
    const Eigen::VectorXd coords = pool.values.row(0);
    // chunk over grid points; each point accumulates samples in order
    const int n_chunks = (ax.n + kSpan - 1) / kSpan;
    parallel_for(n_chunks, threads, [&](std::int64_t cb, std::int64_t ce) {
      for (std::int64_t c = cb; c < ce; ++c) {
        const int g0 = static_cast<int>(c) * kSpan;
        const int len = std::min(kSpan, ax.n - g0);
        std::vector<std::complex<double>> acc(static_cast<std::size_t>(len), {0, 0});
        for (Eigen::Index k = 0; k < n; ++k) {
          const double x = coords(k);
          std::complex<double> rot(std::cos(ax.at(g0) * x), std::sin(ax.at(g0) * x));
          const std::complex<double> delta(std::cos(ax.step * x), std::sin(ax.step * x));
          for (int g = 0; g < len; ++g) {
            acc[static_cast<std::size_t>(g)] += rot;
            rot *= delta;
          }
        }
        for (int g = 0; g < len; ++g) cf.values(g0 + g) = acc[static_cast<std::size_t>(g)] * inv_n;
      }
    });
  } else {
    const GridAxis& ax0 = axes[0];
    const GridAxis& ax1 = axes[1];
    cf.values.setZero(static_cast<Eigen::Index>(ax0.n) * ax1.n);
    Eigen::Map<Eigen::MatrixXcd> grid(cf.values.data(), ax1.n, ax0.n);  // column = fixed t0
    // phi = U^T V / N accumulated over fixed-size sample blocks
    constexpr Eigen::Index kBlock = 8192;
    Eigen::MatrixXcd u(ax0.n, kBlock), v(ax1.n, kBlock);
    for (Eigen::Index b = 0; b < n; b += kBlock) {
      const Eigen::Index len = std::min(kBlock, n - b);
      const Eigen::VectorXd c0 = pool.values.row(0).segment(b, len);
      const Eigen::VectorXd c1 = pool.values.row(1).segment(b, len);
      ecf_axis_table(c0, ax0, u, 0, ax0.n);
      ecf_axis_table(c1, ax1, v, 0, ax1.n);
      grid.noalias() += v.leftCols(len) * u.leftCols(len).transpose();
    }
    cf.values *= inv_n;
  }
  // exact unity at t = 0 when the grid contains it
  for (int i0 = 0; i0 < axes[0].n; ++i0) {
    if (axes[0].at(i0) != 0.0) continue;
    if (axes.size() == 1) {
      cf.values(i0) = 1.0;
    } else {
      for (int i1 = 0; i1 < axes[1].n; ++i1)
        if (axes[1].at(i1) == 0.0) cf.values(i0 * axes[1].n + i1) = 1.0;
    }
  }
  symmetrize(cf);
  return cf;
}

namespace {

GridAxis symmetric_axis(double extent, int points) {
  GridAxis ax;
  ax.n = points;
  ax.step = 2 * extent / points;
  ax.min = -ax.step * (points / 2);
  return ax;
}

double abs_cf_at(const SamplePool& pool, const Eigen::VectorXd& t) {
  std::complex<double> acc(0, 0);
  for (Eigen::Index i = 0; i < pool.size(); ++i) {
    const double phase = t.dot(pool.values.col(i));
    acc += std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return std::abs(acc) / static_cast<double>(pool.size());
}

double boundary_abs(const SamplePool& pool, double extent) {
  // probe the border: endpoints for d=1, edge grids for d=2
  const int d = pool.dim();
  double worst = 0;
  if (d == 1) {
    for (double s : {-extent, extent})
      worst = std::max(worst, abs_cf_at(pool, Eigen::VectorXd::Constant(1, s)));
    return worst;
  }
  constexpr int kEdgeProbes = 17;
  for (int axis = 0; axis < 2; ++axis)
    for (double side : {-extent, extent})
      for (int k = 0; k < kEdgeProbes; ++k) {
        Eigen::VectorXd t(2);
        t(axis) = side;
        t(1 - axis) = -extent + 2 * extent * k / (kEdgeProbes - 1);
        worst = std::max(worst, abs_cf_at(pool, t));
      }
  return worst;
}

// a border of B points of pure estimator noise has max |phi_hat| around
// sqrt(2 ln B / n); boundary values below this carry no aliasing evidence
double noise_ceiling(std::int64_t n_samples, std::int64_t border_points) {
  if (n_samples <= 0) return 0;
  return std::sqrt(2.0 * std::log(4.0 * static_cast<double>(std::max<std::int64_t>(
                                      border_points, 2))) /
                   static_cast<double>(n_samples));
}

}  // namespace

std::vector<GridAxis> auto_frequency_axes(const SamplePool& pool, int points, double boundary_tol,
                                          double initial_extent, double max_extent) {
  if (pool.dim() > 2) throw std::domain_error("auto_frequency_axes: d <= 2 only");
  if (points == 0) points = pool.dim() == 1 ? 4096 : 256;
  const std::int64_t probes = pool.dim() == 1 ? 2 : 68;
  const double tol = std::max(boundary_tol, noise_ceiling(pool.size(), probes));
  double extent = initial_extent;
  while (extent < max_extent && boundary_abs(pool, extent) >= tol) extent *= 2;
  std::vector<GridAxis> axes;
  for (int k = 0; k < pool.dim(); ++k) axes.push_back(symmetric_axis(extent, points));
  return axes;
}

namespace {

// one inversion pass along a single axis: rows of `data` are transformed
void invert_axis(Eigen::MatrixXcd& data, const GridAxis& ax, Taper taper, GridAxis& out_axis) {
  const int n = ax.n;
  const double t_max = std::max(std::abs(ax.min), std::abs(ax.max()));
  const double dx = 2 * std::numbers::pi / (n * ax.step);
  out_axis.n = n;
  out_axis.step = dx;
  out_axis.min = -dx * (n / 2);

  Eigen::VectorXcd pre(n), post(n);
  for (int g = 0; g < n; ++g) {
    double w = 1.0;
    if (taper == Taper::kHann)
      w = 0.5 * (1.0 + std::cos(std::numbers::pi * ax.at(g) / t_max));
    const double phase = -out_axis.min * g * ax.step;
    pre(g) = w * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  for (int k = 0; k < n; ++k) {
    const double phase = -out_axis.at(k) * ax.min;
    post(k) = (ax.step / (2 * std::numbers::pi)) *
              std::complex<double>(std::cos(phase), std::sin(phase));
  }

  Eigen::FFT<double> fft;
  Eigen::VectorXcd in(n), out(n);
  for (Eigen::Index row = 0; row < data.rows(); ++row) {
    in = data.row(row).transpose().cwiseProduct(pre);
    fft.fwd(out, in);
    data.row(row) = out.cwiseProduct(post).transpose();
  }
}

}  // namespace

DensityGrid invert(const CharFunGrid& cf, Taper taper) {
  require_uniform_axes(cf.axes);
  const int d = cf.dim();

  // boundary energy check: aliasing guard
  double boundary = 0;
  std::int64_t border_points = 2;
  if (d == 1) {
    boundary = std::max(std::abs(cf.values(0)), std::abs(cf.values(cf.axes[0].n - 1)));
  } else {
    const int n0 = cf.axes[0].n, n1 = cf.axes[1].n;
    border_points = 2 * static_cast<std::int64_t>(n0) + 2 * n1 - 4;
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1)
        if (i0 == 0 || i0 == n0 - 1 || i1 == 0 || i1 == n1 - 1)
          boundary = std::max(boundary, std::abs(cf.at(i0, i1)));
  }
  const double threshold = std::max(kBoundaryTol, noise_ceiling(cf.n_samples, border_points));
  if (boundary >= threshold)
    throw std::runtime_error(
        "invert: |phi| at the grid boundary is " + std::to_string(boundary) +
        " >= " + std::to_string(threshold) +
        "; frequency grid too small, density would alias");

  DensityGrid out;
  out.method = DensityMethod::kFourierInversion;
  out.taper = taper;
  out.axes.resize(cf.axes.size());

  if (d == 1) {
    Eigen::MatrixXcd data = cf.values.transpose();  // 1 x n
    invert_axis(data, cf.axes[0], taper, out.axes[0]);
    Eigen::VectorXcd row = data.row(0);
    out.values = row.real();
    const double max_re = out.values.cwiseAbs().maxCoeff();
    out.max_imag_ratio = max_re > 0 ? row.imag().cwiseAbs().maxCoeff() / max_re : 0;
  } else {
    const int n0 = cf.axes[0].n, n1 = cf.axes[1].n;
    // layout: row-major (i0 major); transform axis 1 with rows = i0,
    // then axis 0 with rows = i1
    Eigen::MatrixXcd data(n0, n1);
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) data(i0, i1) = cf.at(i0, i1);
    invert_axis(data, cf.axes[1], taper, out.axes[1]);
    Eigen::MatrixXcd t = data.transpose();
    invert_axis(t, cf.axes[0], taper, out.axes[0]);
    out.values.resize(static_cast<Eigen::Index>(n0) * n1);
    double max_re = 0, max_im = 0;
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) {
        const std::complex<double> v = t(i1, i0);
        out.values(static_cast<Eigen::Index>(i0) * n1 + i1) = v.real();
        max_re = std::max(max_re, std::abs(v.real()));
        max_im = std::max(max_im, std::abs(v.imag()));
      }
    out.max_imag_ratio = max_re > 0 ? max_im / max_re : 0;
  }
  return out;
}

DensityGrid kde(const SamplePool& pool, double bandwidth, const std::vector<GridAxis>& axes,
                int threads) {
  require_uniform_axes(axes);
  if (pool.dim() > 2) throw std::domain_error("kde: d <= 2 only");
  if (pool.dim() != static_cast<int>(axes.size()))
    throw std::domain_error("kde: axis count must match pool dimension");
  const int d = pool.dim();
  const auto n = pool.size();

  Eigen::VectorXd bw(d);
  for (int k = 0; k < d; ++k) {
    if (bandwidth > 0) {
      bw(k) = bandwidth;
    } else {
      std::vector<double> coords(pool.values.row(k).data(),
                                 pool.values.row(k).data() + n);
      std::sort(coords.begin(), coords.end());
      const double sd = sd_sample(coords);
      const double iqr = quantile_sorted(coords, 0.75) - quantile_sorted(coords, 0.25);
      double scale = std::min(sd, iqr / 1.34);
      if (scale <= 0) scale = std::max({sd, iqr / 1.34, 1e-3});
      bw(k) = 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
    }
  }

  DensityGrid out;
  out.method = DensityMethod::kKde;
  out.axes = axes;
  out.bandwidth = bw;
  const double norm =
      1.0 / (static_cast<double>(n) * std::pow(2 * std::numbers::pi, d / 2.0) * bw.prod());

  if (d == 1) {
    const GridAxis& ax = axes[0];
    out.values.setZero(ax.n);
    const Eigen::VectorXd coords = pool.values.row(0);
    parallel_for(ax.n, threads, [&](std::int64_t gb, std::int64_t ge) {
      for (std::int64_t g = gb; g < ge; ++g) {
        const double x = ax.at(static_cast<int>(g));
        double acc = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double z = (x - coords(k)) / bw(0);
          acc += std::exp(-0.5 * z * z);
        }
        out.values(g) = acc * norm;
      }
    });
  } else {
    const GridAxis& ax0 = axes[0];
    const GridAxis& ax1 = axes[1];
    out.values.setZero(static_cast<Eigen::Index>(ax0.n) * ax1.n);
    parallel_for(ax0.n, threads, [&](std::int64_t gb, std::int64_t ge) {
      for (std::int64_t g0 = gb; g0 < ge; ++g0) {
        const double x0 = ax0.at(static_cast<int>(g0));
        for (int g1 = 0; g1 < ax1.n; ++g1) {
          const double x1 = ax1.at(g1);
          double acc = 0;
          for (Eigen::Index k = 0; k < n; ++k) {
            const double z0 = (x0 - pool.values(0, k)) / bw(0);
            const double z1 = (x1 - pool.values(1, k)) / bw(1);
            acc += std::exp(-0.5 * (z0 * z0 + z1 * z1));
          }
          out.values(g0 * ax1.n + g1) = acc * norm;
        }
      }
    });
  }
  return out;
}

namespace {

// (t, |phi|) profile with t > 0: the grid itself for d=1, a 32-direction
// radial average for d=2
void radial_profile(const CharFunGrid& cf, std::vector<double>& t, std::vector<double>& a) {
  if (cf.dim() == 1) {
    const GridAxis& ax = cf.axes[0];
    for (int g = 0; g < ax.n; ++g) {
      if (ax.at(g) <= 0) continue;
      t.push_back(ax.at(g));
      a.push_back(std::abs(cf.values(g)));
    }
    return;
  }
  const GridAxis& ax0 = cf.axes[0];
  const GridAxis& ax1 = cf.axes[1];
  const double r_max = std::min(std::abs(ax0.min), std::abs(ax1.min));
  const int n_r = std::max(ax0.n, ax1.n) / 2;
  const double dr = r_max / n_r;
  constexpr int kDirs = 32;
  for (int ri = 1; ri <= n_r; ++ri) {
    const double r = ri * dr;
    double acc = 0;
    for (int k = 0; k < kDirs; ++k) {
      const double ang = std::numbers::pi * k / kDirs;  // conjugate symmetry: half circle
      const double t0 = r * std::cos(ang), t1 = r * std::sin(ang);
      // bilinear interpolation of |phi|
      const double f0 = (t0 - ax0.min) / ax0.step;
      const double f1 = (t1 - ax1.min) / ax1.step;
      const int i0 = std::clamp(static_cast<int>(f0), 0, ax0.n - 2);
      const int i1 = std::clamp(static_cast<int>(f1), 0, ax1.n - 2);
      const double u = std::clamp(f0 - i0, 0.0, 1.0), v = std::clamp(f1 - i1, 0.0, 1.0);
      const double a00 = std::abs(cf.at(i0, i1)), a01 = std::abs(cf.at(i0, i1 + 1));
      const double a10 = std::abs(cf.at(i0 + 1, i1)), a11 = std::abs(cf.at(i0 + 1, i1 + 1));
      acc += (1 - u) * ((1 - v) * a00 + v * a01) + u * ((1 - v) * a10 + v * a11);
    }
    t.push_back(r);
    a.push_back(acc / kDirs);
  }
}

}  // namespace

DecayFit decay_fit(const CharFunGrid& cf, double t_lo) {
  require_uniform_axes(cf.axes);
  DecayFit fit;
  std::vector<double> t, a;
  radial_profile(cf, t, a);
  const double floor = 3.0 / std::sqrt(static_cast<double>(cf.n_samples));

  if (t_lo <= 0) {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (a[i] < 0.5) {
        t_lo = t[i];
        break;
      }
    if (t_lo <= 0) return fit;  // never left the main lobe
  }
  double t_hi = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (a[i] > floor) t_hi = t[i];
  if (!(t_hi > t_lo)) return fit;

  constexpr int kBins = 32;
  const double width = (t_hi - t_lo) / kBins;
  std::vector<double> bx, by;
  for (int b = 0; b < kBins; ++b) {
    const double lo = t_lo + b * width, hi = lo + width;
    double best_a = 0, best_t = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < lo || t[i] >= hi || a[i] <= floor) continue;
      if (a[i] > best_a) {
        best_a = a[i];
        best_t = t[i];
      }
    }
    if (best_a > 3 * floor) {  // envelope must clear the floor with margin
      bx.push_back(std::log(best_t));
      by.push_back(std::log(best_a));
    }
  }
  fit.n_bins = static_cast<int>(bx.size());
  if (fit.n_bins < 4) return fit;

  LinearFit line = fit_line(bx, by);
  fit.beta_hat = -line.slope;
  fit.r_squared = line.r_squared;
  fit.window_lo = std::exp(bx.front());
  fit.window_hi = std::exp(bx.back());
  fit.inconclusive = false;

  // super-polynomial evidence: slope magnitude grows across half-windows
  const double mid = 0.5 * (bx.front() + bx.back());
  std::vector<double> lx, ly, hx, hy;
  for (std::size_t i = 0; i < bx.size(); ++i) {
    if (bx[i] <= mid) {
      lx.push_back(bx[i]);
      ly.push_back(by[i]);
    } else {
      hx.push_back(bx[i]);
      hy.push_back(by[i]);
    }
  }
  if (lx.size() >= 4 && hx.size() >= 4) {
    const double s_lo = -fit_line(lx, ly).slope;
    const double s_hi = -fit_line(hx, hy).slope;
    fit.super_polynomial = s_lo > 0 && s_hi >= 1.25 * s_lo;
  }
  return fit;
}

}  // namespace sfpe
