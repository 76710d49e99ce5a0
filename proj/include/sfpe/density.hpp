#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "sfpe/solver.hpp"

namespace sfpe {

/// Uniform grid along one axis: points min, min+step, ..., min+(n-1)step.
struct GridAxis {
  double min = 0;
  double step = 0;
  int n = 0;

  double at(int i) const { return min + step * i; }
  double max() const { return at(n - 1); }
};

/// Empirical characteristic function on a regular frequency grid.
/// Values are stored row-major: index i0*n1 + i1 for d=2.
struct CharFunGrid {
  std::vector<GridAxis> axes;
  Eigen::VectorXcd values;
  std::int64_t n_samples = 0;

  int dim() const { return static_cast<int>(axes.size()); }
  std::complex<double> at(int i0) const { return values(i0); }
  std::complex<double> at(int i0, int i1) const { return values(i0 * axes[1].n + i1); }
};

enum class Taper { kNone, kHann };
enum class DensityMethod { kFourierInversion, kKde };

struct DensityGrid {
  std::vector<GridAxis> axes;
  Eigen::VectorXd values;  // same layout as CharFunGrid
  DensityMethod method = DensityMethod::kFourierInversion;
  Taper taper = Taper::kNone;
  Eigen::VectorXd bandwidth;  // per axis, KDE only
  double max_imag_ratio = 0;  // inversion: max |Im| over max |Re|

  int dim() const { return static_cast<int>(axes.size()); }
  double cell_volume() const;
  double total_mass() const;  // Riemann sum
};

struct DecayFit {
  double beta_hat = 0;
  double r_squared = 0;
  double window_lo = 0;
  double window_hi = 0;
  int n_bins = 0;
  bool super_polynomial = false;
  bool inconclusive = true;
};

/// phi_hat(t) = (1/N) sum_k exp(i<t, x_k>). Exact at t=0; conjugate
/// symmetric for real pools by construction.
CharFunGrid ecf(const SamplePool& pool, const std::vector<GridAxis>& axes, int threads = 1);

/// Symmetric frequency axes sized so that |phi_hat| at the boundary is
/// below `boundary_tol`, starting from `initial_extent` and doubling up to
/// a cap. points == 0 picks 4096 for d=1 and 256 for d=2.
std::vector<GridAxis> auto_frequency_axes(const SamplePool& pool, int points = 0,
                                          double boundary_tol = 0.01,
                                          double initial_extent = 64.0,
                                          double max_extent = 4096.0);

/// Fourier inversion (2pi)^{-d} integral of e^{-i<x,t>} phi(t) dt on the
/// FFT dual grid. Throws when boundary energy exceeds 1% (grid too small:
/// the density would alias).
DensityGrid invert(const CharFunGrid& cf, Taper taper = Taper::kHann);

/// Gaussian-kernel estimate on the given spatial axes; bandwidth <= 0
/// selects 0.9 min(sd, IQR/1.34) N^{-1/5} per axis.
DensityGrid kde(const SamplePool& pool, double bandwidth, const std::vector<GridAxis>& axes,
                int threads = 1);

/// Least-squares log-log slope of the |phi_hat| envelope over the
/// above-noise window (|phi_hat| > 3/sqrt(n)). The envelope is the per-bin
/// maximum over 32 linear frequency bins; bins whose envelope does not
/// clear 3x the noise floor are dropped. t_lo == 0 starts the window at
/// the first frequency past the main lobe (|phi_hat| < 0.5). 2-d grids are
/// radialized by averaging |phi_hat| over 32 directions per radius.
DecayFit decay_fit(const CharFunGrid& cf, double t_lo = 0);

}  // namespace sfpe
