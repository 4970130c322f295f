#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cueforge/raster.hpp"

namespace cueforge {

enum class Diffusivity { PeronaMalik, WeickertExp };

std::string to_string(Diffusivity d);
Diffusivity parse_diffusivity(const std::string& text);

/// Parameters of edge-enhancing diffusion. Defaults: lambda = 1/15, k = 5,
/// sigma = sqrt(5), tau = 0.2, h = 1, 8192 steps, alpha = 0.49, beta = 0;
/// rho (orientation smoothing) is tied to sigma.
struct DiffusionParams {
  double lambda = 1.0 / 15.0;  // contrast parameter, intensity units
  int kernel_size = 5;         // truncated Gaussian support, odd
  double sigma = 2.23606797749979;  // presmoothing, sqrt(5)
  double rho = 2.23606797749979;    // orientation smoothing
  double tau = 0.2;
  double h = 1.0;
  int n_steps = 8192;
  double alpha = 0.49;
  double beta = 0.0;
  Diffusivity diffusivity = Diffusivity::PeronaMalik;

  /// Throws InvalidParameter/BadKernel on violated invariants. Unless
  /// `allow_unstable`, also rejects tau above stable_tau() and |beta| > 1 - 2 alpha.
  void validate(bool allow_unstable = false) const;

  /// Explicit step bound h^2 / (5 + 3|beta|). Conservative for tensors with
  /// eigenvalues in [0,1]: the stencil operator's spectral radius stays below
  /// 2 / stable_tau() across the admissible (alpha, beta) range.
  double stable_tau() const noexcept;

  std::string describe() const;
};

/// g(s) for squared gradient magnitude s.
double diffusivity(Diffusivity kind, double s, double lambda) noexcept;

/// Per-pixel symmetric tensor [[a, b], [b, c]].
struct TensorField {
  int height = 0;
  int width = 0;
  std::vector<double> a, b, c;

  bool same_size(const RasterImage& img) const noexcept {
    return height == img.height() && width == img.width();
  }
  static TensorField identity(int height, int width);
};

/// Normalized truncated Gaussian taps exp(-i^2 / 2 sigma^2) / Z for
/// i in [-(k-1)/2, (k-1)/2].
std::vector<double> gaussian_kernel(int kernel_size, double sigma);

/// Separable convolution of every channel with reflecting (half-sample
/// symmetric) boundaries.
RasterImage gaussian_blur(const RasterImage& img, int kernel_size, double sigma);

/// Structure-tensor driven diffusion tensor. The channel-summed structure
/// tensor of the presmoothed image is smoothed with rho; its leading
/// eigenvector v1 gets eigenvalue g(mu1), the orthogonal direction 1.
TensorField diffusion_tensor(const RasterImage& img, const DiffusionParams& p);

/// One explicit Euler step u <- u + tau * div(D grad u), channels sharing D.
///
/// The divergence uses the (alpha, beta) family of 3x3 stencils. For an edge
/// between pixels p and q the tensor entries are averaged (a, b, c denote the
/// two-point means) and the flux weights are
///
///   horizontal  w = ((1-alpha) a - alpha c + beta |b|) / h^2
///   vertical    w = ((1-alpha) c - alpha a + beta |b|) / h^2
///   (+1,+1)     w = (alpha (a+c) + b - beta |b|) / (2 h^2)
///   (+1,-1)     w = (alpha (a+c) - b - beta |b|) / (2 h^2)
///
/// so that du_p = tau * sum_q w_pq (u_q - u_p). For constant D this is
/// consistent with a u_xx + 2 b u_xy + c u_yy: alpha moves part of the
/// isotropic term onto the diagonals and beta weights the sign-adapted mixed
/// derivative. (alpha, beta) = (0, -1) recovers the classic nonnegative
/// scheme, alpha = 0 with an isotropic tensor the 5-point Laplacian.
/// Edges leaving the image are dropped (zero flux), so sum(u) is conserved.
RasterImage eed_step(const RasterImage& img, const TensorField& tensor, const DiffusionParams& p);

/// Called after step `step` (1-based) with the current image.
using EedObserver = std::function<void(int step, const RasterImage& current)>;

/// n_steps explicit steps, recomputing the tensor every `tensor_refresh` steps.
RasterImage run_eed(const RasterImage& img, const DiffusionParams& p, int tensor_refresh = 1,
                    unsigned workers = 1, const EedObserver& observer = {});

/// Sum over channels and pixels of the squared forward-difference gradient.
double roughness(const RasterImage& img);

}  // namespace cueforge
