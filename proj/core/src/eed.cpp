#include "cueforge/eed.hpp"

#include <algorithm>
#include <span>
#include <cmath>
#include <sstream>

#include "cueforge/error.hpp"
#include "cueforge/parallel.hpp"

namespace cueforge {

std::string to_string(Diffusivity d) {
  return d == Diffusivity::PeronaMalik ? "pm" : "weickert";
}

Diffusivity parse_diffusivity(const std::string& text) {
  if (text == "pm" || text == "perona-malik") return Diffusivity::PeronaMalik;
  if (text == "weickert" || text == "exp") return Diffusivity::WeickertExp;
  throw Error(ErrorKind::InvalidParameter, "unknown diffusivity '" + text + "' (expected pm|weickert)");
}

double DiffusionParams::stable_tau() const noexcept {
  return h * h / (5.0 + 3.0 * std::abs(beta));
}

void DiffusionParams::validate(bool allow_unstable) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidParameter, msg); };
  if (!(lambda > 0.0)) fail("lambda must be > 0");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw Error(ErrorKind::BadKernel, "kernel size must be odd and positive, got " + std::to_string(kernel_size));
  }
  if (!(sigma > 0.0)) throw Error(ErrorKind::BadKernel, "sigma must be > 0");
  if (rho < 0.0) throw Error(ErrorKind::BadKernel, "rho must be >= 0");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(h > 0.0)) fail("h must be > 0");
  if (n_steps < 0) fail("n_steps must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    std::ostringstream msg;
    msg << "alpha = " << alpha << " outside the admissible range [0,0.5]";
    fail(msg.str());
  }
  if (allow_unstable) return;
  if (std::abs(beta) > 1.0 - 2.0 * alpha + 1e-12) {
    std::ostringstream msg;
    msg << "|beta| = " << std::abs(beta) << " exceeds 1 - 2 alpha = " << 1.0 - 2.0 * alpha
        << " (L2 stability); pass the unstable override to run anyway";
    fail(msg.str());
  }
  if (tau > stable_tau() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "tau = " << tau << " exceeds the explicit stability limit h^2/(5+3|beta|) = " << stable_tau()
        << "; pass the unstable override to run anyway";
    fail(msg.str());
  }
}

std::string DiffusionParams::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "lambda=" << lambda << " kernel=" << kernel_size << " sigma=" << sigma << " rho=" << rho
      << " tau=" << tau << " h=" << h << " steps=" << n_steps << " alpha=" << alpha << " beta=" << beta
      << " diffusivity=" << to_string(diffusivity);
  return out.str();
}

double diffusivity(Diffusivity kind, double s, double lambda) noexcept {
  const double ratio = s / (lambda * lambda);
  if (kind == Diffusivity::PeronaMalik) return 1.0 / (1.0 + ratio);
  if (ratio <= 0.0) return 1.0;
  constexpr double kCm = 3.31488;
  const double r2 = ratio * ratio;
  const double g = -std::expm1(-kCm / (r2 * r2));
  return std::max(g, 1e-300);
}

TensorField TensorField::identity(int height, int width) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  return TensorField{height, width, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0),
                     std::vector<double>(n, 1.0)};
}

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw Error(ErrorKind::BadKernel, "kernel size must be odd and positive, got " + std::to_string(kernel_size));
  }
  if (!(sigma > 0.0)) throw Error(ErrorKind::BadKernel, "sigma must be > 0");
  const int radius = kernel_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(kernel_size));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

inline int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

void convolve_plane(std::span<const double> src, std::span<double> dst, int h, int w,
                    const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size()) / 2;
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * row[reflect(x + k, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += taps[k + radius] * tmp[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
      dst[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

struct StencilWeights {
  int height = 0;
  int width = 0;
  // Weight of the edge from pixel p to its east, south, south-east and
  // south-west neighbour; zero where the neighbour is off the image.
  std::vector<double> east, south, south_east, south_west;
};

// Each 2x2 cell carries the mean tensor of its four pixels and contributes
// half its axial weights to its two horizontal and two vertical edges and the
// full diagonal weight to its two diagonals. Summing cell energies keeps the
// operator symmetric, and negative semidefinite whenever |beta| <= 1 - 2 alpha.
// Mirrored cells outside the image have b = 0 and fold into a plain axial
// weight of a/2 (c/2 on vertical edges).
StencilWeights stencil_weights(const TensorField& d, const DiffusionParams& p) {
  const int h = d.height, w = d.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  StencilWeights s{h, w, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                   std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double inv_h2 = 1.0 / (p.h * p.h);
  const double alpha = p.alpha, beta = p.beta;
  auto idx = [w](int y, int x) { return static_cast<std::size_t>(y) * w + x; };

  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const std::size_t tl = idx(y, x), tr = idx(y, x + 1), bl = idx(y + 1, x), br = idx(y + 1, x + 1);
      const double a = 0.25 * (d.a[tl] + d.a[tr] + d.a[bl] + d.a[br]);
      const double b = 0.25 * (d.b[tl] + d.b[tr] + d.b[bl] + d.b[br]);
      const double c = 0.25 * (d.c[tl] + d.c[tr] + d.c[bl] + d.c[br]);
      const double wx = 0.5 * ((1.0 - alpha) * a - alpha * c + beta * std::abs(b)) * inv_h2;
      const double wy = 0.5 * ((1.0 - alpha) * c - alpha * a + beta * std::abs(b)) * inv_h2;
      s.east[tl] += wx;
      s.east[bl] += wx;
      s.south[tl] += wy;
      s.south[tr] += wy;
      s.south_east[tl] = 0.5 * (alpha * (a + c) + b - beta * std::abs(b)) * inv_h2;
      s.south_west[tr] = 0.5 * (alpha * (a + c) - b - beta * std::abs(b)) * inv_h2;
    }
  }
  for (int x = 0; x + 1 < w; ++x) {
    s.east[idx(0, x)] += 0.25 * (d.a[idx(0, x)] + d.a[idx(0, x + 1)]) * inv_h2;
    s.east[idx(h - 1, x)] += 0.25 * (d.a[idx(h - 1, x)] + d.a[idx(h - 1, x + 1)]) * inv_h2;
  }
  for (int y = 0; y + 1 < h; ++y) {
    s.south[idx(y, 0)] += 0.25 * (d.c[idx(y, 0)] + d.c[idx(y + 1, 0)]) * inv_h2;
    s.south[idx(y, w - 1)] += 0.25 * (d.c[idx(y, w - 1)] + d.c[idx(y + 1, w - 1)]) * inv_h2;
  }
  return s;
}

void apply_stencil(const RasterImage& src, RasterImage& dst, const StencilWeights& s, double tau,
                   unsigned workers) {
  const int h = src.height(), w = src.width();
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int c = 0; c < src.channels(); ++c) {
      const auto u = src.plane(c);
      auto out = dst.plane(c);
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double ui = u[i];
        double flux = 0.0;
        if (x + 1 < w) flux += s.east[i] * (u[i + 1] - ui);
        if (x > 0) flux += s.east[i - 1] * (u[i - 1] - ui);
        if (y + 1 < h) {
          flux += s.south[i] * (u[i + w] - ui);
          if (x + 1 < w) flux += s.south_east[i] * (u[i + w + 1] - ui);
          if (x > 0) flux += s.south_west[i] * (u[i + w - 1] - ui);
        }
        if (y > 0) {
          flux += s.south[i - w] * (u[i - w] - ui);
          if (x > 0) flux += s.south_east[i - w - 1] * (u[i - w - 1] - ui);
          if (x + 1 < w) flux += s.south_west[i - w + 1] * (u[i - w + 1] - ui);
        }
        out[i] = ui + tau * flux;
      }
    }
  });
}

}  // namespace

RasterImage gaussian_blur(const RasterImage& img, int kernel_size, double sigma) {
  const auto taps = gaussian_kernel(kernel_size, sigma);
  RasterImage out(img.height(), img.width(), img.space());
  for (int c = 0; c < img.channels(); ++c) convolve_plane(img.plane(c), out.plane(c), img.height(), img.width(), taps);
  return out;
}

TensorField diffusion_tensor(const RasterImage& img, const DiffusionParams& p) {
  const int h = img.height(), w = img.width();
  const std::size_t n = img.pixel_count();
  const RasterImage smooth = gaussian_blur(img, p.kernel_size, p.sigma);

  // Joint structure tensor, stored as three planes (j11, j12, j22).
  RasterImage structure(h, w, ColorSpace::RGB, 0.0);
  auto j11 = structure.plane(0), j12 = structure.plane(1), j22 = structure.plane(2);
  const double inv_2h = 1.0 / (2.0 * p.h);
  for (int c = 0; c < smooth.channels(); ++c) {
    const auto u = smooth.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double ux = (u[static_cast<std::size_t>(y) * w + reflect(x + 1, w)] -
                           u[static_cast<std::size_t>(y) * w + reflect(x - 1, w)]) * inv_2h;
        const double uy = (u[static_cast<std::size_t>(reflect(y + 1, h)) * w + x] -
                           u[static_cast<std::size_t>(reflect(y - 1, h)) * w + x]) * inv_2h;
        j11[i] += ux * ux;
        j12[i] += ux * uy;
        j22[i] += uy * uy;
      }
    }
  }
  if (p.rho > 0.0) structure = gaussian_blur(structure, p.kernel_size, p.rho);

  TensorField d{h, w, std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double s11 = structure.plane(0)[i], s12 = structure.plane(1)[i], s22 = structure.plane(2)[i];
    const double diff = s11 - s22;
    const double root = std::sqrt(diff * diff + 4.0 * s12 * s12);
    const double mu1 = 0.5 * (s11 + s22 + root);
    // Leading eigenvector; pick the better conditioned of the two closed forms.
    double vx = diff + root, vy = 2.0 * s12;
    const double alt_x = 2.0 * s12, alt_y = s22 - s11 + root;
    if (alt_x * alt_x + alt_y * alt_y > vx * vx + vy * vy) {
      vx = alt_x;
      vy = alt_y;
    }
    const double norm = std::sqrt(vx * vx + vy * vy);
    if (norm > 0.0) {
      vx /= norm;
      vy /= norm;
    } else {
      vx = 1.0;
      vy = 0.0;
    }
    const double across = diffusivity(p.diffusivity, std::max(mu1, 0.0), p.lambda);
    d.a[i] = across * vx * vx + vy * vy;
    d.b[i] = (across - 1.0) * vx * vy;
    d.c[i] = across * vy * vy + vx * vx;
  }
  return d;
}

RasterImage eed_step(const RasterImage& img, const TensorField& tensor, const DiffusionParams& p) {
  if (!tensor.same_size(img)) {
    throw Error(ErrorKind::ResolutionMismatch, "tensor field is " + std::to_string(tensor.height) + "x" +
                                                   std::to_string(tensor.width) + ", image is " +
                                                   std::to_string(img.height()) + "x" +
                                                   std::to_string(img.width()));
  }
  RasterImage out(img.height(), img.width(), img.space());
  apply_stencil(img, out, stencil_weights(tensor, p), p.tau, 1);
  return out;
}

RasterImage run_eed(const RasterImage& img, const DiffusionParams& p, int tensor_refresh, unsigned workers,
                    const EedObserver& observer) {
  if (tensor_refresh < 1) throw Error(ErrorKind::InvalidParameter, "tensor refresh stride must be >= 1");
  if (p.n_steps < 0) throw Error(ErrorKind::InvalidParameter, "n_steps must be >= 0");
  RasterImage current = img;
  if (p.n_steps == 0) return current;
  RasterImage next(img.height(), img.width(), img.space());
  StencilWeights weights;
  for (int step = 0; step < p.n_steps; ++step) {
    if (step % tensor_refresh == 0) weights = stencil_weights(diffusion_tensor(current, p), p);
    apply_stencil(current, next, weights, p.tau, workers);
    std::swap(current, next);
    if (observer) observer(step + 1, current);
  }
  return current;
}

double roughness(const RasterImage& img) {
  double sum = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double u = img.at(c, y, x);
        if (x + 1 < img.width()) sum += (img.at(c, y, x + 1) - u) * (img.at(c, y, x + 1) - u);
        if (y + 1 < img.height()) sum += (img.at(c, y + 1, x) - u) * (img.at(c, y + 1, x) - u);
      }
    }
  }
  return sum;
}

}  // namespace cueforge
