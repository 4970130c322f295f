#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cueforge/eed.hpp"
#include "cueforge/error.hpp"

using namespace cueforge;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

RasterImage random_image(int h, int w, ColorSpace space, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterImage img(h, w, space);
  for (double& v : img.data()) v = u(gen);
  return img;
}

// Random field of PSD tensors with eigenvalues in [0,1].
TensorField random_tensors(int h, int w, std::uint64_t seed, bool degenerate) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  TensorField d{h, w, std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double th = u(gen) * 3.141592653589793;
    const double l1 = degenerate ? 1.0 : u(gen), l2 = degenerate ? 0.0 : u(gen);
    const double cs = std::cos(th), sn = std::sin(th);
    d.a[i] = l1 * cs * cs + l2 * sn * sn;
    d.b[i] = (l1 - l2) * cs * sn;
    d.c[i] = l1 * sn * sn + l2 * cs * cs;
  }
  return d;
}

double sum_of(const RasterImage& img) {
  double s = 0.0;
  for (double v : img.data()) s += v;
  return s;
}

}  // namespace

TEST_CASE("parameter validation") {
  DiffusionParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.stable_tau() == doctest::Approx(0.2));

  auto bad = [](auto mutate) {
    DiffusionParams q;
    mutate(q);
    return kind_of([&] { q.validate(); });
  };
  CHECK(bad([](DiffusionParams& q) { q.alpha = 0.9; }) == ErrorKind::InvalidParameter);
  CHECK(bad([](DiffusionParams& q) { q.kernel_size = 4; }) == ErrorKind::BadKernel);
  CHECK(bad([](DiffusionParams& q) { q.tau = 0.3; }) == ErrorKind::InvalidParameter);
  CHECK(bad([](DiffusionParams& q) { q.beta = 0.5; }) == ErrorKind::InvalidParameter);
  CHECK(bad([](DiffusionParams& q) { q.lambda = 0.0; }) == ErrorKind::InvalidParameter);

  try {
    DiffusionParams q;
    q.alpha = 0.9;
    q.validate();
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("[0,0.5]") != std::string::npos);
  }
  DiffusionParams loose;
  loose.tau = 0.3;
  CHECK_NOTHROW(loose.validate(true));

  const std::string d = DiffusionParams{}.describe();
  for (const char* key : {"lambda=", "sigma=", "tau=", "alpha=", "beta=0", "diffusivity=pm"})
    CHECK(d.find(key) != std::string::npos);
}

TEST_CASE("diffusivities") {
  const double lambda = 1.0 / 15.0;
  for (Diffusivity kind : {Diffusivity::PeronaMalik, Diffusivity::WeickertExp}) {
    CHECK(diffusivity(kind, 0.0, lambda) == 1.0);
    double prev = 1.0;
    for (double s = 1e-4; s < 1.0; s *= 2.0) {
      const double g = diffusivity(kind, s, lambda);
      CHECK(g > 0.0);
      CHECK(g <= prev);
      prev = g;
    }
  }
  CHECK(diffusivity(Diffusivity::PeronaMalik, lambda * lambda, lambda) == doctest::Approx(0.5));
  CHECK(diffusivity(Diffusivity::WeickertExp, lambda * lambda, lambda) == doctest::Approx(1.0 - std::exp(-3.31488)));
  CHECK(parse_diffusivity("weickert") == Diffusivity::WeickertExp);
  CHECK(kind_of([] { parse_diffusivity("linear"); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("gaussian kernel and blur") {
  const double sigma = std::sqrt(5.0);
  const auto taps = gaussian_kernel(5, sigma);
  REQUIRE(taps.size() == 5);
  double z = 0.0;
  for (int i = -2; i <= 2; ++i) z += std::exp(-i * i / (2.0 * sigma * sigma));
  for (int i = -2; i <= 2; ++i) CHECK(taps[i + 2] == doctest::Approx(std::exp(-i * i / (2.0 * sigma * sigma)) / z));

  RasterImage impulse(9, 9, ColorSpace::GRAY);
  impulse.at(0, 4, 4) = 1.0;
  const RasterImage b = gaussian_blur(impulse, 5, sigma);
  for (int y = 2; y <= 6; ++y)
    for (int x = 2; x <= 6; ++x) CHECK(b.at(0, y, x) == doctest::Approx(taps[y - 2] * taps[x - 2]).epsilon(1e-12));

  const RasterImage flat(7, 5, ColorSpace::RGB, 0.42);
  const RasterImage fb = gaussian_blur(flat, 5, sigma);
  for (double v : fb.data()) CHECK(v == doctest::Approx(0.42).epsilon(1e-14));

  const RasterImage r = random_image(13, 11, ColorSpace::GRAY, 3);
  CHECK(sum_of(gaussian_blur(r, 5, sigma)) == doctest::Approx(sum_of(r)).epsilon(1e-12));
}

TEST_CASE("diffusion tensors") {
  DiffusionParams p;
  SUBCASE("constant image gives the identity") {
    const TensorField d = diffusion_tensor(RasterImage(6, 6, ColorSpace::RGB, 0.3), p);
    for (std::size_t i = 0; i < d.a.size(); ++i) {
      CHECK(d.a[i] == doctest::Approx(1.0));
      CHECK(d.b[i] == doctest::Approx(0.0));
      CHECK(d.c[i] == doctest::Approx(1.0));
    }
  }
  SUBCASE("vertical step edge diffuses less across than along") {
    RasterImage img(16, 16, ColorSpace::GRAY);
    for (int y = 0; y < 16; ++y)
      for (int x = 8; x < 16; ++x) img.at(0, y, x) = 1.0;
    const TensorField d = diffusion_tensor(img, p);
    for (int y = 0; y < 16; ++y)
      for (int x = 7; x <= 8; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * 16 + x;
        CHECK(std::abs(d.b[i]) < 1e-6);  // eigenvectors aligned with the axes
        CHECK(d.c[i] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(d.a[i] < 1.0);
      }
  }
  SUBCASE("tensors are PSD with eigenvalues at most 1") {
    // Strict positivity of the small eigenvalue comes from g > 0; reconstructed
    // from a, b, c it is only resolvable to rounding.
    std::size_t checked = 0;
    for (int k = 0; k < 62; ++k) {
      DiffusionParams q;
      q.diffusivity = k % 2 ? Diffusivity::WeickertExp : Diffusivity::PeronaMalik;
      q.rho = k % 3 == 0 ? 0.0 : q.sigma;
      const TensorField d = diffusion_tensor(random_image(128, 128, ColorSpace::RGB, 100 + k), q);
      bool ok = true;
      for (std::size_t i = 0; i < d.a.size(); ++i) {
        const double tr = d.a[i] + d.c[i], det = d.a[i] * d.c[i] - d.b[i] * d.b[i];
        const double disc = std::hypot(0.5 * (d.a[i] - d.c[i]), d.b[i]);
        const double hi = tr / 2.0 + disc, lo = tr / 2.0 - disc;
        ok = ok && d.a[i] >= 0.0 && d.c[i] >= 0.0 && det >= -1e-12 && hi <= 1.0 + 1e-12 && lo >= -1e-12;
        ++checked;
      }
      CHECK(ok);
    }
    CHECK(checked >= 1000000);
  }
}

TEST_CASE("eed_step reproduces div(D grad u) on quadratics") {
  // For u = p x^2 + q xy + r y^2 and a constant tensor the divergence is
  // 2pa + 2qb + 2rc, which every consistent second-order stencil hits exactly
  // away from the boundary.
  const int h = 9, w = 11;
  const double pc = 0.013, qc = -0.021, rc = 0.017;
  RasterImage u(h, w, ColorSpace::GRAY);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) u.at(0, y, x) = pc * x * x + qc * x * y + rc * y * y;
  for (double alpha : {0.0, 0.25, 0.49}) {
    for (double beta_sign : {-1.0, 0.0, 1.0}) {
      const double a = 0.8, b = 0.3, c = 0.4;
      TensorField d{h, w, std::vector<double>(h * w, a), std::vector<double>(h * w, b),
                    std::vector<double>(h * w, c)};
      DiffusionParams p;
      p.alpha = alpha;
      p.beta = beta_sign * (1.0 - 2.0 * alpha);
      p.tau = 0.1;
      p.h = 1.0;
      const RasterImage next = eed_step(u, d, p);
      const double expect = 2.0 * pc * a + 2.0 * qc * b + 2.0 * rc * c;
      for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x)
          CHECK((next.at(0, y, x) - u.at(0, y, x)) / p.tau == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("eed_step basics") {
  DiffusionParams p;
  const RasterImage flat(8, 8, ColorSpace::RGB, 0.6);
  CHECK(eed_step(flat, random_tensors(8, 8, 1, false), p) == flat);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RasterImage img = random_image(12, 10, ColorSpace::RGB, seed);
    const RasterImage out = eed_step(img, random_tensors(12, 10, seed + 50, seed % 2 == 0), p);
    CHECK(sum_of(out) == doctest::Approx(sum_of(img)).epsilon(1e-12));
  }
  CHECK(kind_of([&] { eed_step(flat, TensorField::identity(8, 7), p); }) == ErrorKind::ResolutionMismatch);
}

TEST_CASE("eed_step never increases the discrete energy") {
  // With a symmetric negative semidefinite operator A, <u, A u> <= 0 and an
  // admissible step shrinks the L2 norm of the zero-mean part.
  for (double alpha : {0.0, 0.25, 0.49, 0.5}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      DiffusionParams p;
      p.alpha = alpha;
      p.beta = (seed % 3 == 0 ? 1.0 : (seed % 3 == 1 ? -1.0 : 0.0)) * (1.0 - 2.0 * alpha);
      p.tau = p.stable_tau();
      const TensorField d = random_tensors(14, 14, seed, seed % 2 == 0);
      const RasterImage u = random_image(14, 14, ColorSpace::GRAY, 1000 + seed);
      const RasterImage next = eed_step(u, d, p);
      double form = 0.0, before = 0.0, after = 0.0;
      const double mean = sum_of(u) / 196.0;
      for (std::size_t i = 0; i < 196; ++i) {
        form += u.data()[i] * (next.data()[i] - u.data()[i]);
        before += (u.data()[i] - mean) * (u.data()[i] - mean);
        after += (next.data()[i] - mean) * (next.data()[i] - mean);
      }
      CHECK(form <= 1e-12);
      CHECK(after <= before + 1e-12);
    }
  }
}

TEST_CASE("run_eed") {
  DiffusionParams p;
  const RasterImage img = random_image(10, 10, ColorSpace::RGB, 9);
  p.n_steps = 0;
  CHECK(run_eed(img, p) == img);

  p.n_steps = 6;
  int calls = 0;
  const RasterImage out = run_eed(img, p, 1, 1, [&](int step, const RasterImage&) { CHECK(step == ++calls); });
  CHECK(calls == 6);
  CHECK(roughness(out) < roughness(img));

  // Manual composition with a tensor refreshed every step.
  RasterImage manual = img;
  for (int i = 0; i < 6; ++i) manual = eed_step(manual, diffusion_tensor(manual, p), p);
  CHECK(out == manual);

  // Row-parallel execution is bitwise identical.
  CHECK(run_eed(img, p, 1, 3) == out);

  // A stale tensor differs from a fresh one after the first step.
  CHECK(run_eed(img, p, 3) != out);
  CHECK(kind_of([&] { run_eed(img, p, 0); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("roughness sums squared forward differences") {
  const RasterImage img(2, 2, ColorSpace::GRAY, {0.0, 1.0, 0.5, 0.5});
  CHECK(roughness(img) == doctest::Approx(1.0 + 0.0 + 0.25 + 0.25));
}
