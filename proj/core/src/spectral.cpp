#include "ssr/spectral.hpp"

#include "ssr/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

namespace ssr::spectral {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace

struct RealDft::Plan {
  std::unique_ptr<double, FftwFree> in;
  std::unique_ptr<fftw_complex, FftwFree> out;
  fftw_plan plan = nullptr;

  explicit Plan(std::size_t n)
      : in(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }

  ~Plan() {
    std::lock_guard lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
  }
};

RealDft::RealDft(std::size_t size) : size_(size) {
  require(size >= 1, ErrorKind::Parameter, "DFT size must be >= 1");
  plan_ = std::make_unique<Plan>(size);
  require(plan_->plan != nullptr, ErrorKind::Parameter, "FFTW failed to create a plan");
}

RealDft::~RealDft() = default;
RealDft::RealDft(RealDft&&) noexcept = default;
RealDft& RealDft::operator=(RealDft&&) noexcept = default;

std::vector<std::complex<double>> RealDft::forward(std::span<const double> input) const {
  require(input.size() == size_, ErrorKind::Parameter, "DFT input length does not match plan size");
  // New-array execute keeps concurrent calls on one plan independent.
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * size_)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins())));
  std::copy(input.begin(), input.end(), in.get());
  fftw_execute_dft_r2c(plan_->plan, in.get(), out.get());

  std::vector<std::complex<double>> result(bins());
  for (std::size_t k = 0; k < bins(); ++k) result[k] = {out.get()[k][0], out.get()[k][1]};
  return result;
}

std::vector<double> RealDft::magnitudes(std::span<const double> input) const {
  auto spectrum = forward(input);
  std::vector<double> mags(spectrum.size());
  std::transform(spectrum.begin(), spectrum.end(), mags.begin(),
                 [](const std::complex<double>& c) { return std::abs(c); });
  return mags;
}

std::vector<double> RealDft::power(std::span<const double> input) const {
  auto spectrum = forward(input);
  std::vector<double> pow(spectrum.size());
  std::transform(spectrum.begin(), spectrum.end(), pow.begin(),
                 [](const std::complex<double>& c) { return std::norm(c); });
  return pow;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

}  // namespace ssr::spectral
