#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace ssr::spectral {

// Real-input DFT of a fixed size backed by an FFTW plan. Executing a plan is
// thread-safe; plan creation and destruction are serialized internally.
class RealDft {
 public:
  explicit RealDft(std::size_t size);
  ~RealDft();
  RealDft(RealDft&&) noexcept;
  RealDft& operator=(RealDft&&) noexcept;
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  std::size_t size() const noexcept { return size_; }
  std::size_t bins() const noexcept { return size_ / 2 + 1; }

  // Non-redundant bins 0..size/2 of the unnormalized forward transform.
  std::vector<std::complex<double>> forward(std::span<const double> input) const;
  std::vector<double> magnitudes(std::span<const double> input) const;
  std::vector<double> power(std::span<const double> input) const;

 private:
  struct Plan;
  std::size_t size_;
  std::unique_ptr<Plan> plan_;
};

// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

}  // namespace ssr::spectral
