// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nakul {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Every dimension is positive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Like the (shape, data) constructor but rejects NaN and Inf.
  static Tensor from_external(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Complex array stored as separate real and imaginary planes.
struct ComplexTensor {
  Shape shape;
  std::vector<double> re;
  std::vector<double> im;

  ComplexTensor() = default;
  explicit ComplexTensor(Shape s)
      : shape(std::move(s)), re(numel(shape), 0.0), im(numel(shape), 0.0) {}

  std::size_t size() const noexcept { return re.size(); }
};

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Running count of real multiply-adds performed by contraction and FFT
/// kernels on this thread. Used to cross-check analytic cost estimates.
std::uint64_t& mac_counter() noexcept;

/// Keeps freed tensor buffers in the heap instead of handing them back to
/// the OS after every op (glibc only). Saves page faults on repeated passes.
void retain_freed_memory() noexcept;

}  // namespace nakul
