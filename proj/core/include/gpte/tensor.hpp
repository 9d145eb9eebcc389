#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gpte {

// Dense row-major tensor of 64-bit floats. Tensors are plain values: copying
// one yields independent storage, and every public operation that produces a
// Tensor leaves it fully finite (NaN/Inf raises NumericsError). A scalar has
// rank 0 and one element. A default-constructed Tensor is an empty sentinel
// used for "not present" fields (e.g. the projection of an unfactorized
// embedding) and is not a valid operand.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor scalar(double value);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t flat_index) { return data_[flat_index]; }
  double operator[](std::size_t flat_index) const { return data_[flat_index]; }

  // Multi-index access; slow, intended for tests and small tensors.
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  // Value of a single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  // Throws NumericsError naming `op` if any element is NaN or Inf.
  void ensure_finite(const char* op) const;

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Product of dims; the empty shape (a scalar) has size 1.
std::size_t shape_size(const std::vector<std::size_t>& shape);

// "[2, 3]" style rendering for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace gpte
