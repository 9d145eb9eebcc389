#include "gpte/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "gpte/error.hpp"

namespace gpte {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(double value) {
  return Tensor({}, std::vector<double>{value});
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return const_cast<Tensor*>(this)->at(index);
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  if (index.size() != shape_.size()) {
    throw ShapeError("tensor: index rank " + std::to_string(index.size()) +
                     " does not match shape " + shape_str(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw ShapeError("tensor: index out of range for shape " + shape_str(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return data_[flat];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() requires a single element, shape is " + shape_str(shape_));
  }
  return data_[0];
}

void Tensor::ensure_finite(const char* op) const {
  // x * 0 is 0 for every finite x and NaN for Inf/NaN, so one accumulator
  // detects a bad element without a branch per element.
  double acc = 0.0;
  for (double v : data_) acc += v * 0.0;
  if (std::isnan(acc)) {
    throw NumericsError(std::string(op) + ": non-finite value in result of shape " +
                        shape_str(shape_));
  }
}

}  // namespace gpte
