#include "lcc/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw ContractViolation("tensor: empty shape (use {1} for scalars)");
  for (auto d : shape)
    if (d == 0) throw ContractViolation("tensor: zero-sized dimension in " + shape_str(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (numel(shape_) != values_.size())
    throw ContractViolation("tensor: shape " + shape_str(shape_) + " needs " +
                            std::to_string(numel(shape_)) + " values, got " +
                            std::to_string(values_.size()));
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size())
    throw ContractViolation("tensor: index rank " + std::to_string(index.size()) +
                            " != tensor rank " + std::to_string(shape_.size()));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis])
      throw ContractViolation("tensor: index " + std::to_string(i) + " out of range on axis " +
                              std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return values_[offset(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return values_[offset(index)]; }

double Tensor::item() const {
  if (values_.size() != 1)
    throw ContractViolation("tensor: item() on tensor of shape " + shape_str(shape_));
  return values_[0];
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != values_.size())
    throw ContractViolation("tensor: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), values_);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace lcc
