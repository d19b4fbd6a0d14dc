// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace drfuse {

// Dense row-major tensor of doubles. Deliberately minimal: this project only
// needs the shapes its operators accept, not a general tensor library.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor row(std::vector<double> values);  // shape {1, n}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-d conveniences; valid only when rank() == 2.
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return shape_[1]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  double& at(std::size_t o, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((o * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t o, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((o * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);
  double item() const { return data_[0]; }

  std::vector<double> to_vector() const { return data_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// C = A(m x k) * B(k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A(m x k) * B(n x k)^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A(k x m)^T * B(k x n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);

void add_inplace(Tensor& dst, const Tensor& src);          // dst += src
void axpy_inplace(Tensor& dst, double a, const Tensor& x); // dst += a*x

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

}  // namespace drfuse
