// Copyright 2026 The docre Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOCRE_TENSOR_H_
#define DOCRE_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace docre {

class Rng;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const {
    return data_.data() + static_cast<size_t>(r) * cols_;
  }
  std::span<double> Row(int r) { return {row(r), static_cast<size_t>(cols_)}; }
  std::span<const double> Row(int r) const {
    return {row(r), static_cast<size_t>(cols_)};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void SetZero();
  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Raw kernels; all accumulate into `c`.
// c[m x n] += a[m x k] * b[k x n]
void GemmAccumulate(const double* a, const double* b, double* c, int m, int k, int n);
// c[m x n] += a^T * b, a is [k x m], b is [k x n]
void GemmTransAAccumulate(const double* a, const double* b, double* c, int m,
                          int k, int n);

Matrix MatMul(const Matrix& a, const Matrix& b);
Matrix MatMulTransB(const Matrix& a, const Matrix& b);  // a * b^T
Matrix MatMulTransA(const Matrix& a, const Matrix& b);  // a^T * b
Matrix Transpose(const Matrix& a);
void AddInPlace(Matrix& a, const Matrix& b);

double Dot(std::span<const double> a, std::span<const double> b);
void Axpy(double alpha, std::span<const double> x, std::span<double> y);

// A named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s);

  size_t size() const { return value.size(); }
  double* data() { return value.data(); }
  const double* data() const { return value.data(); }
  void ZeroGrad();
  void InitUniform(double bound, Rng& rng);
};

using ParameterList = std::vector<Parameter*>;

void ZeroGrads(const ParameterList& params);
// Copies values between lists matched by name; returns the number copied.
// Throws on a shape mismatch for a shared name.
int CopyValuesByName(const std::vector<const Parameter*>& from,
                     const ParameterList& to);

}  // namespace docre

#endif  // DOCRE_TENSOR_H_
