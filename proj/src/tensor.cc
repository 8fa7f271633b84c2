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

#include "docre/tensor.h"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "docre/rng.h"

namespace docre {

void Matrix::SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }

void GemmAccumulate(const double* a, const double* b, double* c, int m, int k,
                    int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<size_t>(i) * n;
    const double* ai = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void GemmTransAAccumulate(const double* a, const double* b, double* c, int m,
                          int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<size_t>(p) * m;
    const double* bp = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("MatMul: shape mismatch");
  Matrix c(a.rows(), b.cols());
  GemmAccumulate(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix MatMulTransB(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("MatMulTransB: shape mismatch");
  }
  return MatMul(a, Transpose(b));
}

Matrix MatMulTransA(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("MatMulTransA: shape mismatch");
  }
  Matrix c(a.cols(), b.cols());
  GemmTransAAccumulate(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
  return c;
}

Matrix Transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

void AddInPlace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("AddInPlace: shape mismatch");
  }
  for (size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("Dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("Axpy: size mismatch");
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Parameter::Parameter(std::string n, std::vector<int> s)
    : name(std::move(n)), shape(std::move(s)) {
  size_t total = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("parameter " + name + ": bad shape");
    total *= static_cast<size_t>(d);
  }
  value.assign(total, 0.0);
  grad.assign(total, 0.0);
}

void Parameter::ZeroGrad() { std::fill(grad.begin(), grad.end(), 0.0); }

void Parameter::InitUniform(double bound, Rng& rng) {
  for (double& v : value) v = rng.Uniform(-bound, bound);
}

void ZeroGrads(const ParameterList& params) {
  for (Parameter* p : params) p->ZeroGrad();
}

int CopyValuesByName(const std::vector<const Parameter*>& from,
                     const ParameterList& to) {
  std::map<std::string, const Parameter*> index;
  for (const Parameter* p : from) index[p->name] = p;
  int copied = 0;
  for (Parameter* p : to) {
    auto it = index.find(p->name);
    if (it == index.end()) continue;
    if (it->second->shape != p->shape) {
      throw std::invalid_argument("parameter " + p->name + ": shape mismatch");
    }
    p->value = it->second->value;
    ++copied;
  }
  return copied;
}

}  // namespace docre
