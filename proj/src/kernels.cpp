/*
 * Copyright (c) 2026 mslam contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "mslam/kernels.hpp"

#include <cmath>

namespace mslam::kernels {

namespace {

// Below this many elements the omp forms are not worth the fork/join.
constexpr size_t kParallelCutoff = 256;

void linearizeOne(const EdgeWorkspace& ws, size_t i, LinearizedEdge& out) {
  const bool prior = ws.is_prior[i] != 0;
  const Vector6d r = edgeResidual(ws.from[i], ws.to[i], ws.meas_inv[i], prior);
  const Twist r_twist(r);
  Matrix6d J;
  if (prior) {
    J = leftJacobianInverse(r_twist) * adjoint(ws.meas_inv[i]);
  } else {
    J = rightJacobianInverse(r_twist) * adjoint(inverse(ws.to[i]));
  }
  const double s = r.dot(ws.omega[i] * r);
  double w = 1.0;
  double cost = s;
  const double delta = ws.huber[i];
  if (delta > 0.0 && s > delta * delta) {
    const double sq = std::sqrt(s);
    w = delta / sq;
    cost = 2.0 * delta * sq - delta * delta;
  }
  const Matrix6d wOmega = w * ws.omega[i];
  out.residual = r;
  out.jacobian = J;
  out.weighted_hessian = J.transpose() * wOmega * J;
  out.weighted_gradient = J.transpose() * (wOmega * r);
  out.cost = cost;
  out.weight = w;
}

double chiOne(const EdgeWorkspace& ws, size_t i) {
  const Vector6d r = edgeResidual(ws.from[i], ws.to[i], ws.meas_inv[i], ws.is_prior[i] != 0);
  const double s = r.dot(ws.omega[i] * r);
  const double delta = ws.huber[i];
  if (delta > 0.0 && s > delta * delta) {
    return 2.0 * delta * std::sqrt(s) - delta * delta;
  }
  return s;
}

}  // namespace

void EdgeWorkspace::clear() {
  from.clear();
  to.clear();
  meas_inv.clear();
  omega.clear();
  is_prior.clear();
  huber.clear();
}

void EdgeWorkspace::reserve(size_t n) {
  from.reserve(n);
  to.reserve(n);
  meas_inv.reserve(n);
  omega.reserve(n);
  is_prior.reserve(n);
  huber.reserve(n);
}

Vector6d edgeResidual(const Pose& from, const Pose& to, const Pose& meas_inv, bool is_prior) {
  if (is_prior) {
    return log(compose(meas_inv, from)).vector();
  }
  return log(compose(meas_inv, compose(inverse(from), to))).vector();
}

namespace serial {

void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out) {
  out.resize(ws.size());
  for (size_t i = 0; i < ws.size(); ++i) linearizeOne(ws, i, out[i]);
}

double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch) {
  scratch.resize(ws.size());
  for (size_t i = 0; i < ws.size(); ++i) scratch[i] = chiOne(ws, i);
  double sum = 0.0;
  for (double c : scratch) sum += c;
  return sum;
}

}  // namespace serial

namespace omp {

void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out) {
  out.resize(ws.size());
  const long n = static_cast<long>(ws.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) linearizeOne(ws, static_cast<size_t>(i), out[static_cast<size_t>(i)]);
}

double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch) {
  scratch.resize(ws.size());
  const long n = static_cast<long>(ws.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) scratch[static_cast<size_t>(i)] = chiOne(ws, static_cast<size_t>(i));
  // Ordered fold keeps the sum independent of the thread count.
  double sum = 0.0;
  for (double c : scratch) sum += c;
  return sum;
}

}  // namespace omp

void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out) {
#ifdef _OPENMP
  if (ws.size() >= kParallelCutoff) {
    omp::linearize(ws, out);
    return;
  }
#endif
  serial::linearize(ws, out);
}

double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch) {
#ifdef _OPENMP
  if (ws.size() >= kParallelCutoff) return omp::chiSquared(ws, scratch);
#endif
  return serial::chiSquared(ws, scratch);
}

namespace serial {

void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y) {
  y.resize(static_cast<size_t>(m.n));
  for (int row = 0; row < m.n; ++row) {
    double acc = 0.0;
    for (int k = m.row_ptr[static_cast<size_t>(row)]; k < m.row_ptr[static_cast<size_t>(row) + 1]; ++k) {
      acc += m.val[static_cast<size_t>(k)] * x[static_cast<size_t>(m.col[static_cast<size_t>(k)])];
    }
    y[static_cast<size_t>(row)] = acc;
  }
}

}  // namespace serial

namespace omp {

void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y) {
  y.resize(static_cast<size_t>(m.n));
#pragma omp parallel for schedule(static)
  for (int row = 0; row < m.n; ++row) {
    double acc = 0.0;
    for (int k = m.row_ptr[static_cast<size_t>(row)]; k < m.row_ptr[static_cast<size_t>(row) + 1]; ++k) {
      acc += m.val[static_cast<size_t>(k)] * x[static_cast<size_t>(m.col[static_cast<size_t>(k)])];
    }
    y[static_cast<size_t>(row)] = acc;
  }
}

}  // namespace omp

void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y) {
#ifdef _OPENMP
  if (m.n >= static_cast<int>(kParallelCutoff)) {
    omp::matvec(m, x, y);
    return;
  }
#endif
  serial::matvec(m, x, y);
}

}  // namespace mslam::kernels
