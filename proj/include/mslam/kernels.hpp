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
#pragma once

#include <vector>

#include "mslam/geometry.hpp"

namespace mslam::kernels {

// Data-parallel inner loops of the solver and the spectral module.
// Each kernel exists in a `serial` reference form and an `omp` form. The
// parallel forms write one independent slot per element and fold partial
// results in a fixed order, so serial and omp outputs are bitwise identical
// for any thread count. Tests compare the two; the bench target times them.

/// Gathered edge data, structure-of-arrays. `meas_inv` is the precomputed
/// inverse of the measurement. `huber` is the Huber delta in whitened units,
/// 0 for a plain quadratic edge.
struct EdgeWorkspace {
  std::vector<Pose> from;
  std::vector<Pose> to;
  std::vector<Pose> meas_inv;
  std::vector<Matrix6d> omega;
  std::vector<uint8_t> is_prior;
  std::vector<double> huber;

  size_t size() const { return from.size(); }
  void clear();
  void reserve(size_t n);
};

/// Per-edge linearization output. For a binary edge `jacobian` is the block
/// w.r.t. the `to` vertex; the `from` block is its negation. For a PRIOR
/// edge it is the block w.r.t. the (single) vertex.
struct LinearizedEdge {
  Vector6d residual;
  Matrix6d jacobian;
  Matrix6d weighted_hessian;   // J^T (w Omega) J
  Vector6d weighted_gradient;  // J^T (w Omega) r
  double cost = 0.0;           // rho(r^T Omega r)
  double weight = 1.0;         // d rho / d s at s = r^T Omega r
};

/// Residual of one edge at the given poses (shared by both kernel forms
/// and by the finite-difference checker).
Vector6d edgeResidual(const Pose& from, const Pose& to, const Pose& meas_inv, bool is_prior);

namespace serial {
void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out);
double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch);
}  // namespace serial

namespace omp {
void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out);
double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch);
}  // namespace omp

/// Size-based dispatch to the omp kernels when OpenMP is available.
void linearize(const EdgeWorkspace& ws, std::vector<LinearizedEdge>& out);
double chiSquared(const EdgeWorkspace& ws, std::vector<double>& scratch);

/// Compressed sparse row symmetric matrix (full pattern stored).
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
};

namespace serial {
void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y);
}
namespace omp {
void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y);
}
void matvec(const CsrMatrix& m, const std::vector<double>& x, std::vector<double>& y);

}  // namespace mslam::kernels
