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

#include <map>
#include <set>
#include <unordered_map>

#include "mslam/graph.hpp"
#include "mslam/kernels.hpp"

namespace mslam {

enum class RobustKernel { kNone, kHuber };

struct KernelConfig {
  RobustKernel kind = RobustKernel::kNone;
  double delta = 1.0;  // Huber threshold in whitened units
};

struct ConvergenceConfig {
  int max_iterations = 50;
  double relative_cost_tol = 1e-8;
  double update_norm_tol = 1e-8;
};

struct LmConfig {
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double lambda_floor = 1e-12;
};

/// Batch nonlinear least-squares problem over a pose-graph snapshot.
/// Edges with both endpoints fixed contribute a constant and are excluded,
/// so a joint problem with the reference set fixed runs the exact same
/// floating-point schedule as the localization-mode problem.
struct OptimizationProblem {
  const PoseGraph* graph = nullptr;
  std::set<VertexId> free;
  std::set<VertexId> fixed;
  std::map<EdgeKind, KernelConfig> kernels = {
      {EdgeKind::kIntra, {RobustKernel::kNone, 1.0}},
      {EdgeKind::kInter, {RobustKernel::kNone, 1.0}},
      {EdgeKind::kLoop, {RobustKernel::kHuber, 1.0}},
      {EdgeKind::kPrior, {RobustKernel::kNone, 1.0}},
  };
  ConvergenceConfig convergence;
  LmConfig lm;

  /// Extra unary anchors applied at solve time without touching the graph
  /// (gauge repair; see Pipeline).
  std::vector<Edge> extra_priors;
};

enum class TerminationReason { kConverged, kMaxIterations, kGaugeFailure };

const char* terminationReasonName(TerminationReason r);

struct OptimizationResult {
  std::unordered_map<VertexId, Pose, VertexIdHash> poses;  // free vertices only
  double initial_chi2 = 0.0;
  double final_chi2 = 0.0;
  int iterations = 0;
  TerminationReason termination = TerminationReason::kConverged;
};

/// residual = log(Z^-1 T_from^-1 T_to) for binary edges,
/// log(Z^-1 T_from) for PRIOR edges.
Twist residual(const Edge& e, const std::unordered_map<VertexId, Pose, VertexIdHash>& poses);

/// Kernelized objective sum over the problem's included edges at the
/// snapshot poses.
double chiSquared(const OptimizationProblem& problem);

/// Levenberg-Marquardt with left-multiplicative twist perturbations,
/// pose <- exp(delta) * pose. Deterministic for a fixed problem.
OptimizationResult optimize(const OptimizationProblem& problem);

/// Max relative error between analytic and central finite-difference
/// Jacobians over every included edge.
double jacobianCheck(const OptimizationProblem& problem, double epsilon);

/// Lowest-id member of every free connected component that has no anchor
/// (no fixed neighbor and no prior factor). Empty when the gauge holds.
std::vector<VertexId> unanchoredComponents(const OptimizationProblem& problem);

}  // namespace mslam
