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
#include "mslam/optimizer.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mslam {

const char* terminationReasonName(TerminationReason r) {
  switch (r) {
    case TerminationReason::kConverged: return "CONVERGED";
    case TerminationReason::kMaxIterations: return "MAX_ITERS";
    case TerminationReason::kGaugeFailure: return "GAUGE_FAILURE";
  }
  return "?";
}

Twist residual(const Edge& e, const std::unordered_map<VertexId, Pose, VertexIdHash>& poses) {
  const Pose meas_inv = inverse(e.measurement);
  if (e.kind == EdgeKind::kPrior) {
    return Twist(kernels::edgeResidual(poses.at(e.from), Pose(), meas_inv, true));
  }
  return Twist(kernels::edgeResidual(poses.at(e.from), poses.at(e.to), meas_inv, false));
}

namespace {

struct ProblemView {
  std::vector<Edge> edges;                 // included edges, graph order then extra priors
  std::vector<VertexId> free_order;        // sorted
  std::unordered_map<VertexId, int, VertexIdHash> slot;  // free vertex -> block index
  std::unordered_map<VertexId, Pose, VertexIdHash> poses;
};

double huberDelta(const OptimizationProblem& p, EdgeKind kind) {
  auto it = p.kernels.find(kind);
  if (it == p.kernels.end() || it->second.kind == RobustKernel::kNone) return 0.0;
  return it->second.delta;
}

ProblemView makeView(const OptimizationProblem& p) {
  ProblemView view;
  auto inProblem = [&](VertexId id) { return p.free.count(id) || p.fixed.count(id); };
  for (const Edge& e : p.graph->edges()) {
    if (!inProblem(e.from) || !inProblem(e.to)) continue;
    const bool from_free = p.free.count(e.from) > 0;
    const bool to_free = p.free.count(e.to) > 0;
    if (!from_free && !to_free) continue;  // constant term, excluded
    view.edges.push_back(e);
  }
  for (const Edge& e : p.extra_priors) {
    if (p.free.count(e.from)) view.edges.push_back(e);
  }
  view.free_order.assign(p.free.begin(), p.free.end());
  for (size_t i = 0; i < view.free_order.size(); ++i) {
    view.slot[view.free_order[i]] = static_cast<int>(i);
  }
  for (const VertexId& id : p.free) view.poses[id] = p.graph->vertex(id).pose;
  for (const VertexId& id : p.fixed) view.poses[id] = p.graph->vertex(id).pose;
  return view;
}

// Every connected component of the free set must be tied down by a fixed
// neighbor or a prior factor.
bool gaugeSatisfied(const OptimizationProblem& p, const ProblemView& view) {
  const size_t n = view.free_order.size();
  if (n == 0) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

  std::vector<bool> anchored(n, false);
  for (const Edge& e : view.edges) {
    const bool from_free = p.free.count(e.from) > 0;
    const bool to_free = p.free.count(e.to) > 0;
    if (e.kind == EdgeKind::kPrior) {
      if (from_free) anchored[static_cast<size_t>(view.slot.at(e.from))] = true;
      continue;
    }
    if (from_free && to_free) {
      unite(view.slot.at(e.from), view.slot.at(e.to));
    } else if (from_free) {
      anchored[static_cast<size_t>(view.slot.at(e.from))] = true;
    } else if (to_free) {
      anchored[static_cast<size_t>(view.slot.at(e.to))] = true;
    }
  }
  std::vector<bool> root_anchored(n, false);
  for (size_t i = 0; i < n; ++i) {
    if (anchored[i]) root_anchored[static_cast<size_t>(find(static_cast<int>(i)))] = true;
  }
  for (size_t i = 0; i < n; ++i) {
    if (!root_anchored[static_cast<size_t>(find(static_cast<int>(i)))]) return false;
  }
  return true;
}

void gatherWorkspace(const OptimizationProblem& p, const ProblemView& view,
                     const std::unordered_map<VertexId, Pose, VertexIdHash>& poses,
                     kernels::EdgeWorkspace& ws) {
  ws.clear();
  ws.reserve(view.edges.size());
  for (const Edge& e : view.edges) {
    const bool prior = e.kind == EdgeKind::kPrior;
    ws.from.push_back(poses.at(e.from));
    ws.to.push_back(prior ? Pose() : poses.at(e.to));
    ws.meas_inv.push_back(inverse(e.measurement));
    ws.omega.push_back(e.information);
    ws.is_prior.push_back(prior ? 1 : 0);
    ws.huber.push_back(huberDelta(p, e.kind));
  }
}

}  // namespace

double chiSquared(const OptimizationProblem& problem) {
  const ProblemView view = makeView(problem);
  kernels::EdgeWorkspace ws;
  gatherWorkspace(problem, view, view.poses, ws);
  std::vector<double> scratch;
  return kernels::chiSquared(ws, scratch);
}

OptimizationResult optimize(const OptimizationProblem& problem) {
  ProblemView view = makeView(problem);
  OptimizationResult result;

  kernels::EdgeWorkspace ws;
  std::vector<double> scratch;
  gatherWorkspace(problem, view, view.poses, ws);
  result.initial_chi2 = kernels::chiSquared(ws, scratch);
  result.final_chi2 = result.initial_chi2;

  if (view.free_order.empty()) {
    result.termination = TerminationReason::kConverged;
    return result;
  }
  if (!gaugeSatisfied(problem, view)) {
    result.termination = TerminationReason::kGaugeFailure;
    return result;
  }

  const int dof = 6 * static_cast<int>(view.free_order.size());
  std::vector<kernels::LinearizedEdge> lin;
  double lambda = problem.lm.initial_lambda;
  double chi2 = result.initial_chi2;
  TerminationReason reason = TerminationReason::kMaxIterations;
  int iter = 0;

  for (; iter < problem.convergence.max_iterations; ++iter) {
    gatherWorkspace(problem, view, view.poses, ws);
    kernels::linearize(ws, lin);

    // Serial scatter in fixed edge order: reproducible for any thread count.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(lin.size() * 144 + static_cast<size_t>(dof));
    double current = 0.0;
    for (size_t k = 0; k < view.edges.size(); ++k) {
      const Edge& e = view.edges[k];
      const kernels::LinearizedEdge& le = lin[k];
      current += le.cost;
      const bool prior = e.kind == EdgeKind::kPrior;
      const int sf = problem.free.count(e.from) ? view.slot.at(e.from) : -1;
      const int st = (!prior && problem.free.count(e.to)) ? view.slot.at(e.to) : -1;
      auto addBlock = [&](int bi, int bj, const Matrix6d& blk) {
        for (int r = 0; r < 6; ++r) {
          for (int c = 0; c < 6; ++c) {
            trips.emplace_back(6 * bi + r, 6 * bj + c, blk(r, c));
          }
        }
      };
      if (prior) {
        if (sf >= 0) {
          addBlock(sf, sf, le.weighted_hessian);
          g.segment<6>(6 * sf) += le.weighted_gradient;
        }
        continue;
      }
      // jacobian is w.r.t. `to`; the `from` block is its negation.
      if (st >= 0) {
        addBlock(st, st, le.weighted_hessian);
        g.segment<6>(6 * st) += le.weighted_gradient;
      }
      if (sf >= 0) {
        addBlock(sf, sf, le.weighted_hessian);
        g.segment<6>(6 * sf) -= le.weighted_gradient;
      }
      if (sf >= 0 && st >= 0) {
        const Matrix6d cross = -le.weighted_hessian;
        addBlock(sf, st, cross);
        addBlock(st, sf, cross.transpose());
      }
    }
    chi2 = current;

    bool accepted = false;
    double step_norm = 0.0;
    double trial_chi2 = chi2;
    std::unordered_map<VertexId, Pose, VertexIdHash> trial;
    while (!accepted) {
      std::vector<Eigen::Triplet<double>> damped = trips;
      for (int i = 0; i < dof; ++i) damped.emplace_back(i, i, lambda);
      Eigen::SparseMatrix<double> H(dof, dof);
      H.setFromTriplets(damped.begin(), damped.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
      if (solver.info() != Eigen::Success) {
        result.final_chi2 = chi2;
        result.iterations = iter;
        result.termination = TerminationReason::kGaugeFailure;
        for (const VertexId& id : view.free_order) result.poses[id] = view.poses.at(id);
        return result;
      }
      const Eigen::VectorXd delta = solver.solve(-g);
      if (!delta.allFinite()) {
        result.final_chi2 = chi2;
        result.iterations = iter;
        result.termination = TerminationReason::kGaugeFailure;
        for (const VertexId& id : view.free_order) result.poses[id] = view.poses.at(id);
        return result;
      }
      step_norm = delta.norm();

      trial = view.poses;
      for (size_t i = 0; i < view.free_order.size(); ++i) {
        const Twist xi(delta.segment<6>(6 * static_cast<int>(i)));
        trial[view.free_order[i]] = compose(exp(xi), view.poses.at(view.free_order[i]));
      }
      gatherWorkspace(problem, view, trial, ws);
      trial_chi2 = kernels::chiSquared(ws, scratch);
      if (trial_chi2 <= chi2) {
        accepted = true;
        lambda = std::max(lambda * problem.lm.lambda_down, problem.lm.lambda_floor);
      } else {
        lambda *= problem.lm.lambda_up;
        if (lambda > 1e18) break;  // cannot improve further
      }
    }
    if (!accepted) {
      reason = TerminationReason::kConverged;  // stuck at a (numerical) minimum
      ++iter;
      break;
    }
    const double improvement = chi2 - trial_chi2;
    view.poses = trial;
    chi2 = trial_chi2;
    if (improvement <= problem.convergence.relative_cost_tol * std::max(chi2, 1e-300) ||
        step_norm <= problem.convergence.update_norm_tol) {
      reason = TerminationReason::kConverged;
      ++iter;
      break;
    }
  }

  result.final_chi2 = chi2;
  result.iterations = iter;
  result.termination = reason;
  for (const VertexId& id : view.free_order) result.poses[id] = view.poses.at(id);
  return result;
}

std::vector<VertexId> unanchoredComponents(const OptimizationProblem& problem) {
  const ProblemView view = makeView(problem);
  const size_t n = view.free_order.size();
  if (n == 0) return {};
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  std::vector<bool> anchored(n, false);
  for (const Edge& e : view.edges) {
    const bool from_free = problem.free.count(e.from) > 0;
    const bool to_free = problem.free.count(e.to) > 0;
    if (e.kind == EdgeKind::kPrior) {
      if (from_free) anchored[static_cast<size_t>(view.slot.at(e.from))] = true;
      continue;
    }
    if (from_free && to_free) {
      parent[static_cast<size_t>(find(view.slot.at(e.from)))] = find(view.slot.at(e.to));
    } else if (from_free) {
      anchored[static_cast<size_t>(view.slot.at(e.from))] = true;
    } else if (to_free) {
      anchored[static_cast<size_t>(view.slot.at(e.to))] = true;
    }
  }
  std::vector<bool> root_anchored(n, false);
  for (size_t i = 0; i < n; ++i) {
    if (anchored[i]) root_anchored[static_cast<size_t>(find(static_cast<int>(i)))] = true;
  }
  std::vector<VertexId> reps;
  std::set<int> seen;
  for (size_t i = 0; i < n; ++i) {  // free_order is sorted, so the first hit is the lowest id
    const int root = find(static_cast<int>(i));
    if (root_anchored[static_cast<size_t>(root)]) continue;
    if (seen.insert(root).second) reps.push_back(view.free_order[i]);
  }
  return reps;
}

double jacobianCheck(const OptimizationProblem& problem, double epsilon) {
  const ProblemView view = makeView(problem);
  double max_rel = 0.0;
  for (const Edge& e : view.edges) {
    const bool prior = e.kind == EdgeKind::kPrior;
    const Pose meas_inv = inverse(e.measurement);
    const Pose from = view.poses.at(e.from);
    const Pose to = prior ? Pose() : view.poses.at(e.to);

    const Twist r0(kernels::edgeResidual(from, to, meas_inv, prior));
    Matrix6d J_to_analytic, J_from_analytic;
    if (prior) {
      J_from_analytic = leftJacobianInverse(r0) * adjoint(meas_inv);
    } else {
      J_to_analytic = rightJacobianInverse(r0) * adjoint(inverse(to));
      J_from_analytic = -J_to_analytic;
    }

    auto fdBlock = [&](bool wrt_from) {
      Matrix6d J;
      for (int k = 0; k < 6; ++k) {
        Vector6d step = Vector6d::Zero();
        step(k) = epsilon;
        const Pose plus = compose(exp(Twist(step)), wrt_from ? from : to);
        step(k) = -epsilon;
        const Pose minus = compose(exp(Twist(step)), wrt_from ? from : to);
        const Vector6d rp = kernels::edgeResidual(wrt_from ? plus : from, wrt_from ? to : plus,
                                                  meas_inv, prior);
        const Vector6d rm = kernels::edgeResidual(wrt_from ? minus : from, wrt_from ? to : minus,
                                                  meas_inv, prior);
        J.col(k) = (rp - rm) / (2.0 * epsilon);
      }
      return J;
    };

    auto relError = [](const Matrix6d& fd, const Matrix6d& an) {
      const double denom = std::max(1.0, an.cwiseAbs().maxCoeff());
      return (fd - an).cwiseAbs().maxCoeff() / denom;
    };

    max_rel = std::max(max_rel, relError(fdBlock(true), J_from_analytic));
    if (!prior) max_rel = std::max(max_rel, relError(fdBlock(false), J_to_analytic));
  }
  return max_rel;
}

}  // namespace mslam
