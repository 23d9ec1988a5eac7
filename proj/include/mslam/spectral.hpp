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

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "mslam/graph.hpp"
#include "mslam/kernels.hpp"

namespace mslam {

enum class Weighting { kUnit, kFimTrace, kFimMinEig };

const char* weightingName(Weighting w);

/// Scalar edge weight: 1, trace(Omega) or lambda_min(Omega). PRIOR edges
/// carry no inter-pose information and are excluded from Laplacians, so
/// asking for their weight is a kind violation.
double edgeWeight(const Edge& e, Weighting weighting);

/// Weighted graph Laplacian over an explicit vertex order.
class WeightedLaplacian {
 public:
  WeightedLaplacian(std::vector<VertexId> order, Weighting weighting);

  void addEdge(VertexId u, VertexId v, double w);

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<VertexId>& vertexOrder() const { return order_; }
  Weighting weighting() const { return weighting_; }

  double diagonal(int i) const { return diag_[static_cast<size_t>(i)]; }
  double trace() const;
  double maxDiagonal() const;

  Eigen::MatrixXd dense() const;
  kernels::CsrMatrix csr() const;

  int indexOf(VertexId id) const;  // -1 when absent

 private:
  std::vector<VertexId> order_;
  std::unordered_map<VertexId, int, VertexIdHash> index_;
  Weighting weighting_;
  std::vector<double> diag_;
  std::vector<std::pair<std::pair<int, int>, double>> offdiag_;  // accumulated entries
};

/// L = sum_e w_e (d_u - d_v)(d_u - d_v)^T over binary non-PRIOR edges of the
/// induced subgraph; parallel edges accumulate.
WeightedLaplacian buildLaplacian(const PoseGraph& g, const std::set<VertexId>& vertex_set,
                                 Weighting weighting);

/// (1/m) sum_{k>=2} lambda_k, computed as trace(L)/m.
double averageNodeDegree(const WeightedLaplacian& L);

/// Per-vertex weighted degree (diagonal of L), in vertex order.
std::vector<double> nodeDegrees(const WeightedLaplacian& L);

struct FiedlerResult {
  double lambda2 = 0.0;          // clamped to 0 below the connectivity epsilon
  Eigen::VectorXd vector;        // unit norm, orthogonal to ones
  bool connected = false;
};

/// Relative zero test for lambda2: the graph counts as connected when
/// lambda2 / max(diag) > kConnectivityEps.
inline constexpr double kConnectivityEps = 1e-8;

/// Vertex count at or below which the dense eigensolver is used; above it
/// lambda2 comes from shifted inverse iteration (tol 1e-10, 500 iterations).
inline constexpr int kDenseEigThreshold = 256;

FiedlerResult fiedler(const WeightedLaplacian& L);

/// Edges crossing the Fiedler-vector sign cut (spectral bisection).
std::vector<Edge> weakestEdges(const PoseGraph& g, const WeightedLaplacian& L);

/// exp(logdet(reduced L) / (m - 1)): geometric-mean-normalized weighted
/// spanning-tree count. First row/column (in vertex order) is deleted.
double spanningTreeMeasure(const WeightedLaplacian& L);

struct SpectralReport {
  int m = 0;
  double d_bar = 0.0;
  double lambda2_bar = 0.0;
  bool connected = false;
  std::optional<Eigen::VectorXd> fiedler_vector;      // absent when m < 2
  std::optional<double> spanning_tree_log;            // absent when disconnected
  std::vector<VertexId> vertex_order;
  std::vector<double> node_degrees;
};

SpectralReport spectralReport(const PoseGraph& g, const std::set<VertexId>& vertex_set,
                              Weighting weighting);

}  // namespace mslam
