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

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "mslam/errors.hpp"
#include "mslam/geometry.hpp"

namespace mslam {

/// Vertex identity: (session, index within session). Ordering is
/// lexicographic, so merges never renumber and exports are stable.
struct VertexId {
  int32_t session = 0;
  int32_t index = 0;

  auto operator<=>(const VertexId&) const = default;
};

struct VertexIdHash {
  size_t operator()(const VertexId& id) const {
    return std::hash<uint64_t>()((uint64_t(uint32_t(id.session)) << 32) | uint32_t(id.index));
  }
};

enum class VertexRole { kActive, kRetained, kReference };

enum class EdgeKind { kIntra, kInter, kLoop, kPrior };

const char* vertexRoleName(VertexRole role);
const char* edgeKindName(EdgeKind kind);

struct Vertex {
  VertexId id;
  Pose pose;                   // current estimate
  double timestamp = 0.0;      // seconds, monotone within a session
  VertexRole role = VertexRole::kActive;
  std::optional<Pose> truth;   // simulator ground truth; evaluation only
};

/// Relative-pose constraint with information matrix Omega = Sigma^-1 in
/// [rho; phi] coordinates. PRIOR edges are unary (from == to) and carry an
/// absolute measurement.
struct Edge {
  VertexId from;
  VertexId to;
  EdgeKind kind = EdgeKind::kIntra;
  Pose measurement;            // from -> to for binary edges
  Matrix6d information = Matrix6d::Identity();
};

/// Checks symmetry to 1e-9 and lambda_min > 0.
bool isSpdInformation(const Matrix6d& omega);

using EdgeId = size_t;

class PoseGraph {
 public:
  VertexId addVertex(const Vertex& v);
  EdgeId addEdge(const Edge& e);

  bool hasVertex(VertexId id) const { return index_.count(id) > 0; }
  const Vertex& vertex(VertexId id) const;
  Vertex& vertex(VertexId id);

  size_t vertexCount() const { return vertices_.size(); }
  size_t edgeCount() const { return edges_.size(); }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId id) const { return edges_.at(id); }

  /// Edge ids incident to a vertex (PRIOR edges included once).
  const std::vector<EdgeId>& incidentEdges(VertexId id) const;

  /// Removes a vertex and every incident edge.
  void removeVertex(VertexId id);

  /// Induced subgraph: edges with both endpoints in ids; PRIOR edges kept
  /// when their vertex is in ids.
  PoseGraph subgraph(const std::set<VertexId>& ids) const;

  /// Unweighted BFS hop distance; nullopt when unreachable.
  std::optional<int> graphDistance(VertexId a, VertexId b) const;

  /// Vertex ids in sorted order.
  std::vector<VertexId> sortedIds() const;

  /// Rebuilds adjacency from the edge list (consistency oracle for tests).
  std::unordered_map<VertexId, std::vector<EdgeId>, VertexIdHash> adjacencyFromScratch() const;

 private:
  void checkEdge(const Edge& e) const;

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::unordered_map<VertexId, size_t, VertexIdHash> index_;
  std::unordered_map<VertexId, std::vector<EdgeId>, VertexIdHash> adjacency_;
};

}  // namespace mslam
