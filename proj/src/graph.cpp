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
#include "mslam/graph.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <deque>

namespace mslam {

const char* errorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingEndpoint: return "MissingEndpoint";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kKindViolation: return "KindViolation";
    case ErrorCode::kNonSpdInformation: return "NonSpdInformation";
    case ErrorCode::kEmptyVertexSet: return "EmptyVertexSet";
    case ErrorCode::kTooFewVertices: return "TooFewVertices";
    case ErrorCode::kDisconnected: return "Disconnected";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kInvalidRoute: return "InvalidRoute";
    case ErrorCode::kUnknownScenario: return "UnknownScenario";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDegenerateAlignment: return "DegenerateAlignment";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

const char* vertexRoleName(VertexRole role) {
  switch (role) {
    case VertexRole::kActive: return "ACTIVE";
    case VertexRole::kRetained: return "RETAINED";
    case VertexRole::kReference: return "REFERENCE";
  }
  return "?";
}

const char* edgeKindName(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kIntra: return "INTRA";
    case EdgeKind::kInter: return "INTER";
    case EdgeKind::kLoop: return "LOOP";
    case EdgeKind::kPrior: return "PRIOR";
  }
  return "?";
}

bool isSpdInformation(const Matrix6d& omega) {
  if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(omega, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0) > 0.0;
}

VertexId PoseGraph::addVertex(const Vertex& v) {
  if (index_.count(v.id)) {
    throw Error(ErrorCode::kDuplicateId, "vertex (" + std::to_string(v.id.session) + "," +
                                             std::to_string(v.id.index) + ") already present");
  }
  index_[v.id] = vertices_.size();
  vertices_.push_back(v);
  adjacency_[v.id];  // ensure entry
  return v.id;
}

void PoseGraph::checkEdge(const Edge& e) const {
  if (!hasVertex(e.from) || !hasVertex(e.to)) {
    throw Error(ErrorCode::kMissingEndpoint, "edge endpoint not in graph");
  }
  if (!isSpdInformation(e.information)) {
    throw Error(ErrorCode::kNonSpdInformation, "information matrix not symmetric positive-definite");
  }
  const Vertex& vf = vertex(e.from);
  const Vertex& vt = vertex(e.to);
  switch (e.kind) {
    case EdgeKind::kIntra:
      if (e.from.session != e.to.session || e.to.index != e.from.index + 1) {
        throw Error(ErrorCode::kKindViolation, "INTRA edge must connect consecutive vertices of one session");
      }
      break;
    case EdgeKind::kInter:
      // Created by an active/retained query against the reference; after a
      // merge both endpoints may be REFERENCE (the edge is retained as a
      // reference-internal constraint).
      if (vt.role != VertexRole::kReference || e.from == e.to) {
        throw Error(ErrorCode::kKindViolation, "INTER edge must target a REFERENCE vertex");
      }
      break;
    case EdgeKind::kLoop:
      if (e.from == e.to) {
        throw Error(ErrorCode::kKindViolation, "LOOP edge endpoints must differ");
      }
      if (vf.role != VertexRole::kReference || vt.role != VertexRole::kReference) {
        throw Error(ErrorCode::kKindViolation, "LOOP edge must connect two REFERENCE vertices");
      }
      break;
    case EdgeKind::kPrior:
      if (e.from != e.to) {
        throw Error(ErrorCode::kKindViolation, "PRIOR edge must be unary (from == to)");
      }
      break;
  }
}

EdgeId PoseGraph::addEdge(const Edge& e) {
  checkEdge(e);
  const EdgeId id = edges_.size();
  edges_.push_back(e);
  adjacency_[e.from].push_back(id);
  if (e.to != e.from) adjacency_[e.to].push_back(id);
  return id;
}

const Vertex& PoseGraph::vertex(VertexId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownId, "no such vertex");
  return vertices_[it->second];
}

Vertex& PoseGraph::vertex(VertexId id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownId, "no such vertex");
  return vertices_[it->second];
}

const std::vector<EdgeId>& PoseGraph::incidentEdges(VertexId id) const {
  auto it = adjacency_.find(id);
  if (it == adjacency_.end()) throw Error(ErrorCode::kUnknownId, "no such vertex");
  return it->second;
}

void PoseGraph::removeVertex(VertexId id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownId, "no such vertex");
  vertices_.erase(vertices_.begin() + static_cast<long>(it->second));
  // Edge ids are compacted; any previously held EdgeId is invalidated.
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  for (const Edge& e : edges_) {
    if (e.from != id && e.to != id) kept.push_back(e);
  }
  edges_ = std::move(kept);
  index_.clear();
  for (size_t i = 0; i < vertices_.size(); ++i) index_[vertices_[i].id] = i;
  adjacency_ = adjacencyFromScratch();
}

PoseGraph PoseGraph::subgraph(const std::set<VertexId>& ids) const {
  PoseGraph out;
  for (const VertexId& id : ids) {
    if (!hasVertex(id)) throw Error(ErrorCode::kUnknownId, "subgraph id not in graph");
  }
  for (const Vertex& v : vertices_) {
    if (ids.count(v.id)) out.addVertex(v);
  }
  for (const Edge& e : edges_) {
    if (ids.count(e.from) && ids.count(e.to)) out.addEdge(e);
  }
  return out;
}

std::optional<int> PoseGraph::graphDistance(VertexId a, VertexId b) const {
  if (!hasVertex(a) || !hasVertex(b)) throw Error(ErrorCode::kUnknownId, "no such vertex");
  if (a == b) return 0;
  std::unordered_map<VertexId, int, VertexIdHash> dist;
  dist[a] = 0;
  std::deque<VertexId> queue{a};
  while (!queue.empty()) {
    const VertexId cur = queue.front();
    queue.pop_front();
    const int d = dist[cur];
    for (EdgeId eid : adjacency_.at(cur)) {
      const Edge& e = edges_[eid];
      const VertexId next = (e.from == cur) ? e.to : e.from;
      if (next == cur) continue;  // PRIOR
      if (dist.count(next)) continue;
      if (next == b) return d + 1;
      dist[next] = d + 1;
      queue.push_back(next);
    }
  }
  return std::nullopt;
}

std::vector<VertexId> PoseGraph::sortedIds() const {
  std::vector<VertexId> ids;
  ids.reserve(vertices_.size());
  for (const Vertex& v : vertices_) ids.push_back(v.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::unordered_map<VertexId, std::vector<EdgeId>, VertexIdHash> PoseGraph::adjacencyFromScratch() const {
  std::unordered_map<VertexId, std::vector<EdgeId>, VertexIdHash> adj;
  for (const Vertex& v : vertices_) adj[v.id];
  for (EdgeId i = 0; i < edges_.size(); ++i) {
    adj[edges_[i].from].push_back(i);
    if (edges_[i].to != edges_[i].from) adj[edges_[i].to].push_back(i);
  }
  return adj;
}

}  // namespace mslam
