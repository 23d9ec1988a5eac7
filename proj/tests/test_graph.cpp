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
#include <doctest.h>

#include <algorithm>
#include <random>

#include "mslam/graph.hpp"

using namespace mslam;

namespace {

Vertex makeVertex(int session, int index, VertexRole role = VertexRole::kActive) {
  Vertex v;
  v.id = {session, index};
  v.role = role;
  return v;
}

Edge makeEdge(VertexId from, VertexId to, EdgeKind kind) {
  Edge e;
  e.from = from;
  e.to = to;
  e.kind = kind;
  return e;
}

PoseGraph chain(int n, VertexRole role = VertexRole::kActive) {
  PoseGraph g;
  for (int i = 0; i < n; ++i) g.addVertex(makeVertex(0, i, role));
  for (int i = 0; i + 1 < n; ++i) g.addEdge(makeEdge({0, i}, {0, i + 1}, EdgeKind::kIntra));
  return g;
}

}  // namespace

TEST_CASE("add vertex basics") {
  PoseGraph g;
  g.addVertex(makeVertex(0, 0));
  CHECK(g.vertexCount() == 1);
  CHECK(g.edgeCount() == 0);
  CHECK_THROWS_AS(g.addVertex(makeVertex(0, 0)), Error);
  for (int i = 1; i < 100; ++i) g.addVertex(makeVertex(0, i));
  CHECK(g.vertexCount() == 100);
  for (const Vertex& v : g.vertices()) CHECK(g.incidentEdges(v.id).empty());
}

TEST_CASE("edge kind rules") {
  PoseGraph g;
  for (int i = 0; i < 6; ++i) g.addVertex(makeVertex(0, i));
  g.addVertex(makeVertex(1, 0, VertexRole::kReference));
  g.addVertex(makeVertex(1, 1, VertexRole::kReference));

  CHECK_NOTHROW(g.addEdge(makeEdge({0, 3}, {0, 4}, EdgeKind::kIntra)));
  CHECK_THROWS_AS(g.addEdge(makeEdge({0, 3}, {0, 5}, EdgeKind::kIntra)), Error);  // j != i+1
  CHECK_THROWS_AS(g.addEdge(makeEdge({1, 0}, {1, 0}, EdgeKind::kLoop)), Error);   // r == s
  CHECK_NOTHROW(g.addEdge(makeEdge({1, 0}, {1, 1}, EdgeKind::kLoop)));
  CHECK_NOTHROW(g.addEdge(makeEdge({0, 0}, {1, 0}, EdgeKind::kInter)));
  CHECK_THROWS_AS(g.addEdge(makeEdge({1, 0}, {0, 0}, EdgeKind::kInter)), Error);  // target not REFERENCE
  CHECK_NOTHROW(g.addEdge(makeEdge({1, 0}, {1, 1}, EdgeKind::kInter)));  // merged, reference-internal
  CHECK_THROWS_AS(g.addEdge(makeEdge({0, 0}, {0, 1}, EdgeKind::kPrior)), Error);  // not unary
  CHECK_NOTHROW(g.addEdge(makeEdge({0, 0}, {0, 0}, EdgeKind::kPrior)));

  Edge bad = makeEdge({0, 0}, {0, 1}, EdgeKind::kIntra);
  bad.information = -Matrix6d::Identity();
  CHECK_THROWS_AS(g.addEdge(bad), Error);

  Edge missing = makeEdge({0, 0}, {9, 9}, EdgeKind::kIntra);
  CHECK_THROWS_AS(g.addEdge(missing), Error);
}

TEST_CASE("graph distance") {
  PoseGraph g = chain(5);
  CHECK(g.graphDistance({0, 0}, {0, 0}) == 0);
  CHECK(g.graphDistance({0, 0}, {0, 4}) == 4);
  g.addVertex(makeVertex(2, 0));
  CHECK(!g.graphDistance({0, 0}, {2, 0}).has_value());
  CHECK_THROWS_AS(g.graphDistance({0, 0}, {7, 7}), Error);
}

TEST_CASE("subgraph") {
  PoseGraph g = chain(4);
  g.addEdge(makeEdge({0, 1}, {0, 1}, EdgeKind::kPrior));

  std::set<VertexId> all;
  for (const Vertex& v : g.vertices()) all.insert(v.id);
  const PoseGraph full = g.subgraph(all);
  CHECK(full.vertexCount() == g.vertexCount());
  CHECK(full.edgeCount() == g.edgeCount());

  CHECK(g.subgraph({}).vertexCount() == 0);

  // One endpoint of each INTRA edge: no binary edges survive; the PRIOR on
  // (0,1) does.
  const PoseGraph odd = g.subgraph({{0, 1}, {0, 3}});
  CHECK(odd.vertexCount() == 2);
  CHECK(odd.edgeCount() == 1);
  CHECK(odd.edges()[0].kind == EdgeKind::kPrior);

  CHECK_THROWS_AS(g.subgraph({{5, 5}}), Error);

  // Idempotence.
  const std::set<VertexId> some{{0, 0}, {0, 1}, {0, 2}};
  const PoseGraph once = g.subgraph(some);
  const PoseGraph twice = once.subgraph(some);
  CHECK(once.vertexCount() == twice.vertexCount());
  CHECK(once.edgeCount() == twice.edgeCount());
}

TEST_CASE("incremental adjacency equals recomputed adjacency after mutations") {
  std::mt19937_64 rng(23);
  PoseGraph g;
  int next = 0;
  for (int step = 0; step < 300; ++step) {
    const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (roll < 0.45 || next == 0) {
      g.addVertex(makeVertex(0, next++));
    } else if (roll < 0.8 && next >= 2) {
      const int i = std::uniform_int_distribution<int>(0, next - 2)(rng);
      if (g.hasVertex({0, i}) && g.hasVertex({0, i + 1})) {
        bool exists = false;
        for (EdgeId eid : g.incidentEdges({0, i})) {
          const Edge& e = g.edge(eid);
          if (e.kind == EdgeKind::kIntra && e.to == VertexId{0, i + 1}) exists = true;
        }
        if (!exists) g.addEdge(makeEdge({0, i}, {0, i + 1}, EdgeKind::kIntra));
      }
    } else if (next >= 1) {
      const int i = std::uniform_int_distribution<int>(0, next - 1)(rng);
      if (g.hasVertex({0, i})) g.removeVertex({0, i});
    }
    const auto scratch = g.adjacencyFromScratch();
    for (const Vertex& v : g.vertices()) {
      auto a = g.incidentEdges(v.id);
      auto b = scratch.at(v.id);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      REQUIRE(a == b);
    }
  }
}
