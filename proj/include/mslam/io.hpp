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
#include <string>
#include <vector>

#include "mslam/graph.hpp"
#include "mslam/pipeline.hpp"
#include "mslam/simulator.hpp"

namespace mslam::io {

/// Sidecar metadata for the flat-id exchange format: session table,
/// vertex -> session map, edge kinds, config echo and seed.
struct Manifest {
  std::map<int, std::string> session_labels;
  std::vector<VertexId> vertex_ids;                  // by flat id
  std::vector<EdgeKind> edge_kinds;                  // by edge index
  std::vector<VertexRole> vertex_roles;              // by flat id
  std::vector<std::optional<Pose>> vertex_truths;    // by flat id, evaluation-only
  std::map<std::string, std::string> config_echo;
  uint64_t seed = 0;
};

struct ParseResult {
  PoseGraph graph;
  int warnings = 0;  // skipped unknown record types
};

/// `VERTEX_SE3:QUAT id x y z qx qy qz qw` and
/// `EDGE_SE3:QUAT id1 id2 x y z qx qy qz qw i11 ... i66` (21 upper-triangular
/// information entries, row-major). Values are written with 6 decimals.
std::string serializeGraph(const PoseGraph& g);
ParseResult parseGraph(const std::string& text);

std::string serializeManifest(const PoseGraph& g, const Manifest& extra);
Manifest parseManifest(const std::string& text);

/// Applies manifest ids/kinds/roles to a freshly parsed flat graph.
PoseGraph applyManifest(const PoseGraph& flat, const Manifest& manifest);

Manifest manifestFor(const PoseGraph& g);

/// Metric-trace CSV; wall time is zeroed in determinism mode so outputs
/// stay byte-identical.
std::string serializeMetrics(const std::vector<MetricsRow>& rows, bool deterministic);

/// TUM-style trajectory rows: t x y z qx qy qz qw.
std::string serializeTrajectory(const std::vector<TrajectoryEntry>& entries, bool truth);
std::vector<std::pair<double, Pose>> parseTrajectory(const std::string& text);

/// Session stream files emitted by `simulate` and consumed by `run`.
std::string serializeStream(const SessionStream& stream);
SessionStream parseStream(const std::string& text);

/// Flat `key = value` configuration text.
std::map<std::string, std::string> parseConfig(const std::string& text);
std::string serializeConfig(const std::map<std::string, std::string>& kv);

/// Rigid SE(3) least-squares alignment on positions (no scale), then RMSE
/// of the aligned position residuals.
double evaluateAte(const std::vector<Pose>& estimate, const std::vector<Pose>& truth);

std::string readFile(const std::string& path);
void writeFile(const std::string& path, const std::string& content);

}  // namespace mslam::io
