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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mslam/errors.hpp"
#include "mslam/geometry.hpp"

namespace mslam {

/// Deterministic generator: splitmix64 state with a Box-Muller gaussian.
/// Pinned here so streams do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t next();
  double uniform();   // [0, 1)
  double gaussian();  // standard normal

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Waypoint {
  std::string name;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct World {
  std::vector<Waypoint> waypoints;
  std::vector<std::pair<int, int>> links;  // traversable, undirected
  double visibility_radius = 8.0;       // keyframe-to-map matching range, meters
  double pair_visibility_radius = 12.0;  // submap-to-submap (loop closure) range
  uint64_t seed = 1;

  int waypointIndex(const std::string& name) const;  // -1 when absent
};

/// Which matcher responses the wild-transform injection applies to:
/// loop-closure pair matching only (default) or every response.
enum class OutlierScope { kLoopOnly, kAll };

struct NoiseModel {
  Vector6d odom_sigma = (Vector6d() << 0.02, 0.02, 0.02, 0.002, 0.002, 0.002).finished();
  Vector6d match_sigma = (Vector6d() << 0.05, 0.05, 0.05, 0.005, 0.005, 0.005).finished();
  double match_dropout = 0.1;
  double outlier_rate = 0.0;
  OutlierScope outlier_scope = OutlierScope::kLoopOnly;

  Matrix6d odomInformation() const;
  Matrix6d matchInformation() const;
};

struct SessionSpec {
  std::vector<std::string> route;  // waypoint names, consecutive ones linked
  double spacing = 1.0;            // keyframe spacing, meters
  std::string label;
};

struct ScenarioScript {
  std::vector<SessionSpec> sessions;
};

struct KeyframeEvent {
  int session = 0;
  double timestamp = 0.0;
  Pose odometry;  // relative transform from the previous keyframe
  Matrix6d odom_information = Matrix6d::Identity();
  std::optional<Pose> truth;
};

struct SessionStream {
  int session = 0;
  std::string label;
  Pose start;  // coarse known start pose (truth of the first keyframe)
  std::vector<KeyframeEvent> events;
};

/// Ground-truth keyframe poses along the route at the given spacing,
/// yaw following the segment heading.
std::vector<Pose> routePoses(const World& world, const SessionSpec& spec);

/// Keyframe stream with odometry = truth-relative transform composed with
/// exp(noise); deterministic in (world.seed, session id, route).
SessionStream generateSession(const World& world, const NoiseModel& noise, const SessionSpec& spec,
                              int session_id);

/// Simulated submap matching. Succeeds only within the applicable
/// visibility radius of the TRUE poses; estimation error plays no role
/// here. `pair_mode` selects the submap-to-submap path: the wider pair
/// visibility radius and, with the default outlier scope, the wild-transform
/// injection.
std::optional<std::pair<Pose, Matrix6d>> oracleMatch(const World& world, const NoiseModel& noise,
                                                     const Pose& query_truth,
                                                     const Pose& target_truth, Rng& rng,
                                                     bool pair_mode);

struct Scenario {
  World world;
  ScenarioScript script;
};

/// Canned deterministic scenarios: "three_stage", "overlap_pair",
/// "loop_enforcer", "full_overlap".
Scenario buildScenario(const std::string& name, uint64_t seed);

std::vector<std::string> scenarioNames();

}  // namespace mslam
