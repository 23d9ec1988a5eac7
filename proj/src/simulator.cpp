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
#include "mslam/simulator.hpp"

#include <cmath>
#include <numbers>

namespace mslam {

uint64_t Rng::next() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int World::waypointIndex(const std::string& name) const {
  for (size_t i = 0; i < waypoints.size(); ++i) {
    if (waypoints[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Matrix6d NoiseModel::odomInformation() const {
  Matrix6d omega = Matrix6d::Zero();
  for (int i = 0; i < 6; ++i) omega(i, i) = 1.0 / (odom_sigma(i) * odom_sigma(i));
  return omega;
}

Matrix6d NoiseModel::matchInformation() const {
  Matrix6d omega = Matrix6d::Zero();
  for (int i = 0; i < 6; ++i) omega(i, i) = 1.0 / (match_sigma(i) * match_sigma(i));
  return omega;
}

namespace {

bool linked(const World& world, int a, int b) {
  for (const auto& [u, v] : world.links) {
    if ((u == a && v == b) || (u == b && v == a)) return true;
  }
  return false;
}

Pose poseAt(const Eigen::Vector3d& position, const Eigen::Vector3d& direction) {
  const double yaw = std::atan2(direction.y(), direction.x());
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), position);
}

Twist sampleTwist(const Vector6d& sigma, Rng& rng) {
  Vector6d v;
  for (int i = 0; i < 6; ++i) v(i) = sigma(i) * rng.gaussian();
  return Twist(v);
}

}  // namespace

std::vector<Pose> routePoses(const World& world, const SessionSpec& spec) {
  if (spec.route.size() < 2) throw Error(ErrorCode::kInvalidRoute, "route needs >= 2 waypoints");
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(spec.route.size());
  int prev = -1;
  for (const std::string& name : spec.route) {
    const int idx = world.waypointIndex(name);
    if (idx < 0) throw Error(ErrorCode::kInvalidRoute, "unknown waypoint " + name);
    if (prev >= 0 && !linked(world, prev, idx)) {
      throw Error(ErrorCode::kInvalidRoute,
                  "waypoints " + world.waypoints[static_cast<size_t>(prev)].name + " and " + name +
                      " are not linked");
    }
    pts.push_back(world.waypoints[static_cast<size_t>(idx)].position);
    prev = idx;
  }
  std::vector<double> cumulative{0.0};
  for (size_t i = 1; i < pts.size(); ++i) {
    const double len = (pts[i] - pts[i - 1]).norm();
    if (len <= 0.0) throw Error(ErrorCode::kInvalidRoute, "zero-length route segment");
    cumulative.push_back(cumulative.back() + len);
  }
  const double total = cumulative.back();
  const int count = static_cast<int>(std::floor(total / spec.spacing + 1e-9)) + 1;

  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(count));
  size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    const double s = std::min(k * spec.spacing, total);
    while (seg + 2 < cumulative.size() && s >= cumulative[seg + 1]) ++seg;
    const double t = (s - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
    const Eigen::Vector3d p = pts[seg] + t * (pts[seg + 1] - pts[seg]);
    const Eigen::Vector3d dir = pts[seg + 1] - pts[seg];
    out.push_back(poseAt(p, dir));
  }
  return out;
}

SessionStream generateSession(const World& world, const NoiseModel& noise, const SessionSpec& spec,
                              int session_id) {
  const std::vector<Pose> truth = routePoses(world, spec);
  Rng rng(world.seed * 0x51f15eedULL + static_cast<uint64_t>(session_id) * 0x100000001b3ULL + 17u);

  SessionStream stream;
  stream.session = session_id;
  stream.label = spec.label;
  stream.start = truth.front();

  const Matrix6d omega = noise.odomInformation();
  for (size_t i = 0; i < truth.size(); ++i) {
    KeyframeEvent ev;
    ev.session = session_id;
    ev.timestamp = static_cast<double>(i) * spec.spacing;
    ev.truth = truth[i];
    ev.odom_information = omega;
    if (i == 0) {
      ev.odometry = Pose();
    } else {
      const Pose rel = compose(inverse(truth[i - 1]), truth[i]);
      ev.odometry = compose(rel, exp(sampleTwist(noise.odom_sigma, rng)));
    }
    stream.events.push_back(ev);
  }
  return stream;
}

std::optional<std::pair<Pose, Matrix6d>> oracleMatch(const World& world, const NoiseModel& noise,
                                                     const Pose& query_truth,
                                                     const Pose& target_truth, Rng& rng,
                                                     bool pair_mode) {
  const double radius = pair_mode ? world.pair_visibility_radius : world.visibility_radius;
  if (translationDistance(query_truth, target_truth) > radius) {
    return std::nullopt;
  }
  if (rng.uniform() < noise.match_dropout) return std::nullopt;
  const bool outliers_apply =
      pair_mode || noise.outlier_scope == OutlierScope::kAll;
  if (outliers_apply && noise.outlier_rate > 0.0 && rng.uniform() < noise.outlier_rate) {
    // Uniformly random wild transform.
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) t(i) = (rng.uniform() - 0.5) * 100.0;
    Eigen::Quaterniond q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (q.norm() < 1e-9) q = Eigen::Quaterniond::Identity();
    return std::make_pair(Pose(q, t), noise.matchInformation());
  }
  const Pose rel = compose(inverse(query_truth), target_truth);
  const Pose measured = compose(rel, exp(sampleTwist(noise.match_sigma, rng)));
  return std::make_pair(measured, noise.matchInformation());
}

namespace {

void addLinkChain(World& world, int first, int last) {
  for (int i = first; i < last; ++i) world.links.emplace_back(i, i + 1);
}

std::string wp(World& world, const std::string& name, double x, double y) {
  world.waypoints.push_back({name, Eigen::Vector3d(x, y, 0.0)});
  return name;
}

Scenario buildThreeStage(uint64_t seed) {
  Scenario sc;
  sc.world.seed = seed;
  World& w = sc.world;

  // Courtyard: 24-gon with 5 m sides (perimeter 120 m).
  const int n_c = 24;
  const double r_c = 2.5 / std::sin(std::numbers::pi / n_c);
  std::vector<std::string> circle;
  for (int i = 0; i < n_c; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n_c;
    circle.push_back(wp(w, "c" + std::to_string(i), r_c * std::cos(a), r_c * std::sin(a)));
  }
  for (int i = 0; i < n_c; ++i) w.links.emplace_back(i, (i + 1) % n_c);

  // Exterior loop: leaves the courtyard at c19 (285 deg), swings around at
  // r_c + 15 and re-enters at c8 (120 deg).
  const double r_o = r_c + 15.0;
  std::vector<std::string> outer;
  const int deg_start = 285;
  for (int d = deg_start; d <= 285 + 195; d += 15) {
    const double a = d * std::numbers::pi / 180.0;
    outer.push_back(
        wp(w, "x" + std::to_string((d - deg_start) / 15), r_o * std::cos(a), r_o * std::sin(a)));
  }
  const int base = n_c;
  w.links.emplace_back(19, base);  // c19 -> x0
  addLinkChain(w, base, base + static_cast<int>(outer.size()) - 1);
  w.links.emplace_back(base + static_cast<int>(outer.size()) - 1, 8);  // x_last -> c8

  SessionSpec a;
  for (int i = 0; i <= n_c; ++i) a.route.push_back(circle[static_cast<size_t>(i % n_c)]);
  a.route.push_back(circle[1]);  // small overlap past the seam
  a.label = "courtyard_map";

  SessionSpec b;
  for (int i = 0; i <= 19; ++i) b.route.push_back(circle[static_cast<size_t>(i)]);
  for (const std::string& name : outer) b.route.push_back(name);
  for (int i = 8; i <= 12; ++i) b.route.push_back(circle[static_cast<size_t>(i)]);
  b.label = "wing_loop";

  sc.script.sessions = {a, b};
  return sc;
}

Scenario buildFullOverlap(uint64_t seed) {
  Scenario sc;
  sc.world.seed = seed;
  World& w = sc.world;
  wp(w, "l0", 0.0, 0.0);
  wp(w, "l1", 24.0, 0.0);
  wp(w, "l2", 96.0, 0.0);
  wp(w, "l3", 120.0, 0.0);
  addLinkChain(w, 0, 3);
  SessionSpec a{{"l0", "l1", "l2", "l3"}, 1.0, "line_map"};
  SessionSpec b{{"l1", "l2"}, 1.0, "line_replay"};
  sc.script.sessions = {a, b};
  return sc;
}

Scenario buildOverlapPair(uint64_t seed) {
  Scenario sc;
  sc.world.seed = seed;
  World& w = sc.world;
  wp(w, "p0", 0.0, 0.0);
  wp(w, "p1", 30.0, 0.0);
  wp(w, "p2", 100.0, 0.0);   // end of the mapped line
  wp(w, "q0", 130.0, 0.0);   // new ground: rectangle loop
  wp(w, "q1", 130.0, 40.0);
  wp(w, "q2", 70.0, 40.0);
  wp(w, "q3", 70.0, 0.0);    // rejoins the mapped line
  wp(w, "p3", 40.0, 0.0);
  addLinkChain(w, 0, 6);
  w.links.emplace_back(6, 7);
  SessionSpec a{{"p0", "p1", "p2"}, 1.0, "base_line"};
  SessionSpec b{{"p1", "p2", "q0", "q1", "q2", "q3", "p3"}, 1.0, "half_new"};
  sc.script.sessions = {a, b};
  return sc;
}

Scenario buildLoopEnforcer(uint64_t seed) {
  Scenario sc;
  sc.world.seed = seed;
  World& w = sc.world;
  // Open arc: 240 degrees of a circle with 7.5 m chords.
  const int n_seg = 16;
  const double r = 60.0 / (2.0 * std::numbers::pi / 3.0);  // 240 deg arc of length 120
  std::vector<std::string> arc;
  for (int i = 0; i <= n_seg; ++i) {
    const double a = (240.0 * i / n_seg) * std::numbers::pi / 180.0;
    arc.push_back(wp(w, "a" + std::to_string(i), r * std::cos(a), r * std::sin(a)));
  }
  addLinkChain(w, 0, n_seg);
  w.links.emplace_back(n_seg, 0);  // chord across the gap
  SessionSpec a;
  for (int i = 0; i <= n_seg; ++i) a.route.push_back(arc[static_cast<size_t>(i)]);
  a.label = "open_arc";
  SessionSpec b;
  for (int i = 4; i <= n_seg; ++i) b.route.push_back(arc[static_cast<size_t>(i)]);
  b.route.push_back(arc[0]);  // bridge the gap through new ground
  b.route.push_back(arc[1]);
  b.route.push_back(arc[2]);
  b.label = "gap_bridge";
  sc.script.sessions = {a, b};
  return sc;
}

}  // namespace

std::vector<std::string> scenarioNames() {
  return {"three_stage", "overlap_pair", "loop_enforcer", "full_overlap"};
}

Scenario buildScenario(const std::string& name, uint64_t seed) {
  if (name == "three_stage") return buildThreeStage(seed);
  if (name == "overlap_pair") return buildOverlapPair(seed);
  if (name == "loop_enforcer") return buildLoopEnforcer(seed);
  if (name == "full_overlap") return buildFullOverlap(seed);
  throw Error(ErrorCode::kUnknownScenario, name);
}

}  // namespace mslam
