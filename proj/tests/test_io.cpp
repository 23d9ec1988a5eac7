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

#include <numbers>
#include <random>

#include "mslam/io.hpp"

using namespace mslam;

namespace {

PoseGraph sampleGraph() {
  PoseGraph g;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    Vertex v;
    v.id = {i < 3 ? 0 : 1, i < 3 ? i : i - 3};
    v.role = VertexRole::kReference;
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    axis.normalize();
    v.pose = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(u(rng), axis)),
                  {10.0 * u(rng), 10.0 * u(rng), 10.0 * u(rng)});
    g.addVertex(v);
  }
  auto spd = [&]() {
    Eigen::Matrix<double, 6, 6> m;
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) m(r, c) = u(rng);
    }
    return Matrix6d(m.transpose() * m + Matrix6d::Identity());
  };
  for (const auto& [a, b] : std::vector<std::pair<VertexId, VertexId>>{
           {{0, 0}, {0, 1}}, {{0, 1}, {0, 2}}, {{1, 0}, {1, 1}}}) {
    Edge e;
    e.from = a;
    e.to = b;
    e.kind = EdgeKind::kIntra;
    e.measurement = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())),
                         {1.0, 0.25, 0.0});
    e.information = spd();
    g.addEdge(e);
  }
  Edge loop;
  loop.from = {0, 0};
  loop.to = {1, 1};
  loop.kind = EdgeKind::kLoop;
  loop.measurement = Pose::fromTranslation({0.5, 0.0, 0.0});
  loop.information = spd();
  g.addEdge(loop);
  Edge prior;
  prior.from = {0, 0};
  prior.to = {0, 0};
  prior.kind = EdgeKind::kPrior;
  prior.measurement = Pose();
  prior.information = 100.0 * Matrix6d::Identity();
  g.addEdge(prior);
  return g;
}

}  // namespace

TEST_CASE("vertex record format") {
  const io::ParseResult r = io::parseGraph("VERTEX_SE3:QUAT 0 1 2 3 0 0 0 1\n");
  REQUIRE(r.graph.vertexCount() == 1);
  const Vertex& v = r.graph.vertex({0, 0});
  CHECK((v.pose.translation() - Eigen::Vector3d(1, 2, 3)).norm() < 1e-12);
  CHECK(rotationDistance(v.pose, Pose()) < 1e-12);
}

TEST_CASE("malformed records raise with line numbers") {
  // 20 information entries instead of 21.
  std::string line = "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\n";
  line += "EDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1";
  for (int i = 0; i < 20; ++i) line += " 1";
  line += "\n";
  CHECK_THROWS_WITH_AS(io::parseGraph(line), doctest::Contains("line 3"), Error);
  CHECK_THROWS_AS(io::parseGraph("VERTEX_SE3:QUAT 0 a b c 0 0 0 1\n"), Error);
}

TEST_CASE("unknown records are skipped with a warning count") {
  const io::ParseResult r =
      io::parseGraph("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nFIX 0\nVERTEX_TAG whatever\n");
  CHECK(r.graph.vertexCount() == 1);
  CHECK(r.warnings == 2);
}

TEST_CASE("serialize/parse round trip is value-identical") {
  const PoseGraph g = sampleGraph();
  const std::string text = io::serializeGraph(g);
  const io::ParseResult first = io::parseGraph(text);
  const std::string text2 = io::serializeGraph(first.graph);
  const io::ParseResult second = io::parseGraph(text2);
  REQUIRE(first.graph.vertexCount() == second.graph.vertexCount());
  REQUIRE(first.graph.edgeCount() == second.graph.edgeCount());
  const auto ids = first.graph.sortedIds();
  for (const VertexId& id : ids) {
    CHECK(translationDistance(first.graph.vertex(id).pose, second.graph.vertex(id).pose) < 1e-12);
    CHECK(rotationDistance(first.graph.vertex(id).pose, second.graph.vertex(id).pose) < 1e-12);
  }
  for (size_t i = 0; i < first.graph.edgeCount(); ++i) {
    CHECK((first.graph.edge(i).information - second.graph.edge(i).information)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("manifest restores sessions, kinds, roles and truth poses") {
  PoseGraph g = sampleGraph();
  g.vertex({0, 1}).truth = Pose::fromTranslation({4.0, 5.0, 6.0});
  io::Manifest extra;
  extra.session_labels[0] = "base";
  extra.session_labels[1] = "second";
  extra.seed = 99;
  extra.config_echo["scenario"] = "sample";
  const std::string graph_text = io::serializeGraph(g);
  const std::string manifest_text = io::serializeManifest(g, extra);

  const io::ParseResult flat = io::parseGraph(graph_text);
  const io::Manifest m = io::parseManifest(manifest_text);
  CHECK(m.seed == 99);
  CHECK(m.session_labels.at(1) == "second");
  const PoseGraph restored = io::applyManifest(flat.graph, m);
  CHECK(restored.hasVertex({1, 1}));
  CHECK(restored.edge(3).kind == EdgeKind::kLoop);
  CHECK(restored.edge(4).kind == EdgeKind::kPrior);
  CHECK(restored.vertex({1, 0}).role == VertexRole::kReference);
  REQUIRE(restored.vertex({0, 1}).truth.has_value());
  CHECK(translationDistance(*restored.vertex({0, 1}).truth,
                            Pose::fromTranslation({4.0, 5.0, 6.0})) < 1e-12);
  CHECK(!restored.vertex({0, 0}).truth.has_value());
}

TEST_CASE("metrics trace zeroes wall time in determinism mode") {
  MetricsRow row;
  row.keyframe = 3;
  row.session = 1;
  row.mode = Mode::kMapping;
  row.d_bar = 2.5;
  row.mu = 2.0;
  row.sigma = 0.25;
  row.event = DecisionEvent::kEnterMappingDisconnect;
  row.wall_ms = 12.5;
  const std::string det = io::serializeMetrics({row}, true);
  CHECK(det.find("12.5") == std::string::npos);
  CHECK(det.find("NA") != std::string::npos);  // lambda2 not evaluated
  const std::string live = io::serializeMetrics({row}, false);
  CHECK(live.find("12.5") != std::string::npos);
}

TEST_CASE("session stream round trip") {
  World w;
  w.waypoints = {{"a", {0, 0, 0}}, {"b", {30, 0, 0}}};
  w.links = {{0, 1}};
  w.seed = 3;
  const SessionStream s = generateSession(w, NoiseModel{}, {{"a", "b"}, 1.0, "strip"}, 2);
  const std::string text = io::serializeStream(s);
  const SessionStream back = io::parseStream(text);
  CHECK(back.session == 2);
  CHECK(back.label == "strip");
  REQUIRE(back.events.size() == s.events.size());
  for (size_t i = 0; i < s.events.size(); ++i) {
    CHECK(translationDistance(back.events[i].odometry, s.events[i].odometry) < 1e-5);
    REQUIRE(back.events[i].truth.has_value());
    CHECK(translationDistance(*back.events[i].truth, *s.events[i].truth) < 1e-5);
    CHECK((back.events[i].odom_information - s.events[i].odom_information).cwiseAbs().maxCoeff() <
          1e-4);
  }
}

TEST_CASE("config parsing") {
  const auto kv = io::parseConfig("alpha = 1.5\n# comment\nname= run_a \nbad line\n");
  CHECK(kv.at("alpha") == "1.5");
  CHECK(kv.at("name") == "run_a");
  CHECK(kv.size() == 2);
}

TEST_CASE("ATE basics") {
  std::vector<Pose> truth;
  for (int i = 0; i < 20; ++i) {
    truth.push_back(Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.1 * i, Eigen::Vector3d::UnitZ())),
                         {std::cos(0.3 * i), std::sin(0.3 * i), 0.1 * i}));
  }
  CHECK(io::evaluateAte(truth, truth) < 1e-12);

  // A global rigid offset is absorbed by the alignment.
  const Pose offset(Eigen::Quaterniond(Eigen::AngleAxisd(0.8, Eigen::Vector3d::UnitY())),
                    {5.0, -2.0, 1.0});
  std::vector<Pose> moved;
  for (const Pose& p : truth) moved.push_back(compose(offset, p));
  CHECK(io::evaluateAte(moved, truth) < 1e-9);

  // Invariance under a common transform of both trajectories.
  std::vector<Pose> est = truth;
  est[5] = compose(exp(Twist({0.2, 0.0, 0.0}, Eigen::Vector3d::Zero())), est[5]);
  const double base = io::evaluateAte(est, truth);
  std::vector<Pose> est2, truth2;
  for (const Pose& p : est) est2.push_back(compose(offset, p));
  for (const Pose& p : truth) truth2.push_back(compose(offset, p));
  CHECK(std::abs(io::evaluateAte(est2, truth2) - base) < 1e-9);

  CHECK_THROWS_AS(io::evaluateAte(est, std::vector<Pose>(est.begin(), est.begin() + 3)), Error);
}

TEST_CASE("ATE against a brute-force oracle on the displaced unit square") {
  // Truth: unit square corners; estimate: one corner displaced by 0.2 m.
  // The oracle scans a dense grid over 2D rigid alignments (the optimal
  // alignment for planar points is planar) and reports the best RMSE.
  std::vector<Pose> truth = {
      Pose::fromTranslation({0, 0, 0}),
      Pose::fromTranslation({1, 0, 0}),
      Pose::fromTranslation({1, 1, 0}),
      Pose::fromTranslation({0, 1, 0}),
  };
  std::vector<Pose> est = truth;
  est[2] = Pose::fromTranslation({1.2, 1.0, 0.0});

  double best = std::numeric_limits<double>::infinity();
  for (double theta = -0.5; theta <= 0.5; theta += 1e-4) {
    const Eigen::Rotation2Dd R(theta);
    // Optimal translation for fixed rotation: mean(truth) - R * mean(est).
    Eigen::Vector2d mean_e(0, 0), mean_t(0, 0);
    for (size_t i = 0; i < 4; ++i) {
      mean_e += est[i].translation().head<2>() / 4.0;
      mean_t += truth[i].translation().head<2>() / 4.0;
    }
    const Eigen::Vector2d t = mean_t - R * mean_e;
    double sq = 0.0;
    for (size_t i = 0; i < 4; ++i) {
      const Eigen::Vector2d aligned = R * est[i].translation().head<2>() + t;
      sq += (aligned - truth[i].translation().head<2>()).squaredNorm();
    }
    best = std::min(best, std::sqrt(sq / 4.0));
  }
  const double ate = io::evaluateAte(est, truth);
  CHECK(ate == doctest::Approx(best).epsilon(1e-4));
}

TEST_CASE("collinear positions are a degenerate alignment") {
  std::vector<Pose> line;
  for (int i = 0; i < 5; ++i) line.push_back(Pose::fromTranslation({double(i), 0.0, 0.0}));
  CHECK_THROWS_AS(io::evaluateAte(line, line), Error);
}
