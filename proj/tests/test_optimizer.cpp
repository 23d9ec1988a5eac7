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

#include "mslam/optimizer.hpp"

using namespace mslam;

namespace {

Matrix6d randomSpd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix<double, 6, 6> m;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) m(r, c) = u(rng);
  }
  return m.transpose() * m + 0.5 * Matrix6d::Identity();
}

Pose randomPose(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d axis(u(rng), u(rng), u(rng));
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
  axis.normalize();
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(scale * u(rng), axis)),
              scale * Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

// Noise-free circle of n poses with exact odometry edges and one prior.
PoseGraph circleGraph(int n, std::vector<Pose>& truth) {
  PoseGraph g;
  truth.clear();
  const double step = 2.0 * std::numbers::pi / n;
  for (int i = 0; i < n; ++i) {
    const double a = step * i;
    Vertex v;
    v.id = {0, i};
    v.pose = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ())),
                  {5.0 * std::cos(a), 5.0 * std::sin(a), 0.0});
    truth.push_back(v.pose);
    g.addVertex(v);
  }
  for (int i = 0; i + 1 < n; ++i) {
    Edge e;
    e.from = {0, i};
    e.to = {0, i + 1};
    e.kind = EdgeKind::kIntra;
    e.measurement =
        compose(inverse(truth[static_cast<size_t>(i)]), truth[static_cast<size_t>(i) + 1]);
    g.addEdge(e);
  }
  Edge prior;
  prior.from = {0, 0};
  prior.to = {0, 0};
  prior.kind = EdgeKind::kPrior;
  prior.measurement = truth[0];
  prior.information = 1e6 * Matrix6d::Identity();
  g.addEdge(prior);
  return g;
}

PoseGraph randomProblemGraph(std::mt19937_64& rng, int n) {
  PoseGraph g;
  for (int i = 0; i < n; ++i) {
    Vertex v;
    v.id = {0, i};
    v.role = VertexRole::kReference;
    v.pose = randomPose(rng, 1.5);
    g.addVertex(v);
  }
  for (int i = 0; i + 1 < n; ++i) {
    Edge e;
    e.from = {0, i};
    e.to = {0, i + 1};
    e.kind = EdgeKind::kIntra;
    e.measurement = randomPose(rng, 1.0);
    e.information = randomSpd(rng);
    g.addEdge(e);
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int k = 0; k < n / 2; ++k) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    Edge e;
    e.from = {0, std::min(a, b)};
    e.to = {0, std::max(a, b)};
    e.kind = EdgeKind::kLoop;
    e.measurement = randomPose(rng, 1.0);
    e.information = randomSpd(rng);
    g.addEdge(e);
  }
  Edge prior;
  prior.from = {0, 0};
  prior.to = {0, 0};
  prior.kind = EdgeKind::kPrior;
  prior.measurement = randomPose(rng, 1.0);
  prior.information = randomSpd(rng);
  g.addEdge(prior);
  return g;
}

OptimizationProblem fullProblem(const PoseGraph& g) {
  OptimizationProblem p;
  p.graph = &g;
  for (const Vertex& v : g.vertices()) p.free.insert(v.id);
  return p;
}

}  // namespace

TEST_CASE("residual conventions") {
  std::mt19937_64 rng(47);
  std::unordered_map<VertexId, Pose, VertexIdHash> poses;
  const Pose from = randomPose(rng);
  const Pose meas = randomPose(rng);
  poses[{0, 0}] = from;
  poses[{0, 1}] = compose(from, meas);

  Edge e;
  e.from = {0, 0};
  e.to = {0, 1};
  e.kind = EdgeKind::kIntra;
  e.measurement = meas;
  CHECK(residual(e, poses).norm() < 1e-12);

  // Identity measurement with equal endpoints.
  poses[{0, 1}] = from;
  e.measurement = Pose();
  CHECK(residual(e, poses).norm() < 1e-12);

  // First-order behavior: perturbing T_to by exp(xi) moves the residual by
  // the adjoint-transported twist.
  const Twist xi(Vector6d::Constant(1e-4 / std::sqrt(6.0)));
  e.measurement = meas;
  poses[{0, 1}] = compose(exp(xi), compose(from, meas));
  const Vector6d r = residual(e, poses).vector();
  const Vector6d expected = adjoint(inverse(compose(from, meas))) * xi.vector();
  CHECK((r - expected).norm() / expected.norm() < 1e-5);
}

TEST_CASE("chi squared") {
  std::vector<Pose> truth;
  PoseGraph g = circleGraph(10, truth);
  OptimizationProblem p = fullProblem(g);
  CHECK(chiSquared(p) < 1e-18);

  // Single edge with a unit residual in one coordinate and identity
  // information: chi2 = 1.
  PoseGraph one;
  Vertex a, b;
  a.id = {0, 0};
  b.id = {0, 1};
  b.pose = Pose::fromTranslation({1.0, 0.0, 0.0});
  one.addVertex(a);
  one.addVertex(b);
  Edge e;
  e.from = {0, 0};
  e.to = {0, 1};
  e.kind = EdgeKind::kIntra;
  e.measurement = Pose();
  one.addEdge(e);
  OptimizationProblem p1 = fullProblem(one);
  CHECK(chiSquared(p1) == doctest::Approx(1.0).epsilon(1e-12));

  // Random graph matches a direct per-edge summation.
  std::mt19937_64 rng(53);
  PoseGraph rg = randomProblemGraph(rng, 10);
  OptimizationProblem pr = fullProblem(rg);
  pr.kernels[EdgeKind::kLoop] = {RobustKernel::kNone, 1.0};  // plain quadratic sum
  std::unordered_map<VertexId, Pose, VertexIdHash> poses;
  for (const Vertex& v : rg.vertices()) poses[v.id] = v.pose;
  double direct = 0.0;
  for (const Edge& edge : rg.edges()) {
    const Vector6d r = residual(edge, poses).vector();
    direct += r.dot(edge.information * r);
  }
  CHECK(chiSquared(pr) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("optimize recovers a noise-free circle from a perturbed start") {
  std::vector<Pose> truth;
  PoseGraph g = circleGraph(10, truth);
  std::mt19937_64 rng(59);
  std::normal_distribution<double> n01(0.0, 0.1);
  for (int i = 1; i < 10; ++i) {
    Vector6d noise;
    for (int k = 0; k < 6; ++k) noise(k) = n01(rng);
    Vertex& v = g.vertex({0, i});
    v.pose = compose(exp(Twist(noise)), v.pose);
  }
  OptimizationProblem p = fullProblem(g);
  const OptimizationResult res = optimize(p);
  CHECK(res.termination == TerminationReason::kConverged);
  CHECK(res.final_chi2 < 1e-10);
  CHECK(res.final_chi2 <= res.initial_chi2);
  for (int i = 0; i < 10; ++i) {
    const Pose& est = res.poses.at({0, i});
    CHECK(translationDistance(est, truth[static_cast<size_t>(i)]) < 1e-6);
    CHECK(rotationDistance(est, truth[static_cast<size_t>(i)]) < 1e-6);
  }
}

TEST_CASE("single free vertex against one fixed reference solves in closed form") {
  PoseGraph g;
  Vertex ref;
  ref.id = {0, 0};
  ref.role = VertexRole::kReference;
  std::mt19937_64 rng(61);
  ref.pose = randomPose(rng);
  g.addVertex(ref);
  Vertex active;
  active.id = {1, 0};
  active.pose = randomPose(rng);
  g.addVertex(active);
  Edge e;
  e.from = {1, 0};
  e.to = {0, 0};
  e.kind = EdgeKind::kInter;
  e.measurement = randomPose(rng);
  g.addEdge(e);

  OptimizationProblem p;
  p.graph = &g;
  p.free = {{1, 0}};
  p.fixed = {{0, 0}};
  const OptimizationResult res = optimize(p);
  // Residual log(Z^-1 T_free^-1 T_ref) vanishes at T_free = T_ref * Z^-1.
  const Pose expected = compose(ref.pose, inverse(e.measurement));
  CHECK(translationDistance(res.poses.at({1, 0}), expected) < 1e-9);
  CHECK(rotationDistance(res.poses.at({1, 0}), expected) < 1e-9);
  CHECK(res.final_chi2 < 1e-16);
  CHECK(res.iterations <= 8);  // closed form: a handful of damped steps
}

TEST_CASE("zero free vertices converges immediately") {
  std::vector<Pose> truth;
  PoseGraph g = circleGraph(5, truth);
  OptimizationProblem p;
  p.graph = &g;
  for (const Vertex& v : g.vertices()) p.fixed.insert(v.id);
  const OptimizationResult res = optimize(p);
  CHECK(res.termination == TerminationReason::kConverged);
  CHECK(res.iterations == 0);
  CHECK(res.final_chi2 == res.initial_chi2);
}

TEST_CASE("gauge failure on an unanchored component") {
  PoseGraph g;
  Vertex a, b;
  a.id = {0, 0};
  b.id = {0, 1};
  g.addVertex(a);
  g.addVertex(b);
  Edge e;
  e.from = {0, 0};
  e.to = {0, 1};
  e.kind = EdgeKind::kIntra;
  e.measurement = Pose::fromTranslation({1, 0, 0});
  g.addEdge(e);
  OptimizationProblem p = fullProblem(g);
  CHECK(optimize(p).termination == TerminationReason::kGaugeFailure);
  REQUIRE(unanchoredComponents(p).size() == 1);
  CHECK(unanchoredComponents(p)[0] == VertexId{0, 0});

  // An extra prior repairs the gauge.
  Edge prior;
  prior.from = {0, 0};
  prior.to = {0, 0};
  prior.kind = EdgeKind::kPrior;
  prior.measurement = Pose();
  p.extra_priors.push_back(prior);
  CHECK(unanchoredComponents(p).empty());
  CHECK(optimize(p).termination == TerminationReason::kConverged);
}

TEST_CASE("jacobian check on random graphs") {
  std::mt19937_64 rng(67);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    PoseGraph g = randomProblemGraph(rng, 8);
    OptimizationProblem p = fullProblem(g);
    worst = std::max(worst, jacobianCheck(p, 1e-6));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("jacobian check on exactly linear cases") {
  // Pure translation chain and a prior at identity.
  PoseGraph g;
  for (int i = 0; i < 3; ++i) {
    Vertex v;
    v.id = {0, i};
    v.pose = Pose::fromTranslation({double(i), 0.0, 0.0});
    g.addVertex(v);
  }
  for (int i = 0; i + 1 < 3; ++i) {
    Edge e;
    e.from = {0, i};
    e.to = {0, i + 1};
    e.kind = EdgeKind::kIntra;
    e.measurement = Pose::fromTranslation({1.0, 0.0, 0.0});
    g.addEdge(e);
  }
  Edge prior;
  prior.from = {0, 0};
  prior.to = {0, 0};
  prior.kind = EdgeKind::kPrior;
  prior.measurement = Pose();
  g.addEdge(prior);
  PoseGraph g2 = g;
  g2.vertex({0, 0}).pose = Pose();  // prior exactly satisfied at identity
  OptimizationProblem p = fullProblem(g2);
  CHECK(jacobianCheck(p, 1e-6) < 1e-9);
}

TEST_CASE("monotone cost over accepted iterates") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 5; ++trial) {
    PoseGraph g = randomProblemGraph(rng, 12);
    OptimizationProblem p = fullProblem(g);
    const OptimizationResult res = optimize(p);
    CHECK(res.final_chi2 <= res.initial_chi2 + 1e-12);
  }
}

TEST_CASE("gauge equivalence under a global rigid transform") {
  std::mt19937_64 rng(73);
  PoseGraph g = randomProblemGraph(rng, 10);
  OptimizationProblem p = fullProblem(g);
  const OptimizationResult base = optimize(p);

  const Pose t = randomPose(rng, 1.0);
  PoseGraph moved;
  for (Vertex v : g.vertices()) {
    v.pose = compose(t, v.pose);
    moved.addVertex(v);
  }
  for (Edge e : g.edges()) {
    if (e.kind == EdgeKind::kPrior) e.measurement = compose(t, e.measurement);
    moved.addEdge(e);
  }
  OptimizationProblem pm = fullProblem(moved);
  const OptimizationResult res = optimize(pm);
  CHECK(std::abs(res.final_chi2 - base.final_chi2) <
        1e-9 * std::max(1.0, std::abs(base.final_chi2)));
  for (const auto& [id, pose] : base.poses) {
    CHECK(translationDistance(res.poses.at(id), compose(t, pose)) < 1e-6);
  }
}

TEST_CASE("joint solve with reference fixed reproduces localization mode bit-for-bit") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 20; ++trial) {
    PoseGraph g;
    const int nr = 6;
    for (int i = 0; i < nr; ++i) {
      Vertex v;
      v.id = {0, i};
      v.role = VertexRole::kReference;
      v.pose = randomPose(rng, 1.5);
      g.addVertex(v);
    }
    for (int i = 0; i + 1 < nr; ++i) {
      Edge e;
      e.from = {0, i};
      e.to = {0, i + 1};
      e.kind = EdgeKind::kIntra;
      e.measurement = randomPose(rng);
      e.information = randomSpd(rng);
      g.addEdge(e);
    }
    {
      // Loop inside the reference: a constant when the reference is fixed.
      Edge e;
      e.from = {0, 0};
      e.to = {0, nr - 1};
      e.kind = EdgeKind::kLoop;
      e.measurement = randomPose(rng);
      e.information = randomSpd(rng);
      g.addEdge(e);
    }
    const int na = 4;
    for (int i = 0; i < na; ++i) {
      Vertex v;
      v.id = {1, i};
      v.pose = randomPose(rng, 1.5);
      g.addVertex(v);
    }
    for (int i = 0; i + 1 < na; ++i) {
      Edge e;
      e.from = {1, i};
      e.to = {1, i + 1};
      e.kind = EdgeKind::kIntra;
      e.measurement = randomPose(rng);
      e.information = randomSpd(rng);
      g.addEdge(e);
    }
    for (int i = 0; i < na; i += 2) {
      Edge e;
      e.from = {1, i};
      e.to = {0, std::uniform_int_distribution<int>(0, nr - 1)(rng)};
      e.kind = EdgeKind::kInter;
      e.measurement = randomPose(rng);
      e.information = randomSpd(rng);
      g.addEdge(e);
    }

    // Localization form: only the touched reference vertices enter as fixed.
    OptimizationProblem loc;
    loc.graph = &g;
    for (int i = 0; i < na; ++i) loc.free.insert({1, i});
    for (const Edge& e : g.edges()) {
      if (e.kind == EdgeKind::kInter) loc.fixed.insert(e.to);
    }
    const OptimizationResult a = optimize(loc);

    // Joint form with the whole reference placed in the fixed set; its
    // internal INTRA/LOOP edges become constants and drop out.
    OptimizationProblem joint;
    joint.graph = &g;
    joint.free = loc.free;
    for (int i = 0; i < nr; ++i) joint.fixed.insert({0, i});
    const OptimizationResult b = optimize(joint);

    CHECK(a.final_chi2 == b.final_chi2);
    for (const auto& [id, pose] : a.poses) {
      CHECK(pose.translation() == b.poses.at(id).translation());
      CHECK(pose.rotation().coeffs() == b.poses.at(id).rotation().coeffs());
    }
  }
}

TEST_CASE("huber matches the plain kernel when residuals stay below delta") {
  std::mt19937_64 rng(83);
  PoseGraph g = randomProblemGraph(rng, 8);
  // Make the chain exactly consistent so intra residuals vanish.
  for (const Edge& e : g.edges()) {
    if (e.kind == EdgeKind::kIntra) {
      g.vertex(e.to).pose = compose(g.vertex(e.from).pose, e.measurement);
    }
  }
  PoseGraph chain_only;
  for (const Vertex& v : g.vertices()) chain_only.addVertex(v);
  for (const Edge& e : g.edges()) {
    if (e.kind != EdgeKind::kLoop) chain_only.addEdge(e);
  }
  OptimizationProblem a = fullProblem(chain_only);
  OptimizationProblem b = fullProblem(chain_only);
  a.kernels[EdgeKind::kIntra] = {RobustKernel::kHuber, 10.0};
  b.kernels[EdgeKind::kIntra] = {RobustKernel::kNone, 1.0};
  CHECK(std::abs(chiSquared(a) - chiSquared(b)) < 1e-12);
  const OptimizationResult ra = optimize(a);
  const OptimizationResult rb = optimize(b);
  CHECK(std::abs(ra.final_chi2 - rb.final_chi2) < 1e-12);
}
