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

// Times the serial reference kernels against the OpenMP ones and checks
// that their outputs are bitwise identical along the way.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <random>

#include "mslam/kernels.hpp"
#include "mslam/spectral.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mslam;
using Clock = std::chrono::steady_clock;

namespace {

double ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

kernels::EdgeWorkspace randomWorkspace(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  kernels::EdgeWorkspace ws;
  ws.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    auto pose = [&]() {
      Eigen::Vector3d axis(u(rng), u(rng), u(rng));
      if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
      axis.normalize();
      return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(1.5 * u(rng), axis)),
                  Eigen::Vector3d(u(rng), u(rng), u(rng)));
    };
    ws.from.push_back(pose());
    ws.to.push_back(pose());
    ws.meas_inv.push_back(pose());
    Eigen::Matrix<double, 6, 6> m;
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) m(r, c) = u(rng);
    }
    ws.omega.push_back(m.transpose() * m + 0.1 * Matrix6d::Identity());
    ws.is_prior.push_back(i % 7 == 0 ? 1 : 0);
    ws.huber.push_back(i % 3 == 0 ? 1.0 : 0.0);
  }
  return ws;
}

kernels::CsrMatrix ringLaplacian(int n, int chords) {
  PoseGraph g;
  for (int i = 0; i < n; ++i) {
    Vertex v;
    v.id = {0, i};
    v.role = VertexRole::kReference;
    g.addVertex(v);
  }
  auto edge = [&](int a, int b) {
    Edge e;
    e.from = {0, std::min(a, b)};
    e.to = {0, std::max(a, b)};
    e.kind = EdgeKind::kLoop;
    g.addEdge(e);
  };
  for (int i = 0; i < n; ++i) edge(i, (i + 1) % n);
  for (int i = 0; i < chords; ++i) edge((i * 97) % n, (i * 97 + n / 2) % n);
  std::set<VertexId> ids;
  for (const Vertex& v : g.vertices()) ids.insert(v.id);
  return buildLaplacian(g, ids, Weighting::kUnit).csr();
}

template <typename F>
double best_ms(F&& f, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, ms(t0, Clock::now()));
  }
  return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; omp kernels fall back to serial loops\n");
#endif

  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

  for (size_t n : {20000UL, 100000UL}) {
    const auto ws = randomWorkspace(n, 1234);
    std::vector<kernels::LinearizedEdge> a, b;
    const double ts = best_ms([&]() { kernels::serial::linearize(ws, a); });
    const double tp = best_ms([&]() { kernels::omp::linearize(ws, b); });
    bool same = true;
    for (size_t i = 0; i < n; ++i) {
      if (a[i].weighted_hessian != b[i].weighted_hessian ||
          a[i].weighted_gradient != b[i].weighted_gradient || a[i].cost != b[i].cost) {
        same = false;
      }
    }
    std::printf("%-22s %5zu %10.2f %10.2f %7.2fx %s\n", "linearize", n, ts, tp, ts / tp,
                same ? "" : "MISMATCH");

    std::vector<double> s1, s2;
    double c1 = 0.0, c2 = 0.0;
    const double cs = best_ms([&]() { c1 = kernels::serial::chiSquared(ws, s1); });
    const double cp = best_ms([&]() { c2 = kernels::omp::chiSquared(ws, s2); });
    std::printf("%-22s %5zu %10.2f %10.2f %7.2fx %s\n", "chi_squared", n, cs, cp, cs / cp,
                c1 == c2 ? "" : "MISMATCH");
  }

  for (int n : {200000, 1000000}) {
    const kernels::CsrMatrix L = ringLaplacian(n, n / 50);
    std::vector<double> x(static_cast<size_t>(n), 1.0);
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = std::sin(0.01 * i);
    std::vector<double> y1, y2;
    const double ts = best_ms([&]() { kernels::serial::matvec(L, x, y1); });
    const double tp = best_ms([&]() { kernels::omp::matvec(L, x, y2); });
    std::printf("%-22s %5dk %9.2f %10.2f %7.2fx %s\n", "laplacian_matvec", n / 1000, ts, tp,
                ts / tp, y1 == y2 ? "" : "MISMATCH");
  }

  // Fiedler value: dense reference path versus the sparse iterative path.
  {
    PoseGraph g;
    const int n = 900;
    for (int i = 0; i < n; ++i) {
      Vertex v;
      v.id = {0, i};
      v.role = VertexRole::kReference;
      g.addVertex(v);
    }
    auto edge = [&](int a2, int b2) {
      Edge e;
      e.from = {0, std::min(a2, b2)};
      e.to = {0, std::max(a2, b2)};
      e.kind = EdgeKind::kLoop;
      g.addEdge(e);
    };
    for (int i = 0; i < n; ++i) edge(i, (i + 1) % n);
    for (int i = 0; i < n; i += 23) edge(i, (i + n / 2) % n);
    std::set<VertexId> ids;
    for (const Vertex& v : g.vertices()) ids.insert(v.id);
    const WeightedLaplacian L = buildLaplacian(g, ids, Weighting::kUnit);

    Eigen::MatrixXd dense = L.dense();
    double dense_l2 = 0.0, sparse_l2 = 0.0;
    const double td = best_ms(
        [&]() {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
          dense_l2 = eig.eigenvalues()(1);
        },
        2);
    const double ti = best_ms([&]() { sparse_l2 = fiedler(L).lambda2; }, 2);
    std::printf("%-22s %5d %10.2f %10.2f %7.2fx rel_err=%.2e\n", "fiedler(dense vs iter)", n, td,
                ti, td / ti, std::abs(dense_l2 - sparse_l2) / std::max(1e-300, dense_l2));
  }
  return 0;
}
