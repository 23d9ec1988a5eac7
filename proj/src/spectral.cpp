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
#include "mslam/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace mslam {

namespace {

constexpr int kInverseIterationCap = 500;
constexpr double kInverseIterationTol = 1e-10;

// Deterministic start vector for the iterative eigensolver.
std::vector<double> seedVector(int m) {
  std::vector<double> x(static_cast<size_t>(m));
  uint64_t s = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < m; ++i) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    x[static_cast<size_t>(i)] = static_cast<double>(s % 1000003) / 1000003.0 - 0.5;
  }
  return x;
}

}  // namespace

const char* weightingName(Weighting w) {
  switch (w) {
    case Weighting::kUnit: return "unit";
    case Weighting::kFimTrace: return "trace";
    case Weighting::kFimMinEig: return "mineig";
  }
  return "?";
}

double edgeWeight(const Edge& e, Weighting weighting) {
  if (e.kind == EdgeKind::kPrior) {
    throw Error(ErrorCode::kKindViolation, "PRIOR edges have no Laplacian weight");
  }
  if (!isSpdInformation(e.information)) {
    throw Error(ErrorCode::kNonSpdInformation, "edge information not SPD");
  }
  switch (weighting) {
    case Weighting::kUnit: return 1.0;
    case Weighting::kFimTrace: return e.information.trace();
    case Weighting::kFimMinEig: {
      Eigen::SelfAdjointEigenSolver<Matrix6d> eig(e.information, Eigen::EigenvaluesOnly);
      return eig.eigenvalues()(0);
    }
  }
  return 0.0;
}

WeightedLaplacian::WeightedLaplacian(std::vector<VertexId> order, Weighting weighting)
    : order_(std::move(order)), weighting_(weighting), diag_(order_.size(), 0.0) {
  for (size_t i = 0; i < order_.size(); ++i) index_[order_[i]] = static_cast<int>(i);
}

void WeightedLaplacian::addEdge(VertexId u, VertexId v, double w) {
  const int iu = indexOf(u);
  const int iv = indexOf(v);
  if (iu < 0 || iv < 0) throw Error(ErrorCode::kUnknownId, "Laplacian edge endpoint not in order");
  if (iu == iv) return;
  diag_[static_cast<size_t>(iu)] += w;
  diag_[static_cast<size_t>(iv)] += w;
  offdiag_.push_back({{iu, iv}, w});
}

int WeightedLaplacian::indexOf(VertexId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

double WeightedLaplacian::trace() const {
  double t = 0.0;
  for (double d : diag_) t += d;
  return t;
}

double WeightedLaplacian::maxDiagonal() const {
  double m = 0.0;
  for (double d : diag_) m = std::max(m, d);
  return m;
}

Eigen::MatrixXd WeightedLaplacian::dense() const {
  const int m = size();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) L(i, i) = diag_[static_cast<size_t>(i)];
  for (const auto& [pair, w] : offdiag_) {
    L(pair.first, pair.second) -= w;
    L(pair.second, pair.first) -= w;
  }
  return L;
}

kernels::CsrMatrix WeightedLaplacian::csr() const {
  const int m = size();
  // Accumulate per-row entries (parallel edges merge here).
  std::vector<std::unordered_map<int, double>> rows(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) rows[static_cast<size_t>(i)][i] = diag_[static_cast<size_t>(i)];
  for (const auto& [pair, w] : offdiag_) {
    rows[static_cast<size_t>(pair.first)][pair.second] -= w;
    rows[static_cast<size_t>(pair.second)][pair.first] -= w;
  }
  kernels::CsrMatrix out;
  out.n = m;
  out.row_ptr.resize(static_cast<size_t>(m) + 1, 0);
  for (int i = 0; i < m; ++i) {
    out.row_ptr[static_cast<size_t>(i) + 1] =
        out.row_ptr[static_cast<size_t>(i)] + static_cast<int>(rows[static_cast<size_t>(i)].size());
  }
  out.col.resize(static_cast<size_t>(out.row_ptr[static_cast<size_t>(m)]));
  out.val.resize(out.col.size());
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> sorted(rows[static_cast<size_t>(i)].begin(),
                                               rows[static_cast<size_t>(i)].end());
    std::sort(sorted.begin(), sorted.end());
    int k = out.row_ptr[static_cast<size_t>(i)];
    for (const auto& [c, v] : sorted) {
      out.col[static_cast<size_t>(k)] = c;
      out.val[static_cast<size_t>(k)] = v;
      ++k;
    }
  }
  return out;
}

WeightedLaplacian buildLaplacian(const PoseGraph& g, const std::set<VertexId>& vertex_set,
                                 Weighting weighting) {
  if (vertex_set.empty()) throw Error(ErrorCode::kEmptyVertexSet, "Laplacian needs vertices");
  std::vector<VertexId> order;
  order.reserve(vertex_set.size());
  for (const VertexId& id : vertex_set) {
    if (!g.hasVertex(id)) throw Error(ErrorCode::kUnknownId, "Laplacian vertex not in graph");
    order.push_back(id);
  }
  WeightedLaplacian L(std::move(order), weighting);
  for (const Edge& e : g.edges()) {
    if (e.kind == EdgeKind::kPrior) continue;
    if (!vertex_set.count(e.from) || !vertex_set.count(e.to)) continue;
    L.addEdge(e.from, e.to, edgeWeight(e, weighting));
  }
  return L;
}

double averageNodeDegree(const WeightedLaplacian& L) {
  if (L.size() == 0) return 0.0;
  return L.trace() / L.size();
}

std::vector<double> nodeDegrees(const WeightedLaplacian& L) {
  std::vector<double> out(static_cast<size_t>(L.size()));
  for (int i = 0; i < L.size(); ++i) out[static_cast<size_t>(i)] = L.diagonal(i);
  return out;
}

namespace {

FiedlerResult fiedlerDense(const WeightedLaplacian& L) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L.dense());
  FiedlerResult out;
  out.lambda2 = eig.eigenvalues()(1);
  out.vector = eig.eigenvectors().col(1);
  return out;
}

// Shifted inverse iteration on L + tau I with the ones vector deflated.
FiedlerResult fiedlerIterative(const WeightedLaplacian& L) {
  const int m = L.size();
  const double scale = std::max(L.maxDiagonal(), 1.0);
  const double tau = 1e-6 * scale;

  const kernels::CsrMatrix csr = L.csr();
  Eigen::SparseMatrix<double> A(m, m);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(csr.val.size());
    for (int i = 0; i < m; ++i) {
      for (int k = csr.row_ptr[static_cast<size_t>(i)]; k < csr.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
        double v = csr.val[static_cast<size_t>(k)];
        if (csr.col[static_cast<size_t>(k)] == i) v += tau;
        trips.emplace_back(i, csr.col[static_cast<size_t>(k)], v);
      }
    }
    A.setFromTriplets(trips.begin(), trips.end());
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);

  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  auto deflate = [&](Eigen::VectorXd& x) {
    const double dot = x.sum() * inv_sqrt_m;
    x.array() -= dot * inv_sqrt_m;
  };

  std::vector<double> seed = seedVector(m);
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(seed.data(), m);
  deflate(x);
  x.normalize();

  std::vector<double> xv(static_cast<size_t>(m)), yv;
  double lambda = 0.0;
  for (int it = 0; it < kInverseIterationCap; ++it) {
    Eigen::VectorXd y = solver.solve(x);
    deflate(y);
    const double norm = y.norm();
    if (!(norm > 0.0)) break;
    x = y / norm;
    Eigen::Map<Eigen::VectorXd>(xv.data(), m) = x;
    kernels::matvec(csr, xv, yv);
    const Eigen::Map<Eigen::VectorXd> Lx(yv.data(), m);
    lambda = x.dot(Lx);
    const double resid = (Lx - lambda * x).norm();
    if (resid <= kInverseIterationTol * scale) break;
  }
  FiedlerResult out;
  out.lambda2 = lambda;
  out.vector = x;
  return out;
}

}  // namespace

FiedlerResult fiedler(const WeightedLaplacian& L) {
  const int m = L.size();
  if (m < 2) throw Error(ErrorCode::kTooFewVertices, "Fiedler value needs m >= 2");
  FiedlerResult out = (m <= kDenseEigThreshold) ? fiedlerDense(L) : fiedlerIterative(L);
  const double scale = L.maxDiagonal();
  if (scale <= 0.0 || out.lambda2 <= kConnectivityEps * scale) {
    out.lambda2 = 0.0;
    out.connected = false;
  } else {
    out.connected = true;
  }
  return out;
}

std::vector<Edge> weakestEdges(const PoseGraph& g, const WeightedLaplacian& L) {
  const FiedlerResult f = fiedler(L);
  if (!f.connected) throw Error(ErrorCode::kDisconnected, "weakest edges need a connected graph");
  std::vector<Edge> out;
  for (const Edge& e : g.edges()) {
    if (e.kind == EdgeKind::kPrior) continue;
    const int iu = L.indexOf(e.from);
    const int iv = L.indexOf(e.to);
    if (iu < 0 || iv < 0) continue;
    const bool su = f.vector(iu) >= 0.0;
    const bool sv = f.vector(iv) >= 0.0;
    if (su != sv) out.push_back(e);
  }
  return out;
}

double spanningTreeMeasure(const WeightedLaplacian& L) {
  const int m = L.size();
  if (m < 2) throw Error(ErrorCode::kTooFewVertices, "spanning-tree measure needs m >= 2");
  const double scale = std::max(L.maxDiagonal(), 1e-300);

  double logdet = 0.0;
  if (m <= kDenseEigThreshold) {
    const Eigen::MatrixXd red = L.dense().bottomRightCorner(m - 1, m - 1);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(red);
    const auto& d = ldlt.vectorD();
    for (int i = 0; i < d.size(); ++i) {
      if (!(d(i) > kConnectivityEps * scale)) {
        throw Error(ErrorCode::kDisconnected, "reduced Laplacian is singular");
      }
      logdet += std::log(d(i));
    }
  } else {
    const kernels::CsrMatrix csr = L.csr();
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 1; i < m; ++i) {
      for (int k = csr.row_ptr[static_cast<size_t>(i)]; k < csr.row_ptr[static_cast<size_t>(i) + 1]; ++k) {
        const int c = csr.col[static_cast<size_t>(k)];
        if (c >= 1) trips.emplace_back(i - 1, c - 1, csr.val[static_cast<size_t>(k)]);
      }
    }
    Eigen::SparseMatrix<double> red(m - 1, m - 1);
    red.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(red);
    if (ldlt.info() != Eigen::Success) {
      throw Error(ErrorCode::kDisconnected, "reduced Laplacian factorization failed");
    }
    const auto& d = ldlt.vectorD();
    for (int i = 0; i < d.size(); ++i) {
      if (!(d(i) > kConnectivityEps * scale)) {
        throw Error(ErrorCode::kDisconnected, "reduced Laplacian is singular");
      }
      logdet += std::log(d(i));
    }
  }
  return std::exp(logdet / (m - 1));
}

SpectralReport spectralReport(const PoseGraph& g, const std::set<VertexId>& vertex_set,
                              Weighting weighting) {
  const WeightedLaplacian L = buildLaplacian(g, vertex_set, weighting);
  SpectralReport report;
  report.m = L.size();
  report.d_bar = averageNodeDegree(L);
  report.vertex_order = L.vertexOrder();
  report.node_degrees = nodeDegrees(L);
  if (report.m >= 2) {
    const FiedlerResult f = fiedler(L);
    report.lambda2_bar = f.lambda2;
    report.connected = f.connected;
    report.fiedler_vector = f.vector;
    if (f.connected) {
      report.spanning_tree_log = std::log(spanningTreeMeasure(L));
    }
  } else {
    report.connected = report.m == 1;
  }
  return report;
}

}  // namespace mslam
