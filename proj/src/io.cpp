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
#include "mslam/io.hpp"

#include <Eigen/Geometry>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mslam::io {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Full precision: doubles survive a text round trip bit-exactly, which the
// graph exchange format requires (quaternions are renormalized on parse, so
// any quantization would drift).
std::string fmtExact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string poseFields(const Pose& p, bool exact = false) {
  auto f = [exact](double v) { return exact ? fmtExact(v) : fmt(v); };
  const Eigen::Vector3d& t = p.translation();
  const Eigen::Quaterniond& q = p.rotation();
  std::ostringstream out;
  out << f(t.x()) << ' ' << f(t.y()) << ' ' << f(t.z()) << ' ' << f(q.x()) << ' ' << f(q.y())
      << ' ' << f(q.z()) << ' ' << f(q.w());
  return out.str();
}

Pose parsePoseFields(const std::vector<double>& v, size_t offset) {
  return Pose(Eigen::Quaterniond(v[offset + 6], v[offset + 3], v[offset + 4], v[offset + 5]),
              Eigen::Vector3d(v[offset], v[offset + 1], v[offset + 2]));
}

std::vector<double> numbersAfter(const std::string& line, size_t skip_tokens, int line_no) {
  std::istringstream in(line);
  std::string tok;
  for (size_t i = 0; i < skip_tokens; ++i) in >> tok;
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) {
    throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no) + ": non-numeric field");
  }
  return out;
}

Matrix6d infoFromUpper(const std::vector<double>& v, size_t offset) {
  Matrix6d omega;
  size_t k = offset;
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) {
      omega(r, c) = v[k];
      omega(c, r) = v[k];
      ++k;
    }
  }
  return omega;
}

}  // namespace

std::string serializeGraph(const PoseGraph& g) {
  // Flat ids follow sorted (session, index) order.
  std::vector<VertexId> ids = g.sortedIds();
  std::unordered_map<VertexId, int, VertexIdHash> flat;
  for (size_t i = 0; i < ids.size(); ++i) flat[ids[i]] = static_cast<int>(i);
  std::ostringstream out;
  for (const VertexId& id : ids) {
    out << "VERTEX_SE3:QUAT " << flat[id] << ' ' << poseFields(g.vertex(id).pose, true) << '\n';
  }
  for (const Edge& e : g.edges()) {
    out << "EDGE_SE3:QUAT " << flat[e.from] << ' ' << flat[e.to] << ' '
        << poseFields(e.measurement, true);
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) out << ' ' << fmtExact(e.information(r, c));
    }
    out << '\n';
  }
  return out.str();
}

ParseResult parseGraph(const std::string& text) {
  ParseResult result;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  struct RawEdge {
    int from, to;
    Pose meas;
    Matrix6d omega;
  };
  std::vector<std::pair<int, Pose>> raw_vertices;
  std::vector<RawEdge> raw_edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "VERTEX_SE3:QUAT") {
      const std::vector<double> v = numbersAfter(line, 1, line_no);
      if (v.size() != 8) {
        throw Error(ErrorCode::kMalformedRecord,
                    "line " + std::to_string(line_no) + ": vertex needs id + 7 fields");
      }
      raw_vertices.push_back({static_cast<int>(v[0]), parsePoseFields(v, 1)});
    } else if (tag == "EDGE_SE3:QUAT") {
      const std::vector<double> v = numbersAfter(line, 1, line_no);
      if (v.size() != 2 + 7 + 21) {
        throw Error(ErrorCode::kMalformedRecord,
                    "line " + std::to_string(line_no) + ": edge needs 2 ids + 7 pose + 21 info fields");
      }
      RawEdge e{static_cast<int>(v[0]), static_cast<int>(v[1]), parsePoseFields(v, 2),
                infoFromUpper(v, 9)};
      if (!isSpdInformation(e.omega)) {
        throw Error(ErrorCode::kNonSpdInformation,
                    "line " + std::to_string(line_no) + ": information not SPD");
      }
      raw_edges.push_back(e);
    } else {
      ++result.warnings;
    }
  }
  // Without a manifest everything lands in session 0 as REFERENCE; kinds are
  // inferred (unary -> PRIOR, consecutive -> INTRA, otherwise LOOP).
  for (const auto& [id, pose] : raw_vertices) {
    Vertex v;
    v.id = {0, id};
    v.pose = pose;
    v.role = VertexRole::kReference;
    result.graph.addVertex(v);
  }
  for (const RawEdge& raw : raw_edges) {
    Edge e;
    e.from = {0, raw.from};
    e.to = {0, raw.to};
    e.measurement = raw.meas;
    e.information = raw.omega;
    if (raw.from == raw.to) {
      e.kind = EdgeKind::kPrior;
    } else if (raw.to == raw.from + 1) {
      e.kind = EdgeKind::kIntra;
    } else {
      e.kind = EdgeKind::kLoop;
    }
    // INTRA between REFERENCE vertices is legal; LOOP needs REFERENCE roles,
    // which the flat import guarantees.
    result.graph.addEdge(e);
  }
  return result;
}

Manifest manifestFor(const PoseGraph& g) {
  Manifest m;
  m.vertex_ids = g.sortedIds();
  for (const VertexId& id : m.vertex_ids) {
    m.vertex_roles.push_back(g.vertex(id).role);
    m.vertex_truths.push_back(g.vertex(id).truth);
    if (!m.session_labels.count(id.session)) {
      m.session_labels[id.session] = "session_" + std::to_string(id.session);
    }
  }
  for (const Edge& e : g.edges()) m.edge_kinds.push_back(e.kind);
  return m;
}

std::string serializeManifest(const PoseGraph& g, const Manifest& extra) {
  Manifest m = manifestFor(g);
  m.session_labels.insert(extra.session_labels.begin(), extra.session_labels.end());
  for (const auto& [k, v] : extra.session_labels) m.session_labels[k] = v;
  m.config_echo = extra.config_echo;
  m.seed = extra.seed;

  nlohmann::json j;
  j["seed"] = m.seed;
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& [id, label] : m.session_labels) {
    sessions.push_back({{"id", id}, {"label", label}});
  }
  j["sessions"] = sessions;
  nlohmann::json vertices = nlohmann::json::array();
  for (size_t i = 0; i < m.vertex_ids.size(); ++i) {
    nlohmann::json v = {{"flat", i},
                        {"session", m.vertex_ids[i].session},
                        {"index", m.vertex_ids[i].index},
                        {"role", vertexRoleName(m.vertex_roles[i])}};
    if (i < m.vertex_truths.size() && m.vertex_truths[i]) {
      const Pose& t = *m.vertex_truths[i];
      v["truth"] = {t.translation().x(),  t.translation().y(),  t.translation().z(),
                    t.rotation().x(),     t.rotation().y(),     t.rotation().z(),
                    t.rotation().w()};
    }
    vertices.push_back(v);
  }
  j["vertices"] = vertices;
  nlohmann::json kinds = nlohmann::json::array();
  for (EdgeKind k : m.edge_kinds) kinds.push_back(edgeKindName(k));
  j["edge_kinds"] = kinds;
  j["config"] = m.config_echo;
  return j.dump(2) + "\n";
}

namespace {

VertexRole roleFromName(const std::string& name) {
  if (name == "ACTIVE") return VertexRole::kActive;
  if (name == "RETAINED") return VertexRole::kRetained;
  if (name == "REFERENCE") return VertexRole::kReference;
  throw Error(ErrorCode::kMalformedRecord, "unknown vertex role " + name);
}

EdgeKind kindFromName(const std::string& name) {
  if (name == "INTRA") return EdgeKind::kIntra;
  if (name == "INTER") return EdgeKind::kInter;
  if (name == "LOOP") return EdgeKind::kLoop;
  if (name == "PRIOR") return EdgeKind::kPrior;
  throw Error(ErrorCode::kMalformedRecord, "unknown edge kind " + name);
}

}  // namespace

Manifest parseManifest(const std::string& text) {
  Manifest m;
  nlohmann::json j = nlohmann::json::parse(text);
  m.seed = j.value("seed", 0ULL);
  for (const auto& s : j.value("sessions", nlohmann::json::array())) {
    m.session_labels[s.at("id").get<int>()] = s.at("label").get<std::string>();
  }
  for (const auto& v : j.value("vertices", nlohmann::json::array())) {
    m.vertex_ids.push_back({v.at("session").get<int>(), v.at("index").get<int>()});
    m.vertex_roles.push_back(roleFromName(v.at("role").get<std::string>()));
    if (v.contains("truth")) {
      std::vector<double> t = v.at("truth").get<std::vector<double>>();
      if (t.size() != 7) throw Error(ErrorCode::kMalformedRecord, "truth needs 7 fields");
      m.vertex_truths.push_back(Pose(Eigen::Quaterniond(t[6], t[3], t[4], t[5]),
                                     Eigen::Vector3d(t[0], t[1], t[2])));
    } else {
      m.vertex_truths.push_back(std::nullopt);
    }
  }
  for (const auto& k : j.value("edge_kinds", nlohmann::json::array())) {
    m.edge_kinds.push_back(kindFromName(k.get<std::string>()));
  }
  if (j.contains("config")) {
    for (const auto& [k, v] : j.at("config").items()) {
      m.config_echo[k] = v.get<std::string>();
    }
  }
  return m;
}

PoseGraph applyManifest(const PoseGraph& flat, const Manifest& manifest) {
  const std::vector<VertexId> flat_ids = flat.sortedIds();
  if (flat_ids.size() != manifest.vertex_ids.size() ||
      flat.edgeCount() != manifest.edge_kinds.size()) {
    throw Error(ErrorCode::kMalformedRecord, "manifest does not cover the graph file");
  }
  std::unordered_map<VertexId, VertexId, VertexIdHash> remap;
  PoseGraph out;
  for (size_t i = 0; i < flat_ids.size(); ++i) {
    Vertex v = flat.vertex(flat_ids[i]);
    remap[v.id] = manifest.vertex_ids[i];
    v.id = manifest.vertex_ids[i];
    v.role = manifest.vertex_roles[i];
    if (i < manifest.vertex_truths.size()) v.truth = manifest.vertex_truths[i];
    out.addVertex(v);
  }
  for (size_t i = 0; i < flat.edgeCount(); ++i) {
    Edge e = flat.edge(i);
    e.from = remap.at(e.from);
    e.to = remap.at(e.to);
    e.kind = manifest.edge_kinds[i];
    out.addEdge(e);
  }
  return out;
}

std::string serializeMetrics(const std::vector<MetricsRow>& rows, bool deterministic) {
  std::ostringstream out;
  out << "keyframe,session,index,mode,d_bar_trace,lambda2_eig,mu,sigma,event,wall_ms\n";
  for (const MetricsRow& r : rows) {
    out << r.keyframe << ',' << r.session << ',' << r.index << ',' << modeName(r.mode) << ','
        << fmt(r.d_bar) << ',' << (r.lambda2 ? fmt(*r.lambda2) : std::string("NA")) << ','
        << fmt(r.mu) << ',' << fmt(r.sigma) << ',' << decisionEventName(r.event) << ','
        << fmt(deterministic ? 0.0 : r.wall_ms) << '\n';
  }
  return out.str();
}

std::string serializeTrajectory(const std::vector<TrajectoryEntry>& entries, bool truth) {
  std::ostringstream out;
  for (const TrajectoryEntry& e : entries) {
    if (truth && !e.truth) continue;
    out << fmt(e.timestamp) << ' ' << poseFields(truth ? *e.truth : e.estimate) << '\n';
  }
  return out.str();
}

std::vector<std::pair<double, Pose>> parseTrajectory(const std::string& text) {
  std::vector<std::pair<double, Pose>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::vector<double> v = numbersAfter(line, 0, line_no);
    if (v.size() != 8) {
      throw Error(ErrorCode::kMalformedRecord,
                  "line " + std::to_string(line_no) + ": trajectory rows need 8 fields");
    }
    out.push_back({v[0], parsePoseFields(v, 1)});
  }
  return out;
}

std::string serializeStream(const SessionStream& stream) {
  std::ostringstream out;
  out << "# mslam session stream v1\n";
  out << "SESSION " << stream.session << ' '
      << (stream.label.empty() ? "unnamed" : stream.label) << '\n';
  out << "START " << poseFields(stream.start) << '\n';
  for (const KeyframeEvent& e : stream.events) {
    out << "KF " << fmt(e.timestamp) << ' ' << poseFields(e.odometry);
    for (int i = 0; i < 6; ++i) out << ' ' << fmt(e.odom_information(i, i));
    if (e.truth) {
      out << " T " << poseFields(*e.truth);
    }
    out << '\n';
  }
  return out.str();
}

SessionStream parseStream(const std::string& text) {
  SessionStream stream;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "SESSION") {
      ls >> stream.session >> stream.label;
    } else if (tag == "START") {
      const std::vector<double> v = numbersAfter(line, 1, line_no);
      if (v.size() != 7) throw Error(ErrorCode::kMalformedRecord, "bad START record");
      stream.start = parsePoseFields(v, 0);
    } else if (tag == "KF") {
      // KF t odom(7) info_diag(6) [T truth(7)]
      std::istringstream fs(line);
      std::string tok;
      fs >> tok;
      std::vector<double> head;
      double v;
      while (fs >> v) head.push_back(v);
      bool has_truth = false;
      std::vector<double> truth_fields;
      if (fs.fail() && !fs.eof()) {
        fs.clear();
        fs >> tok;
        if (tok != "T") {
          throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no) + ": bad KF row");
        }
        double tv;
        while (fs >> tv) truth_fields.push_back(tv);
        has_truth = true;
      }
      if (head.size() != 14 || (has_truth && truth_fields.size() != 7)) {
        throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no) + ": bad KF row");
      }
      KeyframeEvent e;
      e.session = stream.session;
      e.timestamp = head[0];
      e.odometry = parsePoseFields(head, 1);
      e.odom_information = Matrix6d::Zero();
      for (int i = 0; i < 6; ++i) e.odom_information(i, i) = head[8 + static_cast<size_t>(i)];
      if (has_truth) e.truth = parsePoseFields(truth_fields, 0);
      stream.events.push_back(e);
    }
  }
  return stream;
}

std::map<std::string, std::string> parseConfig(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

std::string serializeConfig(const std::map<std::string, std::string>& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  return out.str();
}

double evaluateAte(const std::vector<Pose>& estimate, const std::vector<Pose>& truth) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorCode::kDegenerateAlignment, "trajectory lengths differ");
  }
  const size_t n = estimate.size();
  if (n < 3) throw Error(ErrorCode::kDegenerateAlignment, "need >= 3 poses");
  Eigen::MatrixXd src(3, static_cast<long>(n)), dst(3, static_cast<long>(n));
  for (size_t i = 0; i < n; ++i) {
    src.col(static_cast<long>(i)) = estimate[i].translation();
    dst.col(static_cast<long>(i)) = truth[i].translation();
  }
  // Collinear positions leave the alignment rotation unconstrained.
  {
    const Eigen::Vector3d mean = dst.rowwise().mean();
    Eigen::MatrixXd centered = dst.colwise() - mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const auto& sv = svd.singularValues();
    if (sv.size() < 2 || sv(1) <= 1e-9 * std::max(sv(0), 1.0)) {
      throw Error(ErrorCode::kDegenerateAlignment, "positions are collinear");
    }
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, /*with_scaling=*/false);
  const Eigen::Matrix3d R = T.topLeftCorner<3, 3>();
  const Eigen::Vector3d t = T.topRightCorner<3, 1>();
  double sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d aligned = R * src.col(static_cast<long>(i)) + t;
    sq += (aligned - dst.col(static_cast<long>(i))).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(n));
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMalformedRecord, "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void writeFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kMalformedRecord, "cannot write " + path);
  out << content;
}

}  // namespace mslam::io
