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
#include "mslam/pipeline.hpp"

#include <algorithm>
#include <chrono>

namespace mslam {

void PipelineConfig::validate() const {
  if (window_size < 2) throw Error(ErrorCode::kInvalidConfig, "window_size must be >= 2");
  if (association_radius <= 0.0 || lc_radius <= 0.0 || metric_radius <= 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "radii must be positive");
  }
  if (retention_age <= window_size) {
    throw Error(ErrorCode::kInvalidConfig, "retention_age must exceed window_size");
  }
  decision.validate();
}

SimMatcher::SimMatcher(const World& world, const NoiseModel& noise)
    : world_(world),
      noise_(noise),
      assoc_rng_(world.seed ^ 0xa5a5a5a5a5a5a5a5ULL),
      pair_rng_(world.seed ^ 0x5a5a5a5a5a5a5a5aULL) {}

std::optional<std::pair<Pose, Matrix6d>> SimMatcher::matchToReference(const Vertex& query,
                                                                      const Vertex& ref) {
  if (!query.truth || !ref.truth) return std::nullopt;
  return oracleMatch(world_, noise_, *query.truth, *ref.truth, assoc_rng_, /*pair_mode=*/false);
}

std::optional<std::pair<Pose, Matrix6d>> SimMatcher::matchPair(const Vertex& a, const Vertex& b) {
  if (!a.truth || !b.truth) return std::nullopt;
  return oracleMatch(world_, noise_, *a.truth, *b.truth, pair_rng_, /*pair_mode=*/true);
}

Pipeline::Pipeline(const PipelineConfig& config, std::shared_ptr<Matcher> matcher)
    : config_(config), matcher_(std::move(matcher)), decision_(config.decision) {
  config_.validate();
  if (!config_.deterministic) startWorker();
}

Pipeline::~Pipeline() { stopWorker(); }

void Pipeline::loadPrior(const PoseGraph& prior) {
  for (const Vertex& v : prior.vertices()) {
    Vertex ref = v;
    ref.role = VertexRole::kReference;
    graph_.addVertex(ref);
    reference_ids_.push_back(ref.id);
  }
  for (const Edge& e : prior.edges()) graph_.addEdge(e);
  std::sort(reference_ids_.begin(), reference_ids_.end());
}

void Pipeline::beginSession(int session, const std::string& label, const Pose& start) {
  if (in_session_) endSession();
  session_labels_[session] = label;
  session_ = session;
  next_index_ = 0;
  previous_.reset();
  session_start_ = start;
  in_session_ = true;
  // Fresh statistics per session. With no prior model the whole session runs
  // in mapping mode and merges continuously.
  if (reference_ids_.empty() && config_.mapping_enabled) {
    decision_ = DecisionState::bootstrapMapping(config_.decision);
    lc_active_ = true;
  } else {
    decision_ = DecisionState(config_.decision);
    lc_active_ = false;
  }
}

// Gauge anchors must be at least as stiff as the measurements, otherwise
// the global mode floats at solver precision below the data scale.
double Pipeline::anchorInformation() const {
  double scale = config_.prior_information;
  for (const Edge& e : graph_.edges()) {
    scale = std::max(scale, e.information.diagonal().maxCoeff());
  }
  return scale;
}

void Pipeline::bootstrapAnchor(VertexId id, const Pose& pose) {
  Edge prior;
  prior.from = id;
  prior.to = id;
  prior.kind = EdgeKind::kPrior;
  prior.measurement = pose;
  prior.information = anchorInformation() * Matrix6d::Identity();
  graph_.addEdge(prior);
}

KeyframeReport Pipeline::ingest(const KeyframeEvent& event) {
  if (!in_session_ || event.session != session_) {
    throw Error(ErrorCode::kInvalidConfig, "ingest outside of a session");
  }
  const auto t_start = std::chrono::steady_clock::now();
  lambda2_memo_.reset();

  // 1. New vertex at the odometry-predicted pose, chained by an INTRA edge.
  Vertex v;
  v.id = {session_, next_index_++};
  v.timestamp = event.timestamp;
  v.role = VertexRole::kActive;
  v.truth = event.truth;
  if (previous_) {
    v.pose = compose(graph_.vertex(*previous_).pose, event.odometry);
  } else {
    v.pose = session_start_;
  }
  graph_.addVertex(v);
  if (previous_) {
    Edge intra;
    intra.from = *previous_;
    intra.to = v.id;
    intra.kind = EdgeKind::kIntra;
    intra.measurement = event.odometry;
    intra.information = event.odom_information;
    graph_.addEdge(intra);
  } else if (reference_ids_.empty()) {
    bootstrapAnchor(v.id, v.pose);
  }
  window_.push_back(v.id);
  previous_ = v.id;

  TrajectoryEntry entry;
  entry.session = v.id.session;
  entry.index = v.id.index;
  entry.timestamp = v.timestamp;
  entry.estimate = v.pose;
  entry.truth = v.truth;
  trajectory_index_[v.id] = trajectory_.size();
  trajectory_.push_back(entry);

  // 2. Inter-session association against nearby reference vertices.
  const int inter_added = associate(graph_.vertex(v.id));

  // 3. Window optimization (reference fixed) or joint optimization in
  // mapping mode.
  if (decision_.mode() == Mode::kMapping && config_.mapping_enabled) {
    mappingLocalOptimize();
  } else {
    optimizeWindow();
  }

  // 4. Slide the window; prune retained vertices outside mapping mode.
  slideWindow();
  int merged = 0;
  if (decision_.mode() == Mode::kMapping && config_.mapping_enabled) {
    merged = mergeCandidates();
  } else {
    pruneRetained();
  }

  // 5. Decision metrics and mode switching.
  const double d_bar = computeDbar();
  DecisionEvent decision_event = DecisionEvent::kNone;
  if (config_.mapping_enabled) {
    decision_event = decision_.step(d_bar, [this]() { return computeLambda2(); });
    if (decision_event != DecisionEvent::kNone) handleEvent(decision_event);
  } else {
    // Ablation: track statistics but never switch modes.
    const DecisionState before = decision_;
    if (decision_.step(d_bar, []() { return 1.0; }) != DecisionEvent::kNone) {
      decision_ = before;
    }
  }

  // 6. Synchronous loop-closure pass (deterministic mode) or harvest of the
  // worker's proposals.
  if (lc_active_ && config_.mapping_enabled) runLoopClosureSync();

  const auto t_end = std::chrono::steady_clock::now();

  MetricsRow row;
  row.keyframe = keyframe_counter_++;
  row.session = v.id.session;
  row.index = v.id.index;
  row.mode = decision_.mode();
  row.d_bar = d_bar;
  row.lambda2 = decision_.lastLambda2();
  row.mu = decision_.mean();
  row.sigma = decision_.stddev();
  row.event = decision_event;
  row.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
  metrics_.push_back(row);

  KeyframeReport report;
  report.id = v.id;
  report.mode = decision_.mode();
  report.event = decision_event;
  report.d_bar = d_bar;
  report.lambda2 = decision_.lastLambda2();
  report.inter_edges = inter_added;
  report.merged = merged;
  report.estimate = graph_.vertex(v.id).pose;
  return report;
}

int Pipeline::associate(const Vertex& query) {
  if (reference_ids_.empty()) return 0;
  const Eigen::Vector3d p = query.pose.translation();
  std::vector<VertexId> hits;
  for (const VertexId& rid : reference_ids_) {
    if ((graph_.vertex(rid).pose.translation() - p).norm() <= config_.association_radius) {
      hits.push_back(rid);
    }
  }
  // Expand each hit with its k-neighbors along reference INTRA/LOOP
  // adjacency.
  std::set<VertexId> targets(hits.begin(), hits.end());
  for (const VertexId& hit : hits) {
    std::deque<std::pair<VertexId, int>> queue{{hit, 0}};
    std::set<VertexId> visited{hit};
    while (!queue.empty()) {
      const auto [cur, depth] = queue.front();
      queue.pop_front();
      if (depth >= config_.k_neighbors) continue;
      for (EdgeId eid : graph_.incidentEdges(cur)) {
        const Edge& e = graph_.edge(eid);
        if (e.kind != EdgeKind::kIntra && e.kind != EdgeKind::kLoop) continue;
        const VertexId next = (e.from == cur) ? e.to : e.from;
        if (next == cur) continue;
        if (graph_.vertex(next).role != VertexRole::kReference) continue;
        if (!visited.insert(next).second) continue;
        targets.insert(next);
        queue.push_back({next, depth + 1});
      }
    }
  }
  int added = 0;
  for (const VertexId& target : targets) {
    const auto match = matcher_->matchToReference(query, graph_.vertex(target));
    if (!match) continue;
    Edge inter;
    inter.from = query.id;
    inter.to = target;
    inter.kind = EdgeKind::kInter;
    inter.measurement = match->first;
    inter.information = match->second;
    graph_.addEdge(inter);
    ++added;
  }
  return added;
}

void Pipeline::anchorProblem(OptimizationProblem& problem) const {
  const auto reps = unanchoredComponents(problem);
  if (reps.empty()) return;
  const double info = anchorInformation();
  for (const VertexId& rep : reps) {
    Edge prior;
    prior.from = rep;
    prior.to = rep;
    prior.kind = EdgeKind::kPrior;
    prior.measurement = graph_.vertex(rep).pose;
    prior.information = info * Matrix6d::Identity();
    problem.extra_priors.push_back(prior);
  }
}

void Pipeline::optimizeWindow() {
  OptimizationProblem problem;
  problem.graph = &graph_;
  problem.convergence = config_.convergence;
  for (const VertexId& id : window_) problem.free.insert(id);
  for (const VertexId& id : window_) {
    for (EdgeId eid : graph_.incidentEdges(id)) {
      const Edge& e = graph_.edge(eid);
      for (const VertexId& other : {e.from, e.to}) {
        if (!problem.free.count(other) && graph_.vertex(other).role == VertexRole::kReference) {
          problem.fixed.insert(other);
        }
      }
    }
  }
  anchorProblem(problem);
  applyResult(optimize(problem));
}

void Pipeline::globalOptimize() {
  OptimizationProblem problem;
  problem.graph = &graph_;
  problem.convergence = config_.convergence;
  for (const VertexId& id : window_) problem.free.insert(id);
  for (const VertexId& id : reference_ids_) problem.free.insert(id);
  anchorProblem(problem);
  applyResult(optimize(problem));
}

// Per-keyframe joint optimization in mapping mode: the window plus the
// reference frontier near the robot move; the settled remainder of the
// model stays fixed. Full global optimization runs per loop-closure batch
// and at mapping exit.
void Pipeline::mappingLocalOptimize() {
  OptimizationProblem problem;
  problem.graph = &graph_;
  problem.convergence = config_.convergence;
  for (const VertexId& id : window_) problem.free.insert(id);
  if (!window_.empty()) {
    const Eigen::Vector3d p = graph_.vertex(window_.back()).pose.translation();
    for (const VertexId& rid : reference_ids_) {
      if ((graph_.vertex(rid).pose.translation() - p).norm() <= config_.metric_radius) {
        problem.free.insert(rid);
      }
    }
  }
  for (const VertexId& id : problem.free) {
    for (EdgeId eid : graph_.incidentEdges(id)) {
      const Edge& e = graph_.edge(eid);
      for (const VertexId& other : {e.from, e.to}) {
        if (!problem.free.count(other) &&
            graph_.vertex(other).role == VertexRole::kReference) {
          problem.fixed.insert(other);
        }
      }
    }
  }
  anchorProblem(problem);
  applyResult(optimize(problem));
}

void Pipeline::applyResult(const OptimizationResult& result) {
  for (const auto& [id, pose] : result.poses) {
    graph_.vertex(id).pose = pose;
    updateTrajectory(id);
  }
}

void Pipeline::updateTrajectory(VertexId id) {
  auto it = trajectory_index_.find(id);
  if (it != trajectory_index_.end()) trajectory_[it->second].estimate = graph_.vertex(id).pose;
}

void Pipeline::retire(VertexId id) {
  graph_.vertex(id).role = VertexRole::kRetained;
  retired_at_[id] = keyframe_counter_;
  if (decision_.mode() == Mode::kMapping && config_.mapping_enabled) {
    pending_.push_back(id);
  }
}

void Pipeline::slideWindow() {
  while (static_cast<int>(window_.size()) > config_.window_size) {
    const VertexId oldest = window_.front();
    window_.pop_front();
    retire(oldest);
  }
}

void Pipeline::pruneRetained() {
  const VertexId newest = window_.back();
  std::vector<VertexId> to_drop;
  for (const auto& [id, at] : retired_at_) {
    if (!graph_.hasVertex(id)) continue;
    if (graph_.vertex(id).role != VertexRole::kRetained) continue;
    bool drop = keyframe_counter_ - at > config_.retention_age;
    if (!drop) {
      const auto dist = graph_.graphDistance(newest, id);
      drop = !dist.has_value() || *dist > config_.retention_distance;
    }
    if (drop) to_drop.push_back(id);
  }
  std::sort(to_drop.begin(), to_drop.end());
  for (const VertexId& id : to_drop) dropVertex(id);
}

void Pipeline::dropVertex(VertexId id) {
  graph_.removeVertex(id);
  retired_at_.erase(id);
  pending_.erase(std::remove(pending_.begin(), pending_.end(), id), pending_.end());
}

// A candidate is redundant when it is strongly covered by the existing
// model. Weakly covered candidates (few inter-session constraints) merge:
// they reinforce thin coverage and carry the junction information the
// loop-closure search builds on.
bool Pipeline::candidateRedundant(VertexId id) const {
  int inter = 0;
  for (EdgeId eid : graph_.incidentEdges(id)) {
    if (graph_.edge(eid).kind == EdgeKind::kInter) ++inter;
  }
  return inter > config_.reinforce_max_inter;
}

// True when the candidate's reference attachments span more than one
// connected component of the reference subgraph restricted to a ball of
// metric_radius around the candidate. Such a candidate carries the only
// nearby link between two map parts (a junction); dropping it would leave
// the joint graph locally split, so it merges instead.
bool Pipeline::candidateBridges(VertexId id) const {
  const Eigen::Vector3d center = graph_.vertex(id).pose.translation();
  std::unordered_map<VertexId, VertexId, VertexIdHash> parent;
  for (const VertexId& rid : reference_ids_) {
    if ((graph_.vertex(rid).pose.translation() - center).norm() <= config_.metric_radius) {
      parent[rid] = rid;
    }
  }
  std::function<VertexId(VertexId)> find = [&](VertexId a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Edge& e : graph_.edges()) {
    if (e.from == e.to) continue;
    if (!parent.count(e.from) || !parent.count(e.to)) continue;
    parent[find(e.from)] = find(e.to);
  }
  std::set<VertexId> roots;
  for (EdgeId eid : graph_.incidentEdges(id)) {
    const Edge& e = graph_.edge(eid);
    if (e.from == e.to) continue;
    const VertexId other = (e.from == id) ? e.to : e.from;
    if (parent.count(other)) roots.insert(find(other));
  }
  return roots.size() > 1;
}

int Pipeline::mergeCandidates() {
  int merged_total = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::sort(pending_.begin(), pending_.end());
    std::set<VertexId> pending_set(pending_.begin(), pending_.end());

    // Resolve redundant candidates lazily: a covered candidate is dropped
    // once its chain successor is also known to be covered, kept as a
    // gateway when the chain transitions to new ground on either side.
    std::vector<VertexId> keep;
    std::vector<VertexId> drop;
    for (const VertexId& id : pending_) {
      if (!candidateRedundant(id)) {
        keep.push_back(id);
        continue;
      }
      const VertexId succ{id.session, id.index + 1};
      const VertexId pred{id.session, id.index - 1};
      const bool succ_new_ground =
          (pending_set.count(succ) && !candidateRedundant(succ)) || episode_new_refs_.count(succ);
      const bool pred_new_ground =
          (pending_set.count(pred) && !candidateRedundant(pred)) || episode_new_refs_.count(pred);
      if (succ_new_ground || pred_new_ground) {
        keep.push_back(id);  // gateway
        continue;
      }
      if (pending_set.count(succ) && candidateRedundant(succ)) {
        if (candidateBridges(id)) {
          keep.push_back(id);  // locally reconnects two map parts
        } else {
          drop.push_back(id);  // interior of a covered stretch
        }
      }
      // Otherwise the successor's fate is still unknown; wait.
    }
    for (const VertexId& id : drop) {
      dropVertex(id);
      changed = true;
    }

    // Merge keepable candidates whose component attaches to the reference.
    std::set<VertexId> keep_set(keep.begin(), keep.end());
    for (const VertexId& id : keep) {
      if (!keep_set.count(id)) continue;
      // Collect the candidate component of `id` (within keep_set).
      std::set<VertexId> component{id};
      std::deque<VertexId> queue{id};
      bool attached = false;
      bool has_prior = false;
      while (!queue.empty()) {
        const VertexId cur = queue.front();
        queue.pop_front();
        for (EdgeId eid : graph_.incidentEdges(cur)) {
          const Edge& e = graph_.edge(eid);
          if (e.kind == EdgeKind::kPrior) {
            has_prior = true;
            continue;
          }
          const VertexId other = (e.from == cur) ? e.to : e.from;
          if (graph_.vertex(other).role == VertexRole::kReference) attached = true;
          if (keep_set.count(other) && !component.count(other)) {
            component.insert(other);
            queue.push_back(other);
          }
        }
      }
      const bool mergeable = attached || (reference_ids_.empty() && has_prior);
      if (!mergeable) continue;
      for (const VertexId& member : component) {
        graph_.vertex(member).role = VertexRole::kReference;
        reference_ids_.push_back(member);
        retired_at_.erase(member);
        pending_.erase(std::remove(pending_.begin(), pending_.end(), member), pending_.end());
        keep_set.erase(member);
        if (!candidateRedundant(member)) episode_new_refs_.insert(member);
        lc_queue_.push_back(member);
        ++merged_total;
      }
      std::sort(reference_ids_.begin(), reference_ids_.end());
      changed = true;
    }
  }
  return merged_total;
}

double Pipeline::computeDbar() {
  const std::set<VertexId> view = localMetricSet();
  if (view.empty()) return 0.0;
  const WeightedLaplacian L = buildLaplacian(graph_, view, Weighting::kFimTrace);
  return averageNodeDegree(L);
}

double Pipeline::computeLambda2() {
  if (lambda2_memo_) return *lambda2_memo_;
  // The connectivity criterion is global: the joint graph over the active
  // window and the whole reference model (retained vertices excluded).
  std::set<VertexId> view;
  for (const VertexId& id : window_) view.insert(id);
  for (const VertexId& id : reference_ids_) view.insert(id);
  double value = 0.0;
  if (view.size() >= 2) {
    const WeightedLaplacian L = buildLaplacian(graph_, view, Weighting::kFimMinEig);
    ++eigensolve_count_;
    value = fiedler(L).lambda2;
  }
  lambda2_memo_ = value;
  return value;
}

std::set<VertexId> Pipeline::localMetricSet() const {
  std::set<VertexId> view;
  for (const VertexId& id : window_) view.insert(id);
  if (!window_.empty()) {
    const Eigen::Vector3d p = graph_.vertex(window_.back()).pose.translation();
    for (const VertexId& rid : reference_ids_) {
      if ((graph_.vertex(rid).pose.translation() - p).norm() <= config_.metric_radius) {
        view.insert(rid);
      }
    }
  }
  return view;
}

PoseGraph Pipeline::jointMetricGraph() const {
  std::set<VertexId> ids;
  for (const Vertex& v : graph_.vertices()) {
    if (v.role == VertexRole::kActive || v.role == VertexRole::kReference) ids.insert(v.id);
  }
  PoseGraph out;
  for (const Vertex& v : graph_.vertices()) {
    if (ids.count(v.id)) out.addVertex(v);
  }
  for (const Edge& e : graph_.edges()) {
    if (e.kind == EdgeKind::kPrior) continue;
    if (ids.count(e.from) && ids.count(e.to)) out.addEdge(e);
  }
  return out;
}

void Pipeline::handleEvent(DecisionEvent event) {
  switch (event) {
    case DecisionEvent::kEnterMappingDisconnect:
    case DecisionEvent::kEnterMappingDegraded: {
      episode_new_refs_.clear();
      // All retained vertices form the candidate graph.
      std::vector<VertexId> retained;
      for (const Vertex& v : graph_.vertices()) {
        if (v.role == VertexRole::kRetained) retained.push_back(v.id);
      }
      std::sort(retained.begin(), retained.end());
      pending_ = retained;
      lc_active_ = true;
      mergeCandidates();
      break;
    }
    case DecisionEvent::kExitMapping: {
      // Final merge and loop-closure pass, then exactly one global
      // optimization over the joint graph.
      mergeCandidates();
      // Remaining covered candidates have no future successor; drop them.
      std::vector<VertexId> leftovers = pending_;
      for (const VertexId& id : leftovers) {
        if (candidateRedundant(id)) dropVertex(id);
      }
      runLoopClosureSync(/*optimize_after=*/false);
      globalOptimize();
      lc_active_ = false;
      episode_new_refs_.clear();
      break;
    }
    case DecisionEvent::kNone:
      break;
  }
}

std::vector<Pipeline::LoopProposal> Pipeline::searchLoopClosures(
    const std::vector<VertexId>& queries, const PoseGraph& snapshot) {
  std::vector<LoopProposal> out;
  std::vector<VertexId> refs;
  for (const Vertex& v : snapshot.vertices()) {
    if (v.role == VertexRole::kReference) refs.push_back(v.id);
  }
  std::sort(refs.begin(), refs.end());

  // The search front: recently merged vertices plus the reference
  // neighborhood around them. Pairing within the neighborhood is what ties
  // a fresh chain to the surrounding model at junctions.
  std::set<VertexId> front;
  for (const VertexId& q : queries) {
    if (!snapshot.hasVertex(q)) continue;
    front.insert(q);
    const Eigen::Vector3d p = snapshot.vertex(q).pose.translation();
    for (const VertexId& rid : refs) {
      if ((snapshot.vertex(rid).pose.translation() - p).norm() <= config_.lc_radius) {
        front.insert(rid);
      }
    }
  }

  std::set<std::pair<VertexId, VertexId>> proposed;
  for (const VertexId& q : front) {
    const Vertex& qv = snapshot.vertex(q);
    for (const VertexId& rid : refs) {
      if (rid == q) continue;
      const Vertex& rv = snapshot.vertex(rid);
      if ((rv.pose.translation() - qv.pose.translation()).norm() > config_.lc_radius) continue;
      if (rid.session == q.session && std::abs(rid.index - q.index) < config_.lc_min_separation) {
        continue;
      }
      const auto key = std::minmax(q, rid);
      if (proposed.count({key.first, key.second})) continue;
      bool duplicate = false;
      for (EdgeId eid : snapshot.incidentEdges(q)) {
        const Edge& e = snapshot.edge(eid);
        if ((e.from == q && e.to == rid) || (e.from == rid && e.to == q)) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) continue;
      proposed.insert({key.first, key.second});
      const auto match = matcher_->matchPair(qv, rv);
      if (!match) continue;
      Edge loop;
      loop.from = q;
      loop.to = rid;
      loop.kind = EdgeKind::kLoop;
      loop.measurement = match->first;
      loop.information = match->second;
      out.push_back({loop});
    }
  }
  return out;
}

int Pipeline::commitLoopProposals(const std::vector<LoopProposal>& proposals) {
  int committed = 0;
  std::unordered_map<VertexId, Pose, VertexIdHash> poses;
  for (const LoopProposal& p : proposals) {
    const Edge& e = p.edge;
    if (!graph_.hasVertex(e.from) || !graph_.hasVertex(e.to)) continue;
    if (graph_.vertex(e.from).role != VertexRole::kReference ||
        graph_.vertex(e.to).role != VertexRole::kReference) {
      continue;
    }
    bool duplicate = false;
    for (EdgeId eid : graph_.incidentEdges(e.from)) {
      const Edge& ex = graph_.edge(eid);
      if ((ex.from == e.from && ex.to == e.to) || (ex.from == e.to && ex.to == e.from)) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    poses[e.from] = graph_.vertex(e.from).pose;
    poses[e.to] = graph_.vertex(e.to).pose;
    const Vector6d r = residual(e, poses).vector();
    const double chi2 = r.dot(e.information * r);
    if (chi2 > config_.lc_gate) continue;
    graph_.addEdge(e);
    ++committed;
  }
  return committed;
}

void Pipeline::runLoopClosureSync(bool optimize_after) {
  if (config_.deterministic) {
    if (lc_queue_.empty()) return;
    std::vector<VertexId> queries(lc_queue_.begin(), lc_queue_.end());
    lc_queue_.clear();
    const auto proposals = searchLoopClosures(queries, graph_);
    if (commitLoopProposals(proposals) > 0 && optimize_after) globalOptimize();
    return;
  }
  // Threaded mode: harvest finished results, then hand the worker a fresh
  // snapshot. Commits only happen here, between keyframes.
  std::vector<LoopProposal> results;
  {
    std::lock_guard<std::mutex> lock(worker_mutex_);
    if (worker_results_ready_) {
      results = std::move(worker_results_);
      worker_results_.clear();
      worker_results_ready_ = false;
    }
  }
  if (!results.empty() && commitLoopProposals(results) > 0 && optimize_after) globalOptimize();
  {
    std::lock_guard<std::mutex> lock(worker_mutex_);
    if (!worker_job_ready_ && !lc_queue_.empty()) {
      worker_queries_.assign(lc_queue_.begin(), lc_queue_.end());
      lc_queue_.clear();
      worker_snapshot_ = graph_;
      worker_job_ready_ = true;
      worker_cv_.notify_all();
    }
  }
}

void Pipeline::startWorker() {
  worker_stop_ = false;
  worker_ = std::thread([this]() { workerMain(); });
}

void Pipeline::stopWorker() {
  if (!worker_.joinable()) return;
  {
    std::lock_guard<std::mutex> lock(worker_mutex_);
    worker_stop_ = true;
    worker_cv_.notify_all();
  }
  worker_.join();
}

void Pipeline::workerMain() {
  while (true) {
    std::vector<VertexId> queries;
    PoseGraph snapshot;
    {
      std::unique_lock<std::mutex> lock(worker_mutex_);
      worker_cv_.wait(lock, [this]() { return worker_stop_ || worker_job_ready_; });
      if (worker_stop_) return;
      queries = std::move(worker_queries_);
      snapshot = std::move(worker_snapshot_);
      worker_job_ready_ = false;
      worker_busy_ = true;
    }
    auto proposals = searchLoopClosures(queries, snapshot);
    {
      std::lock_guard<std::mutex> lock(worker_mutex_);
      worker_results_ = std::move(proposals);
      worker_results_ready_ = true;
      worker_busy_ = false;
      worker_cv_.notify_all();
    }
  }
}

void Pipeline::endSession() {
  if (!in_session_) return;
  // Flush the window so every keyframe of the session can merge.
  if (decision_.mode() == Mode::kMapping && config_.mapping_enabled) {
    while (!window_.empty()) {
      const VertexId oldest = window_.front();
      window_.pop_front();
      retire(oldest);
    }
    mergeCandidates();
    std::vector<VertexId> leftovers = pending_;
    for (const VertexId& id : leftovers) {
      if (candidateRedundant(id)) dropVertex(id);
    }
    runLoopClosureSync();
    if (!config_.deterministic) {
      // Drain the worker so the final search lands in the graph.
      {
        std::unique_lock<std::mutex> lock(worker_mutex_);
        worker_cv_.wait_for(lock, std::chrono::seconds(5),
                            [this]() { return !worker_job_ready_ && !worker_busy_; });
      }
      runLoopClosureSync();
    }
    globalOptimize();
  } else {
    while (!window_.empty()) {
      const VertexId oldest = window_.front();
      window_.pop_front();
      retire(oldest);
    }
  }
  lc_active_ = false;
  in_session_ = false;
  previous_.reset();
}

void Pipeline::runStream(const SessionStream& stream) {
  beginSession(stream.session, stream.label, stream.start);
  for (const KeyframeEvent& event : stream.events) ingest(event);
  endSession();
}

void Pipeline::finalize() {
  for (const Vertex& v : graph_.vertices()) updateTrajectory(v.id);
}

bool Pipeline::referenceConnected() const {
  std::vector<VertexId> refs;
  for (const Vertex& v : graph_.vertices()) {
    if (v.role == VertexRole::kReference) refs.push_back(v.id);
  }
  if (refs.empty()) return true;
  std::set<VertexId> ref_set(refs.begin(), refs.end());
  std::set<VertexId> visited{refs.front()};
  std::deque<VertexId> queue{refs.front()};
  while (!queue.empty()) {
    const VertexId cur = queue.front();
    queue.pop_front();
    for (EdgeId eid : graph_.incidentEdges(cur)) {
      const Edge& e = graph_.edge(eid);
      if (e.kind == EdgeKind::kPrior) continue;
      const VertexId other = (e.from == cur) ? e.to : e.from;
      if (!ref_set.count(other)) continue;  // reference-internal edges only
      if (visited.insert(other).second) queue.push_back(other);
    }
  }
  return visited.size() == ref_set.size();
}

}  // namespace mslam
