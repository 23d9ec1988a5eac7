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

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "mslam/decision.hpp"
#include "mslam/graph.hpp"
#include "mslam/optimizer.hpp"
#include "mslam/simulator.hpp"
#include "mslam/spectral.hpp"

namespace mslam {

struct PipelineConfig {
  int window_size = 10;           // active keyframes n
  int k_neighbors = 2;            // reference neighbors linked per association
  int retention_age = 100;        // keyframes a RETAINED vertex survives
  int retention_distance = 50;    // max hops from the newest vertex
  double association_radius = 10.0;  // meters, on current estimates
  double lc_radius = 15.0;
  int lc_min_separation = 20;     // same-session index gap for LOOP candidates
  double lc_gate = 12.59;         // chi^2 gate, 6 dof, ~95th percentile
  double metric_radius = 20.0;    // local joint-view radius for the decision metrics
  int reinforce_max_inter = 1;    // candidates with <= this many INTER edges merge
  double prior_information = 1e6;
  bool mapping_enabled = true;    // false: localization-only ablation
  bool deterministic = true;      // run the LC worker synchronously between keyframes
  DecisionConfig decision;
  ConvergenceConfig convergence;

  void validate() const;
};

/// Behavioral matching interface; the simulator provides the concrete
/// implementation, real deployments would wrap a registration front-end.
class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual std::optional<std::pair<Pose, Matrix6d>> matchToReference(const Vertex& query,
                                                                    const Vertex& ref) = 0;
  virtual std::optional<std::pair<Pose, Matrix6d>> matchPair(const Vertex& a, const Vertex& b) = 0;
};

/// Oracle matcher backed by ground-truth poses. Pair matching (the
/// loop-closure path) and reference matching consume independent
/// deterministic random streams.
class SimMatcher : public Matcher {
 public:
  SimMatcher(const World& world, const NoiseModel& noise);

  std::optional<std::pair<Pose, Matrix6d>> matchToReference(const Vertex& query,
                                                            const Vertex& ref) override;
  std::optional<std::pair<Pose, Matrix6d>> matchPair(const Vertex& a, const Vertex& b) override;

 private:
  World world_;
  NoiseModel noise_;
  Rng assoc_rng_;
  Rng pair_rng_;
};

struct MetricsRow {
  int keyframe = 0;  // global ingest counter
  int session = 0;
  int index = 0;
  Mode mode = Mode::kLocalization;
  double d_bar = 0.0;
  std::optional<double> lambda2;
  double mu = 0.0;
  double sigma = 0.0;
  DecisionEvent event = DecisionEvent::kNone;
  double wall_ms = 0.0;
};

struct TrajectoryEntry {
  int session = 0;
  int index = 0;
  double timestamp = 0.0;
  Pose estimate;
  std::optional<Pose> truth;
};

struct KeyframeReport {
  VertexId id;
  Mode mode = Mode::kLocalization;
  DecisionEvent event = DecisionEvent::kNone;
  double d_bar = 0.0;
  std::optional<double> lambda2;
  int inter_edges = 0;
  int merged = 0;
  Pose estimate;
};

/// Multi-session orchestrator: keyframe ingestion, sliding-window
/// optimization against the fixed reference, candidate merging, concurrent
/// loop-closure search, and the connectivity-driven mode switch.
class Pipeline {
 public:
  Pipeline(const PipelineConfig& config, std::shared_ptr<Matcher> matcher);
  ~Pipeline();

  /// Installs a prior model; every vertex becomes REFERENCE.
  void loadPrior(const PoseGraph& prior);

  void beginSession(int session, const std::string& label, const Pose& start);
  KeyframeReport ingest(const KeyframeEvent& event);
  void endSession();

  /// Convenience: begin + ingest all + end.
  void runStream(const SessionStream& stream);

  /// Final trajectory poses for vertices still in the graph.
  void finalize();

  const PoseGraph& graph() const { return graph_; }
  Mode mode() const { return decision_.mode(); }
  size_t referenceCount() const { return reference_ids_.size(); }
  long eigensolveCount() const { return eigensolve_count_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }
  const std::vector<TrajectoryEntry>& trajectory() const { return trajectory_; }
  const std::map<int, std::string>& sessionLabels() const { return session_labels_; }

  /// Induced subgraph over ACTIVE + REFERENCE vertices with PRIOR edges
  /// dropped: the full joint view of the spectral metrics.
  PoseGraph jointMetricGraph() const;

  /// Vertex set backing the per-keyframe decision metrics: the active
  /// window plus reference vertices within metric_radius of the newest
  /// estimate.
  std::set<VertexId> localMetricSet() const;

  /// Reference-connectivity audit (INTRA + LOOP + reference-internal INTER).
  bool referenceConnected() const;

 private:
  struct LoopProposal {
    Edge edge;
  };

  double anchorInformation() const;
  void bootstrapAnchor(VertexId id, const Pose& pose);
  int associate(const Vertex& query);
  void optimizeWindow();
  void globalOptimize();
  void mappingLocalOptimize();
  void anchorProblem(OptimizationProblem& problem) const;
  void applyResult(const OptimizationResult& result);
  void slideWindow();
  void pruneRetained();
  void retire(VertexId id);
  int mergeCandidates();
  bool candidateRedundant(VertexId id) const;
  bool candidateBridges(VertexId id) const;
  void dropVertex(VertexId id);
  double computeDbar();
  double computeLambda2();
  void handleEvent(DecisionEvent event);
  void runLoopClosureSync(bool optimize_after = true);
  std::vector<LoopProposal> searchLoopClosures(const std::vector<VertexId>& queries,
                                               const PoseGraph& snapshot);
  int commitLoopProposals(const std::vector<LoopProposal>& proposals);
  void updateTrajectory(VertexId id);
  void startWorker();
  void stopWorker();
  void workerMain();

  PipelineConfig config_;
  std::shared_ptr<Matcher> matcher_;
  PoseGraph graph_;
  DecisionState decision_;

  int session_ = -1;
  std::map<int, std::string> session_labels_;
  int next_index_ = 0;
  int keyframe_counter_ = 0;
  bool in_session_ = false;
  std::optional<VertexId> previous_;  // previous keyframe of the current session
  Pose session_start_;

  std::deque<VertexId> window_;                 // ACTIVE, oldest first
  std::vector<VertexId> reference_ids_;         // sorted
  std::unordered_map<VertexId, int, VertexIdHash> retired_at_;
  std::vector<VertexId> pending_;               // candidate pool, chain order
  std::set<VertexId> episode_new_refs_;         // non-redundant merges this episode
  bool lc_active_ = false;
  std::deque<VertexId> lc_queue_;               // recently merged, awaiting LC search

  std::optional<double> lambda2_memo_;  // per-keyframe memoization
  long eigensolve_count_ = 0;

  std::vector<MetricsRow> metrics_;
  std::vector<TrajectoryEntry> trajectory_;
  std::unordered_map<VertexId, size_t, VertexIdHash> trajectory_index_;

  // Threaded loop-closure worker (used when deterministic == false).
  std::thread worker_;
  std::mutex worker_mutex_;
  std::condition_variable worker_cv_;
  bool worker_stop_ = false;
  bool worker_job_ready_ = false;
  bool worker_busy_ = false;
  std::vector<VertexId> worker_queries_;
  PoseGraph worker_snapshot_;
  std::vector<LoopProposal> worker_results_;
  bool worker_results_ready_ = false;
};

}  // namespace mslam
