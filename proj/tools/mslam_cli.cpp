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
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "mslam/io.hpp"
#include "mslam/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mslam;

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double getd(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

int geti(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

bool getb(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  return it->second == "1" || it->second == "true" || it->second == "yes";
}

NoiseModel noiseFromConfig(const std::map<std::string, std::string>& kv) {
  NoiseModel noise;
  const double st = getd(kv, "noise.odom_sigma_trans", noise.odom_sigma(0));
  const double sr = getd(kv, "noise.odom_sigma_rot", noise.odom_sigma(3));
  noise.odom_sigma << st, st, st, sr, sr, sr;
  const double mt = getd(kv, "noise.match_sigma_trans", noise.match_sigma(0));
  const double mr = getd(kv, "noise.match_sigma_rot", noise.match_sigma(3));
  noise.match_sigma << mt, mt, mt, mr, mr, mr;
  noise.match_dropout = getd(kv, "noise.match_dropout", noise.match_dropout);
  noise.outlier_rate = getd(kv, "noise.outlier_rate", noise.outlier_rate);
  auto scope = kv.find("noise.outlier_scope");
  if (scope != kv.end()) {
    noise.outlier_scope = scope->second == "all" ? OutlierScope::kAll : OutlierScope::kLoopOnly;
  }
  return noise;
}

PipelineConfig pipelineFromConfig(const std::map<std::string, std::string>& kv) {
  PipelineConfig cfg;
  cfg.window_size = geti(kv, "pipeline.window_size", cfg.window_size);
  cfg.k_neighbors = geti(kv, "pipeline.k_neighbors", cfg.k_neighbors);
  cfg.retention_age = geti(kv, "pipeline.retention_age", cfg.retention_age);
  cfg.retention_distance = geti(kv, "pipeline.retention_distance", cfg.retention_distance);
  cfg.association_radius = getd(kv, "pipeline.association_radius", cfg.association_radius);
  cfg.lc_radius = getd(kv, "pipeline.lc_radius", cfg.lc_radius);
  cfg.lc_min_separation = geti(kv, "pipeline.lc_min_separation", cfg.lc_min_separation);
  cfg.lc_gate = getd(kv, "pipeline.lc_gate", cfg.lc_gate);
  cfg.metric_radius = getd(kv, "pipeline.metric_radius", cfg.metric_radius);
  cfg.reinforce_max_inter = geti(kv, "pipeline.reinforce_max_inter", cfg.reinforce_max_inter);
  cfg.mapping_enabled = getb(kv, "pipeline.mapping_enabled", cfg.mapping_enabled);
  cfg.deterministic = getb(kv, "pipeline.deterministic", cfg.deterministic);
  cfg.decision.window = geti(kv, "decision.window", cfg.decision.window);
  cfg.decision.k2 = getd(kv, "decision.k2", cfg.decision.k2);
  cfg.decision.k4 = getd(kv, "decision.k4", cfg.decision.k4);
  cfg.decision.sigma_floor_rel = getd(kv, "decision.sigma_floor_rel", cfg.decision.sigma_floor_rel);
  cfg.decision.sigma_floor_abs = getd(kv, "decision.sigma_floor_abs", cfg.decision.sigma_floor_abs);
  cfg.decision.recovery_hysteresis =
      geti(kv, "decision.recovery_hysteresis", cfg.decision.recovery_hysteresis);
  cfg.decision.min_mapping_dwell =
      geti(kv, "decision.min_mapping_dwell", cfg.decision.min_mapping_dwell);
  return cfg;
}

std::map<std::string, std::string> configEcho(const std::string& scenario, uint64_t seed,
                                              const World& world, const NoiseModel& noise) {
  std::map<std::string, std::string> kv;
  kv["scenario"] = scenario;
  kv["seed"] = std::to_string(seed);
  kv["world.visibility_radius"] = fmt6(world.visibility_radius);
  kv["world.pair_visibility_radius"] = fmt6(world.pair_visibility_radius);
  kv["noise.odom_sigma_trans"] = fmt6(noise.odom_sigma(0));
  kv["noise.odom_sigma_rot"] = fmt6(noise.odom_sigma(3));
  kv["noise.match_sigma_trans"] = fmt6(noise.match_sigma(0));
  kv["noise.match_sigma_rot"] = fmt6(noise.match_sigma(3));
  kv["noise.match_dropout"] = fmt6(noise.match_dropout);
  kv["noise.outlier_rate"] = fmt6(noise.outlier_rate);
  kv["noise.outlier_scope"] = noise.outlier_scope == OutlierScope::kAll ? "all" : "loop";
  return kv;
}

int runSimulate(const std::string& scenario_name, uint64_t seed, const std::string& out_dir,
                const std::string& config_path) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = io::parseConfig(io::readFile(config_path));
  Scenario sc = buildScenario(scenario_name, seed);
  sc.world.visibility_radius = getd(kv, "world.visibility_radius", sc.world.visibility_radius);
  sc.world.pair_visibility_radius =
      getd(kv, "world.pair_visibility_radius", sc.world.pair_visibility_radius);
  const NoiseModel noise = noiseFromConfig(kv);
  fs::create_directories(out_dir);
  int session = 0;
  for (const SessionSpec& spec : sc.script.sessions) {
    const SessionStream stream = generateSession(sc.world, noise, spec, session);
    char name[64];
    std::snprintf(name, sizeof(name), "session_%02d.stream", session);
    io::writeFile((fs::path(out_dir) / name).string(), io::serializeStream(stream));
    ++session;
  }
  io::writeFile((fs::path(out_dir) / "scenario.cfg").string(),
                io::serializeConfig(configEcho(scenario_name, seed, sc.world, noise)));
  std::cout << "wrote " << session << " session streams to " << out_dir << "\n";
  return 0;
}

int runPipeline(const std::string& prior_path, const std::string& sessions_dir,
                const std::string& config_path, const std::string& out_dir) {
  const auto kv = io::parseConfig(io::readFile(config_path));
  const NoiseModel noise = noiseFromConfig(kv);
  PipelineConfig cfg = pipelineFromConfig(kv);
  World world;  // only the visibility radius matters after generation
  world.visibility_radius = getd(kv, "world.visibility_radius", world.visibility_radius);
  world.pair_visibility_radius =
      getd(kv, "world.pair_visibility_radius", world.pair_visibility_radius);
  world.seed = static_cast<uint64_t>(getd(kv, "seed", 1));

  auto matcher = std::make_shared<SimMatcher>(world, noise);
  Pipeline pipeline(cfg, matcher);

  if (!prior_path.empty()) {
    const io::ParseResult parsed = io::parseGraph(io::readFile(prior_path));
    const std::string manifest_path = prior_path + ".manifest.json";
    if (fs::exists(manifest_path)) {
      pipeline.loadPrior(
          io::applyManifest(parsed.graph, io::parseManifest(io::readFile(manifest_path))));
    } else {
      pipeline.loadPrior(parsed.graph);
    }
  }

  std::vector<fs::path> stream_files;
  for (const auto& entry : fs::directory_iterator(sessions_dir)) {
    if (entry.path().extension() == ".stream") stream_files.push_back(entry.path());
  }
  std::sort(stream_files.begin(), stream_files.end());
  if (stream_files.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "no .stream files in " + sessions_dir);
  }

  io::Manifest extra;
  extra.seed = world.seed;
  extra.config_echo = kv;
  std::vector<std::pair<int, std::string>> session_order;
  std::map<int, size_t> reference_added;
  for (const fs::path& file : stream_files) {
    const SessionStream stream = io::parseStream(io::readFile(file.string()));
    extra.session_labels[stream.session] = stream.label;
    session_order.push_back({stream.session, stream.label});
    const size_t before = pipeline.referenceCount();
    pipeline.runStream(stream);
    reference_added[stream.session] = pipeline.referenceCount() - before;
  }
  pipeline.finalize();

  fs::create_directories(out_dir);
  io::writeFile((fs::path(out_dir) / "final.g2o").string(),
                io::serializeGraph(pipeline.graph()));
  io::writeFile((fs::path(out_dir) / "final.g2o.manifest.json").string(),
                io::serializeManifest(pipeline.graph(), extra));
  io::writeFile((fs::path(out_dir) / "metrics.csv").string(),
                io::serializeMetrics(pipeline.metrics(), cfg.deterministic));

  std::ostringstream ate_out;
  for (const auto& [session, label] : session_order) {
    std::vector<TrajectoryEntry> entries;
    std::vector<Pose> est, truth;
    for (const TrajectoryEntry& t : pipeline.trajectory()) {
      if (t.session != session) continue;
      entries.push_back(t);
      if (t.truth) {
        est.push_back(t.estimate);
        truth.push_back(*t.truth);
      }
    }
    char est_name[64], truth_name[64];
    std::snprintf(est_name, sizeof(est_name), "traj_s%02d_est.txt", session);
    std::snprintf(truth_name, sizeof(truth_name), "traj_s%02d_truth.txt", session);
    io::writeFile((fs::path(out_dir) / est_name).string(),
                  io::serializeTrajectory(entries, false));
    io::writeFile((fs::path(out_dir) / truth_name).string(),
                  io::serializeTrajectory(entries, true));
    ate_out << "session " << session << " (" << label << "): ate ";
    std::string ate_text = "NA";
    if (est.size() >= 3) {
      try {
        ate_text = fmt6(io::evaluateAte(est, truth));
      } catch (const Error& e) {
        ate_text = std::string("NA (") + e.what() + ")";
      }
    }
    ate_out << ate_text << ", reference vertices added " << reference_added[session] << "\n";
  }
  io::writeFile((fs::path(out_dir) / "ate.txt").string(), ate_out.str());
  std::cout << ate_out.str();
  std::cout << "reference vertices: " << pipeline.referenceCount() << "\n";
  std::cout << "outputs in " << out_dir << "\n";
  return 0;
}

Weighting weightingFromName(const std::string& name) {
  if (name == "unit") return Weighting::kUnit;
  if (name == "trace") return Weighting::kFimTrace;
  if (name == "mineig") return Weighting::kFimMinEig;
  throw Error(ErrorCode::kInvalidConfig, "unknown weighting " + name);
}

PoseGraph loadGraphWithManifest(const std::string& graph_path, const std::string& manifest_path) {
  const io::ParseResult parsed = io::parseGraph(io::readFile(graph_path));
  std::string mp = manifest_path;
  if (mp.empty() && fs::exists(graph_path + ".manifest.json")) {
    mp = graph_path + ".manifest.json";
  }
  if (!mp.empty()) {
    return io::applyManifest(parsed.graph, io::parseManifest(io::readFile(mp)));
  }
  return parsed.graph;
}

int runMetrics(const std::string& graph_path, const std::string& manifest_path,
               const std::string& weighting_name) {
  const PoseGraph g = loadGraphWithManifest(graph_path, manifest_path);
  std::set<VertexId> ids;
  for (const Vertex& v : g.vertices()) ids.insert(v.id);
  if (ids.empty()) throw Error(ErrorCode::kEmptyVertexSet, "graph has no vertices");
  const SpectralReport report = spectralReport(g, ids, weightingFromName(weighting_name));
  std::cout << "m " << report.m << "\n";
  std::cout << "d_bar " << fmt6(report.d_bar) << "\n";
  std::cout << "lambda2 " << fmt6(report.lambda2_bar) << "\n";
  std::cout << "connected " << (report.connected ? 1 : 0) << "\n";
  if (report.spanning_tree_log) {
    std::cout << "spanning_tree_measure " << fmt6(std::exp(*report.spanning_tree_log)) << "\n";
  } else {
    std::cout << "spanning_tree_measure NA\n";
  }
  if (report.connected && report.m >= 2) {
    const WeightedLaplacian L = buildLaplacian(g, ids, weightingFromName(weighting_name));
    const auto weak = weakestEdges(g, L);
    std::cout << "weakest_edges " << weak.size() << "\n";
    for (const Edge& e : weak) {
      std::cout << "  " << e.from.session << ":" << e.from.index << " -- " << e.to.session << ":"
                << e.to.index << " " << edgeKindName(e.kind) << "\n";
    }
  } else {
    std::cout << "weakest_edges NA\n";
  }
  std::cout << "node_degrees\n";
  for (size_t i = 0; i < report.vertex_order.size(); ++i) {
    std::cout << "  " << report.vertex_order[i].session << ":" << report.vertex_order[i].index
              << " " << fmt6(report.node_degrees[i]) << "\n";
  }
  return 0;
}

int runEval(const std::string& est_path, const std::string& truth_path) {
  const auto est_rows = io::parseTrajectory(io::readFile(est_path));
  const auto truth_rows = io::parseTrajectory(io::readFile(truth_path));
  std::vector<Pose> est, truth;
  for (const auto& [t, p] : est_rows) est.push_back(p);
  for (const auto& [t, p] : truth_rows) truth.push_back(p);
  std::cout << fmt6(io::evaluateAte(est, truth)) << "\n";
  return 0;
}

int runMergeCheck(const std::string& graph_path, const std::string& manifest_path) {
  // Parsing re-validates endpoints, SPD information and kind rules.
  const PoseGraph g = loadGraphWithManifest(graph_path, manifest_path);
  int violations = 0;
  // Reference connectivity over reference-internal edges.
  std::vector<VertexId> refs;
  for (const Vertex& v : g.vertices()) {
    if (v.role == VertexRole::kReference) refs.push_back(v.id);
  }
  if (!refs.empty()) {
    std::set<VertexId> ref_set(refs.begin(), refs.end());
    std::set<VertexId> visited{refs.front()};
    std::vector<VertexId> stack{refs.front()};
    while (!stack.empty()) {
      const VertexId cur = stack.back();
      stack.pop_back();
      for (EdgeId eid : g.incidentEdges(cur)) {
        const Edge& e = g.edge(eid);
        if (e.kind == EdgeKind::kPrior) continue;
        const VertexId other = (e.from == cur) ? e.to : e.from;
        if (ref_set.count(other) && visited.insert(other).second) stack.push_back(other);
      }
    }
    if (visited.size() != ref_set.size()) {
      std::cout << "reference subgraph split: " << visited.size() << " of " << ref_set.size()
                << " reachable\n";
      ++violations;
    }
  }
  for (const Edge& e : g.edges()) {
    if (!isSpdInformation(e.information)) {
      std::cout << "non-SPD information on edge " << e.from.session << ":" << e.from.index
                << " -- " << e.to.session << ":" << e.to.index << "\n";
      ++violations;
    }
  }
  if (violations > 0) {
    std::cout << "merge-check: " << violations << " violation(s)\n";
    return 3;
  }
  std::cout << "merge-check: ok (" << g.vertexCount() << " vertices, " << g.edgeCount()
            << " edges, " << refs.size() << " reference)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-session pose-graph localization and mapping"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "generate deterministic session streams");
  std::string scenario = "three_stage";
  uint64_t seed = 1;
  std::string out_dir = "out";
  std::string config_path;
  simulate->add_option("--scenario", scenario, "scenario name")
      ->check(CLI::IsMember(scenarioNames()));
  simulate->add_option("--seed", seed, "rng seed");
  simulate->add_option("--out", out_dir, "output directory")->required();
  simulate->add_option("--config", config_path, "noise/world overrides (key = value)");

  auto* run = app.add_subcommand("run", "run the pipeline over session streams");
  std::string prior_path, sessions_dir, run_config, run_out;
  run->add_option("--prior", prior_path, "prior graph file (manifest sidecar auto-detected)");
  run->add_option("--sessions", sessions_dir, "directory with session_*.stream files")->required();
  run->add_option("--config", run_config, "configuration file")->required();
  run->add_option("--out", run_out, "output directory")->required();

  auto* metrics = app.add_subcommand("metrics", "spectral connectivity report for a graph file");
  std::string metrics_graph, metrics_manifest, weighting = "trace";
  metrics->add_option("--graph", metrics_graph, "graph file")->required();
  metrics->add_option("--manifest", metrics_manifest, "manifest sidecar");
  metrics->add_option("--weighting", weighting, "unit|trace|mineig")
      ->check(CLI::IsMember({"unit", "trace", "mineig"}));

  auto* eval = app.add_subcommand("eval", "ATE RMSE between two trajectory files");
  std::string est_path, truth_path;
  eval->add_option("--est", est_path, "estimated trajectory")->required();
  eval->add_option("--truth", truth_path, "ground-truth trajectory")->required();

  auto* check = app.add_subcommand("merge-check", "connectivity and invariant audit");
  std::string check_graph, check_manifest;
  check->add_option("--graph", check_graph, "graph file")->required();
  check->add_option("--manifest", check_manifest, "manifest sidecar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (simulate->parsed()) return runSimulate(scenario, seed, out_dir, config_path);
    if (run->parsed()) return runPipeline(prior_path, sessions_dir, run_config, run_out);
    if (metrics->parsed()) return runMetrics(metrics_graph, metrics_manifest, weighting);
    if (eval->parsed()) return runEval(est_path, truth_path);
    if (check->parsed()) return runMergeCheck(check_graph, check_manifest);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
