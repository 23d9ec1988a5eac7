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

#include <deque>
#include <functional>
#include <optional>

#include "mslam/errors.hpp"

namespace mslam {

enum class Mode { kLocalization, kMapping };

enum class DecisionEvent {
  kNone,
  kEnterMappingDisconnect,
  kEnterMappingDegraded,
  kExitMapping,
};

const char* modeName(Mode m);
const char* decisionEventName(DecisionEvent e);

struct DecisionConfig {
  int window = 50;               // moving-statistics sample count W
  double k2 = 2.0;               // step-1 gate multiplier
  double k4 = 4.0;               // step-2 degradation multiplier
  double sigma_floor_rel = 0.05; // sigma floor as a fraction of the mean
  double sigma_floor_abs = 1e-6;
  int recovery_hysteresis = 5;   // consecutive in-bounds keyframes M
  int min_mapping_dwell = 10;
  double lambda2_eps = 1e-8;     // connectivity zero test (on normalized values)

  void validate() const;
};

/// Two-step consensus: a 2-sigma deviation of d_bar gates the (expensive)
/// lambda2 evaluation; lambda2 = 0 or a 4-sigma downward drop triggers
/// mapping. Recovery back to localization requires the dwell to elapse,
/// d_bar back inside the frozen 2-sigma bounds AND lambda2 > 0 for M
/// consecutive keyframes.
class DecisionState {
 public:
  explicit DecisionState(const DecisionConfig& config);

  /// Starts directly in mapping mode with no frozen statistics (bootstrap,
  /// empty prior). Recovery is impossible until statistics exist, so the
  /// mode persists until the session ends.
  static DecisionState bootstrapMapping(const DecisionConfig& config);

  /// Advances one keyframe. `lambda2` is evaluated at most once and only
  /// when the d_bar gate requires it.
  DecisionEvent step(double d_bar, const std::function<double()>& lambda2);

  Mode mode() const { return mode_; }
  DecisionEvent lastEvent() const { return last_event_; }
  bool warmedUp() const { return static_cast<int>(window_.size()) >= config_.window; }

  double mean() const { return mu_; }
  double stddev() const { return sigma_; }
  double sigmaEffective() const;
  std::optional<double> frozenMean() const { return frozen_mu_; }
  std::optional<double> frozenStddev() const { return frozen_sigma_; }
  std::optional<double> lastLambda2() const { return last_lambda2_; }

  const DecisionConfig& config() const { return config_; }

 private:
  void ingest(double d_bar);
  void freeze();
  double frozenSigmaEffective() const;

  DecisionConfig config_;
  Mode mode_ = Mode::kLocalization;
  DecisionEvent last_event_ = DecisionEvent::kNone;

  std::deque<double> window_;
  double mu_ = 0.0;
  double sigma_ = 0.0;

  std::optional<double> frozen_mu_;
  std::optional<double> frozen_sigma_;
  int recovery_count_ = 0;
  int dwell_count_ = 0;
  std::deque<double> recovery_values_;
  std::optional<double> last_lambda2_;  // value evaluated this step, if any
};

}  // namespace mslam
