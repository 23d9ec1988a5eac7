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
#include "mslam/decision.hpp"

#include <cmath>

namespace mslam {

const char* modeName(Mode m) {
  switch (m) {
    case Mode::kLocalization: return "LOCALIZATION";
    case Mode::kMapping: return "MAPPING";
  }
  return "?";
}

const char* decisionEventName(DecisionEvent e) {
  switch (e) {
    case DecisionEvent::kNone: return "NONE";
    case DecisionEvent::kEnterMappingDisconnect: return "ENTER_MAPPING_DISCONNECT";
    case DecisionEvent::kEnterMappingDegraded: return "ENTER_MAPPING_DEGRADED";
    case DecisionEvent::kExitMapping: return "EXIT_MAPPING";
  }
  return "?";
}

void DecisionConfig::validate() const {
  if (window < 5) throw Error(ErrorCode::kInvalidConfig, "decision window must be >= 5");
  if (!(k4 > k2 && k2 > 0.0)) throw Error(ErrorCode::kInvalidConfig, "need k4 > k2 > 0");
  if (recovery_hysteresis < 1) throw Error(ErrorCode::kInvalidConfig, "recovery hysteresis must be >= 1");
}

DecisionState::DecisionState(const DecisionConfig& config) : config_(config) {
  config_.validate();
}

DecisionState DecisionState::bootstrapMapping(const DecisionConfig& config) {
  DecisionState s(config);
  s.mode_ = Mode::kMapping;
  return s;
}

double DecisionState::sigmaEffective() const {
  return std::max({sigma_, config_.sigma_floor_rel * std::abs(mu_), config_.sigma_floor_abs});
}

double DecisionState::frozenSigmaEffective() const {
  const double fs = frozen_sigma_.value_or(0.0);
  const double fm = frozen_mu_.value_or(0.0);
  return std::max({fs, config_.sigma_floor_rel * std::abs(fm), config_.sigma_floor_abs});
}

void DecisionState::ingest(double d_bar) {
  window_.push_back(d_bar);
  while (static_cast<int>(window_.size()) > config_.window) window_.pop_front();
  const double n = static_cast<double>(window_.size());
  double sum = 0.0;
  for (double v : window_) sum += v;
  mu_ = sum / n;
  if (window_.size() >= 2) {
    double sq = 0.0;
    for (double v : window_) sq += (v - mu_) * (v - mu_);
    sigma_ = std::sqrt(sq / (n - 1.0));
  } else {
    sigma_ = 0.0;
  }
}

void DecisionState::freeze() {
  frozen_mu_ = mu_;
  frozen_sigma_ = sigma_;
  recovery_count_ = 0;
  dwell_count_ = 0;
  recovery_values_.clear();
}

DecisionEvent DecisionState::step(double d_bar, const std::function<double()>& lambda2) {
  if (!std::isfinite(d_bar)) {
    throw Error(ErrorCode::kNonFiniteInput, "d_bar must be finite");
  }
  last_event_ = DecisionEvent::kNone;
  last_lambda2_.reset();

  auto evalLambda2 = [&]() {
    const double v = lambda2();
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteInput, "lambda2 must be finite");
    last_lambda2_ = v;
    return v;
  };

  if (mode_ == Mode::kLocalization) {
    if (!warmedUp()) {
      ingest(d_bar);
      return last_event_;
    }
    const double gate = config_.k2 * sigmaEffective();
    if (std::abs(d_bar - mu_) <= gate) {
      ingest(d_bar);
      return last_event_;
    }
    const double l2 = evalLambda2();
    if (l2 <= config_.lambda2_eps) {
      freeze();
      mode_ = Mode::kMapping;
      last_event_ = DecisionEvent::kEnterMappingDisconnect;
      return last_event_;
    }
    if (d_bar < mu_ - config_.k4 * sigmaEffective()) {
      freeze();
      mode_ = Mode::kMapping;
      last_event_ = DecisionEvent::kEnterMappingDegraded;
      return last_event_;
    }
    ingest(d_bar);
    return last_event_;
  }

  // Mapping mode.
  ++dwell_count_;
  if (dwell_count_ < config_.min_mapping_dwell) {
    return last_event_;
  }
  // Bootstrap mapping has no frozen statistics; it can only end with the
  // session.
  if (!frozen_mu_.has_value()) {
    return last_event_;
  }
  const double band = config_.k2 * frozenSigmaEffective();
  if (std::abs(d_bar - *frozen_mu_) <= band && evalLambda2() > config_.lambda2_eps) {
    ++recovery_count_;
    recovery_values_.push_back(d_bar);
    while (static_cast<int>(recovery_values_.size()) > config_.recovery_hysteresis) {
      recovery_values_.pop_front();
    }
    if (recovery_count_ >= config_.recovery_hysteresis) {
      mode_ = Mode::kLocalization;
      last_event_ = DecisionEvent::kExitMapping;
      window_.clear();
      mu_ = 0.0;
      sigma_ = 0.0;
      for (double v : recovery_values_) ingest(v);
      frozen_mu_.reset();
      frozen_sigma_.reset();
      recovery_count_ = 0;
      dwell_count_ = 0;
      recovery_values_.clear();
    }
    return last_event_;
  }
  recovery_count_ = 0;
  recovery_values_.clear();
  return last_event_;
}

}  // namespace mslam
