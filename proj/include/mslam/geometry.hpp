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

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Angle below which Taylor-series branches of exp/log/V/V^-1 are used.
inline constexpr double kTaylorAngle = 1e-6;

/// Element of se(3): translational part rho (m) and rotational part phi
/// (axis-angle, rad). Stacked as [rho; phi] wherever a 6-vector is needed;
/// information matrices follow the same ordering.
struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& rho_, const Eigen::Vector3d& phi_) : rho(rho_), phi(phi_) {}
  explicit Twist(const Vector6d& v) : rho(v.head<3>()), phi(v.tail<3>()) {}

  Vector6d vector() const {
    Vector6d v;
    v << rho, phi;
    return v;
  }
  double norm() const { return vector().norm(); }
};

/// Rigid-body transform on SE(3). Rotation stored as a Hamilton unit
/// quaternion, renormalized after every constructor and composition.
class Pose {
 public:
  Pose() : q_(Eigen::Quaterniond::Identity()), t_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : q_(q.normalized()), t_(t) {}

  static Pose Identity() { return Pose(); }
  static Pose fromTranslation(const Eigen::Vector3d& t) {
    return Pose(Eigen::Quaterniond::Identity(), t);
  }

  const Eigen::Quaterniond& rotation() const { return q_; }
  const Eigen::Vector3d& translation() const { return t_; }
  Eigen::Matrix3d rotationMatrix() const { return q_.toRotationMatrix(); }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q_ * p + t_; }

 private:
  Eigen::Quaterniond q_;
  Eigen::Vector3d t_;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// SE(3) exponential map, exp(0) = identity.
Pose exp(const Twist& xi);

/// SE(3) logarithm. Rotation angle is taken in [0, pi]; at angle >= pi - 1e-6
/// the quaternion branch with nonnegative first nonzero component is selected.
Twist log(const Pose& a);

/// Adjoint matrix in [rho; phi] ordering: Ad(a) * xi = log(a * exp(xi) * a^-1)
/// to first order.
Matrix6d adjoint(const Pose& a);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Inverse of the right Jacobian of the SE(3) exponential at xi,
/// [rho; phi] ordering. Used by the analytic edge Jacobians.
Matrix6d rightJacobianInverse(const Twist& xi);

/// Inverse of the left Jacobian: Jl^-1(xi) = Jr^-1(-xi).
Matrix6d leftJacobianInverse(const Twist& xi);

/// Angle (rad) and translation distance (m) between two poses.
double rotationDistance(const Pose& a, const Pose& b);
double translationDistance(const Pose& a, const Pose& b);

}  // namespace mslam
