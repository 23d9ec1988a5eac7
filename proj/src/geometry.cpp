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
#include "mslam/geometry.hpp"

#include <cmath>

namespace mslam {

namespace {

// V(phi) such that exp([rho; phi]) has translation V * rho.
// 1 - cos(theta) is evaluated as 2 sin^2(theta/2) to avoid cancellation.
Eigen::Matrix3d expV(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d P = skew(phi);
  double a, b;
  if (theta < kTaylorAngle) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    const double sh = std::sin(0.5 * theta);
    a = 2.0 * sh * sh / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Eigen::Matrix3d::Identity() + a * P + b * P * P;
}

// Coefficient of the P^2 term shared by V^-1 and Jr^-1 on SO(3):
// c = (1 - (theta/2) cot(theta/2)) / theta^2. The direct form cancels badly
// below ~1e-2 rad, so the series runs up to there.
double invVCoeff(double theta) {
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
}

Eigen::Matrix3d expVInverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d P = skew(phi);
  return Eigen::Matrix3d::Identity() - 0.5 * P + invVCoeff(theta) * P * P;
}

Eigen::Matrix3d so3RightJacobianInverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d P = skew(phi);
  return Eigen::Matrix3d::Identity() + 0.5 * P + invVCoeff(theta) * P * P;
}

// Barfoot's Q matrix: upper-right block of the SE(3) left Jacobian
// in [rho; phi] ordering.
Eigen::Matrix3d se3Q(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d Pr = skew(rho);
  const Eigen::Matrix3d Pp = skew(phi);
  double c2, c3, c4;
  if (theta < kTaylorAngle) {
    const double t2 = theta * theta;
    c2 = 1.0 / 6.0 - t2 / 120.0;
    c3 = -1.0 / 24.0 + t2 / 720.0;
    c4 = -1.0 / 60.0 + t2 / 1260.0;
  } else {
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double t4 = t3 * theta;
    const double t5 = t4 * theta;
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    c2 = (theta - s) / t3;
    c3 = (1.0 - 0.5 * t2 - c) / t4;
    c4 = c3 - 3.0 * (theta - s - t3 / 6.0) / t5;
  }
  const Eigen::Matrix3d PpPr = Pp * Pr;
  const Eigen::Matrix3d PrPp = Pr * Pp;
  const Eigen::Matrix3d PpPrPp = PpPr * Pp;
  return 0.5 * Pr + c2 * (PpPr + PrPp + PpPrPp) -
         c3 * (Pp * PpPr + PrPp * Pp - 3.0 * PpPrPp) -
         0.5 * c4 * (PpPrPp * Pp + Pp * PpPrPp);
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

Pose inverse(const Pose& a) {
  const Eigen::Quaterniond qi = a.rotation().conjugate();
  return Pose(qi, -(qi * a.translation()));
}

Pose exp(const Twist& xi) {
  const double theta = xi.phi.norm();
  Eigen::Quaterniond q;
  if (theta < kTaylorAngle) {
    const double t2 = theta * theta;
    const double k = 0.5 - t2 / 48.0;  // sin(theta/2)/theta
    q = Eigen::Quaterniond(1.0 - t2 / 8.0, k * xi.phi.x(), k * xi.phi.y(), k * xi.phi.z());
  } else {
    const double half = 0.5 * theta;
    const double k = std::sin(half) / theta;
    q = Eigen::Quaterniond(std::cos(half), k * xi.phi.x(), k * xi.phi.y(), k * xi.phi.z());
  }
  return Pose(q, expV(xi.phi) * xi.rho);
}

Twist log(const Pose& a) {
  Eigen::Quaterniond q = a.rotation();
  // Canonical branch: angle in [0, pi]. At w == 0 the sign is fixed by the
  // first nonzero vector component.
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  } else if (q.w() == 0.0) {
    const Eigen::Vector3d v(q.x(), q.y(), q.z());
    for (int i = 0; i < 3; ++i) {
      if (v[i] != 0.0) {
        if (v[i] < 0.0) q.coeffs() = -q.coeffs();
        break;
      }
    }
  }
  const Eigen::Vector3d v(q.x(), q.y(), q.z());
  const double n = v.norm();
  Eigen::Vector3d phi;
  if (n < 1e-9) {
    phi = 2.0 / q.w() * v;
  } else {
    phi = (2.0 * std::atan2(n, q.w()) / n) * v;
  }
  return Twist(expVInverse(phi) * a.translation(), phi);
}

Matrix6d adjoint(const Pose& a) {
  const Eigen::Matrix3d R = a.rotationMatrix();
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = R;
  ad.topRightCorner<3, 3>() = skew(a.translation()) * R;
  ad.bottomRightCorner<3, 3>() = R;
  return ad;
}

Matrix6d rightJacobianInverse(const Twist& xi) {
  // Jr^-1(xi) = Jl^-1(-xi) with Jl = [[J, Q], [0, J]].
  const Eigen::Vector3d rho = -xi.rho;
  const Eigen::Vector3d phi = -xi.phi;
  const Eigen::Matrix3d Jinv = so3RightJacobianInverse(-phi);  // = Jl^-1(phi)
  const Eigen::Matrix3d Q = se3Q(rho, phi);
  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = Jinv;
  out.topRightCorner<3, 3>() = -Jinv * Q * Jinv;
  out.bottomRightCorner<3, 3>() = Jinv;
  return out;
}

Matrix6d leftJacobianInverse(const Twist& xi) {
  return rightJacobianInverse(Twist(-xi.rho, -xi.phi));
}

double rotationDistance(const Pose& a, const Pose& b) {
  return log(compose(inverse(a), b)).phi.norm();
}

double translationDistance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace mslam
