#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace teleop {

// Joint-space quantities are plain Eigen vectors; the aliases only document units.
using JointPositions = Eigen::VectorXd;
using JointVelocities = Eigen::VectorXd;
using JointTorques = Eigen::VectorXd;

enum class JointKind { revolute, prismatic };

struct DHRow {
    double a = 0.0;
    double alpha = 0.0;
    double d = 0.0;
    double theta_offset = 0.0;
    JointKind kind = JointKind::revolute;
};

struct KinematicChain {
    std::string name;
    std::vector<DHRow> rows;
    std::vector<std::pair<double, double>> limits;
    Eigen::Isometry3d base = Eigen::Isometry3d::Identity();

    int dof() const { return static_cast<int>(rows.size()); }
    void validate() const;
    Eigen::VectorXd lower() const;
    Eigen::VectorXd upper() const;
    Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
};

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct JacobianMatrix {
    Eigen::Matrix<double, 3, Eigen::Dynamic> linear;
    Eigen::Matrix<double, 3, Eigen::Dynamic> angular;

    Eigen::Matrix<double, 6, Eigen::Dynamic> stacked() const;
    int cols() const { return static_cast<int>(linear.cols()); }
};

struct Wrench {
    Eigen::Vector3d force = Eigen::Vector3d::Zero();
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();

    Eigen::Matrix<double, 6, 1> stacked() const;
    bool is_zero() const { return force.isZero(0.0) && moment.isZero(0.0); }
};

// Transform of one standard DH row: Rz(theta) Tz(d) Tx(a) Rx(alpha).
Eigen::Isometry3d dh_transform(const DHRow& row, double qi);

// base, then the frame after each joint (n + 1 entries)
std::vector<Eigen::Isometry3d> link_frames(const KinematicChain& chain, const JointPositions& q);

Pose forward_kinematics(const KinematicChain& chain, const JointPositions& q);

JacobianMatrix geometric_jacobian(const KinematicChain& chain, const JointPositions& q);

KinematicChain scale_chain(const KinematicChain& chain, double s);

// Ratio s such that leader == scale_chain(follower, s), or a negative value if none exists.
double chain_scale_between(const KinematicChain& follower, const KinematicChain& leader,
                           double tol = 1e-9);

JointTorques external_joint_torque(const JacobianMatrix& J, const Wrench& w);

KinematicChain chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const KinematicChain& chain);
KinematicChain load_chain(const std::string& path);

}  // namespace teleop
