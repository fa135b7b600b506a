#include "teleop/targeting.hpp"

namespace teleop {

JointPositions solve_position_ik(const KinematicChain& chain, const Eigen::Vector3d& target,
                                 const JointPositions& q_seed, int max_iter, double damping, double tol) {
    JointPositions q = q_seed;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::Vector3d e = target - forward_kinematics(chain, q).position;
        if (e.norm() < tol) break;
        const auto J = geometric_jacobian(chain, q).linear;
        const Eigen::Matrix3d A = J * J.transpose() + damping * Eigen::Matrix3d::Identity();
        q += J.transpose() * A.ldlt().solve(e);
    }
    return chain.clamp(q);
}

}  // namespace teleop
