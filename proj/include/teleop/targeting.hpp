#pragma once

#include "teleop/kinematics.hpp"

namespace teleop {

// Damped least-squares position IK, seeded from q_seed. Used to turn Cartesian waypoints into
// joint targets for the scripted operator and the service's target_ee command.
JointPositions solve_position_ik(const KinematicChain& chain, const Eigen::Vector3d& target,
                                 const JointPositions& q_seed, int max_iter = 200, double damping = 1e-4,
                                 double tol = 1e-10);

}  // namespace teleop
