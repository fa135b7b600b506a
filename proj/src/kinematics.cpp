#include "teleop/kinematics.hpp"

#include "teleop/errors.hpp"
#include "teleop/json_util.hpp"

#include <cmath>
#include <fstream>

namespace teleop {

namespace {

void check_q(const KinematicChain& chain, const JointPositions& q) {
    require_dim(q.size(), chain.dof(), "joint positions");
    for (Eigen::Index i = 0; i < q.size(); ++i)
        if (!std::isfinite(q[i]))
            throw NonFiniteError("joint position " + std::to_string(i) + " is not finite",
                                 static_cast<int>(i));
}

}  // namespace

void KinematicChain::validate() const {
    if (rows.empty()) throw ConfigError("chain '" + name + "' has no rows");
    if (limits.size() != rows.size())
        throw ConfigError("chain '" + name + "': " + std::to_string(limits.size()) +
                          " limits for " + std::to_string(rows.size()) + " joints");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const DHRow& r = rows[i];
        if (!std::isfinite(r.a) || !std::isfinite(r.alpha) || !std::isfinite(r.d) ||
            !std::isfinite(r.theta_offset))
            throw ConfigError("chain '" + name + "' row " + std::to_string(i) + " is not finite");
        if (r.a < 0) throw ConfigError("chain '" + name + "' row " + std::to_string(i) + ": a < 0");
        if (!(limits[i].first < limits[i].second))
            throw ConfigError("chain '" + name + "' joint " + std::to_string(i) + ": lo >= hi");
    }
}

Eigen::VectorXd KinematicChain::lower() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = limits[i].first;
    return v;
}

Eigen::VectorXd KinematicChain::upper() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = limits[i].second;
    return v;
}

Eigen::VectorXd KinematicChain::clamp(const Eigen::VectorXd& q) const {
    return q.cwiseMax(lower()).cwiseMin(upper());
}

Eigen::Matrix<double, 6, Eigen::Dynamic> JacobianMatrix::stacked() const {
    Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, linear.cols());
    J.topRows<3>() = linear;
    J.bottomRows<3>() = angular;
    return J;
}

Eigen::Matrix<double, 6, 1> Wrench::stacked() const {
    Eigen::Matrix<double, 6, 1> w;
    w << force, moment;
    return w;
}

Eigen::Isometry3d dh_transform(const DHRow& row, double qi) {
    double theta = row.theta_offset;
    double d = row.d;
    if (row.kind == JointKind::revolute)
        theta += qi;
    else
        d += qi;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    Eigen::Matrix4d m;
    m << ct, -st * ca, st * sa, row.a * ct,
         st, ct * ca, -ct * sa, row.a * st,
         0, sa, ca, d,
         0, 0, 0, 1;
    return Eigen::Isometry3d(m);
}

std::vector<Eigen::Isometry3d> link_frames(const KinematicChain& chain, const JointPositions& q) {
    check_q(chain, q);
    std::vector<Eigen::Isometry3d> frames;
    frames.reserve(chain.rows.size() + 1);
    frames.push_back(chain.base);
    for (int i = 0; i < chain.dof(); ++i) frames.push_back(frames.back() * dh_transform(chain.rows[i], q[i]));
    return frames;
}

Pose forward_kinematics(const KinematicChain& chain, const JointPositions& q) {
    const Eigen::Isometry3d T = link_frames(chain, q).back();
    Pose p;
    p.position = T.translation();
    p.orientation = Eigen::Quaterniond(T.rotation()).normalized();
    return p;
}

JacobianMatrix geometric_jacobian(const KinematicChain& chain, const JointPositions& q) {
    const auto frames = link_frames(chain, q);
    const int n = chain.dof();
    const Eigen::Vector3d pe = frames.back().translation();
    JacobianMatrix J;
    J.linear.setZero(3, n);
    J.angular.setZero(3, n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d z = frames[i].linear().col(2);
        if (chain.rows[i].kind == JointKind::revolute) {
            J.linear.col(i) = z.cross(pe - frames[i].translation());
            J.angular.col(i) = z;
        } else {
            J.linear.col(i) = z;
        }
    }
    return J;
}

KinematicChain scale_chain(const KinematicChain& chain, double s) {
    if (!(s > 0) || !std::isfinite(s)) throw ConfigError("scale factor must be positive");
    KinematicChain out = chain;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        out.rows[i].a *= s;
        out.rows[i].d *= s;
        if (out.rows[i].kind == JointKind::prismatic) {
            out.limits[i].first *= s;
            out.limits[i].second *= s;
        }
    }
    out.base.translation() *= s;
    return out;
}

double chain_scale_between(const KinematicChain& follower, const KinematicChain& leader, double tol) {
    if (follower.dof() != leader.dof()) return -1.0;
    double s = 0.0;
    auto lengths = [](const KinematicChain& c) {
        std::vector<double> v;
        for (const auto& r : c.rows) {
            v.push_back(r.a);
            v.push_back(r.d);
        }
        for (int k = 0; k < 3; ++k) v.push_back(c.base.translation()[k]);
        return v;
    };
    const auto lf = lengths(follower), ll = lengths(leader);
    for (std::size_t i = 0; i < lf.size() && s == 0.0; ++i)
        if (std::abs(lf[i]) > tol) s = ll[i] / lf[i];
    if (s == 0.0) s = 1.0;
    if (!(s > 0)) return -1.0;
    for (std::size_t i = 0; i < lf.size(); ++i)
        if (std::abs(ll[i] - s * lf[i]) > tol * (1.0 + std::abs(ll[i]))) return -1.0;
    for (int i = 0; i < follower.dof(); ++i) {
        const DHRow &a = follower.rows[i], &b = leader.rows[i];
        if (a.kind != b.kind || std::abs(a.alpha - b.alpha) > tol ||
            std::abs(a.theta_offset - b.theta_offset) > tol)
            return -1.0;
    }
    if (!follower.base.linear().isApprox(leader.base.linear(), tol)) return -1.0;
    return s;
}

JointTorques external_joint_torque(const JacobianMatrix& J, const Wrench& w) {
    return J.linear.transpose() * w.force + J.angular.transpose() * w.moment;
}

KinematicChain chain_from_json(const json& j) {
    KinematicChain c;
    c.name = j.value("name", std::string("chain"));
    const json& rows = require(j, "rows");
    if (!rows.is_array()) throw ConfigError("'rows' must be an array");
    for (const json& r : rows) {
        DHRow row;
        row.a = get_or(r, "a", 0.0);
        row.alpha = get_or(r, "alpha", 0.0);
        row.d = get_or(r, "d", 0.0);
        row.theta_offset = get_or(r, "theta_offset", 0.0);
        const std::string kind = r.value("kind", std::string("revolute"));
        if (kind == "revolute")
            row.kind = JointKind::revolute;
        else if (kind == "prismatic")
            row.kind = JointKind::prismatic;
        else
            throw ConfigError("unknown joint kind '" + kind + "'");
        c.rows.push_back(row);
    }
    if (j.contains("limits")) {
        for (const json& l : j.at("limits")) {
            if (!l.is_array() || l.size() != 2) throw ConfigError("each limit must be [lo, hi]");
            c.limits.emplace_back(as_double(l[0], "limits"), as_double(l[1], "limits"));
        }
    } else {
        c.limits.assign(c.rows.size(), {-M_PI, M_PI});
    }
    if (j.contains("base")) {
        const json& b = j.at("base");
        if (b.contains("position")) c.base.translation() = as_vec3(b.at("position"), "base.position");
        if (b.contains("quaternion")) {
            Eigen::VectorXd wxyz = as_vector(b.at("quaternion"), 4, "base.quaternion");
            c.base.linear() = Eigen::Quaterniond(wxyz[0], wxyz[1], wxyz[2], wxyz[3]).normalized().toRotationMatrix();
        }
    }
    c.validate();
    return c;
}

json chain_to_json(const KinematicChain& chain) {
    json rows = json::array();
    for (const auto& r : chain.rows)
        rows.push_back({{"a", r.a}, {"alpha", r.alpha}, {"d", r.d}, {"theta_offset", r.theta_offset},
                        {"kind", r.kind == JointKind::revolute ? "revolute" : "prismatic"}});
    json limits = json::array();
    for (const auto& l : chain.limits) limits.push_back({l.first, l.second});
    const Eigen::Quaterniond qb(chain.base.linear());
    return {{"name", chain.name},
            {"rows", rows},
            {"limits", limits},
            {"base",
             {{"position", to_json_array(chain.base.translation())},
              {"quaternion", {qb.w(), qb.x(), qb.y(), qb.z()}}}}};
}

KinematicChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chain file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("chain file '" + path + "': " + e.what());
    }
    return chain_from_json(j);
}

}  // namespace teleop
