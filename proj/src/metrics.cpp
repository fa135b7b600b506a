#include "teleop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teleop {

namespace {

bool finite_entry(const TraceEntry& e) {
    return e.q_l.allFinite() && e.qdot_l.allFinite() && e.q_f.allFinite() && e.qdot_f.allFinite() &&
           e.tau_ext.allFinite() && e.tau_l_ref.allFinite();
}

// slope of y on x with intercept
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0) throw std::runtime_error("contact segment has no displacement");
    return sxy / sxx;
}

// max |residual| after removing the least-squares line through v[0..n)
double detrended_peak(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> x(n);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(i);
        mx += x[i];
        my += v[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (v[i] - my);
    }
    const double b = sxx > 0 ? sxy / sxx : 0.0;
    double peak = 0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(v[i] - my - b * (x[i] - mx)));
    return peak;
}

}  // namespace

double tracking_rmse(const SessionTrace& trace) {
    if (trace.entries.empty()) throw std::invalid_argument("tracking_rmse: empty trace");
    double sum = 0;
    std::size_t count = 0;
    for (const auto& e : trace.entries) {
        sum += (e.q_l - e.q_f).squaredNorm();
        count += static_cast<std::size_t>(e.q_l.size());
    }
    return std::sqrt(sum / static_cast<double>(count));
}

StiffnessEstimate perceived_stiffness(const SessionTrace& trace, std::size_t min_segment) {
    const auto& E = trace.entries;
    std::size_t best_b = 0, best_len = 0;
    for (std::size_t i = 0; i < E.size();) {
        if (!E[i].in_contact) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < E.size() && E[j].in_contact) ++j;
        if (j - i > best_len) {
            best_len = j - i;
            best_b = i;
        }
        i = j;
    }
    if (best_len < std::max<std::size_t>(min_segment, 2))
        throw std::runtime_error("perceived_stiffness: no sustained contact segment");

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(E[best_b].tau_ext.size());
    for (std::size_t k = best_b; k < best_b + best_len; ++k) dir += E[k].tau_ext;
    if (dir.norm() <= 0) throw std::runtime_error("perceived_stiffness: contact segment carries no torque");
    dir.normalize();

    std::vector<double> xl, yl, xf, yf;
    for (std::size_t k = best_b; k < best_b + best_len; ++k) {
        xl.push_back(dir.dot(E[k].q_l));
        yl.push_back(-dir.dot(E[k].tau_l_ref));
        xf.push_back(dir.dot(E[k].q_f));
        yf.push_back(dir.dot(E[k].tau_ext));
    }
    StiffnessEstimate s;
    s.begin = best_b;
    s.end = best_b + best_len;
    s.leader_slope = ls_slope(xl, yl);
    s.follower_slope = ls_slope(xf, yf);
    if (s.follower_slope == 0) throw std::runtime_error("perceived_stiffness: zero follower stiffness");
    s.ratio = s.leader_slope / s.follower_slope;
    return s;
}

InstabilityReport detect_instability(const SessionTrace& trace, const InstabilityParams& p) {
    InstabilityReport r;
    auto flag = [&](double t) {
        r.unstable = true;
        if (!r.onset || t < *r.onset) r.onset = t;
    };
    const auto& E = trace.entries;
    if (trace.diverged_tick) flag(static_cast<double>(*trace.diverged_tick) * trace.dt);
    for (const auto& e : E) {
        if (!finite_entry(e) || e.qdot_l.cwiseAbs().maxCoeff() > p.qdot_max ||
            e.qdot_f.cwiseAbs().maxCoeff() > p.qdot_max) {
            flag(e.t);
            break;
        }
    }

    if (E.empty() || p.window < 3) return r;
    const std::size_t nwin = E.size() / p.window;
    const long n = E.front().tau_l_ref.size();
    std::vector<double> env(nwin, 0.0), level(nwin, 0.0);
    std::vector<double> buf(p.window);
    for (std::size_t w = 0; w < nwin; ++w) {
        for (long j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < p.window; ++k) {
                buf[k] = E[w * p.window + k].tau_l_ref[j];
                level[w] = std::max(level[w], std::abs(buf[k]));
            }
            env[w] = std::max(env[w], detrended_peak(buf));
        }
    }
    // growth judged over a span of growth_windows windows, so a fast rise that saturates
    // into a limit cycle is caught as well as a steady one; the grown envelope has to hold
    // for two windows, which rules out one-off kinks
    const std::size_t span = static_cast<std::size_t>(std::max(1, p.growth_windows));
    const double needed = std::pow(p.growth_ratio, static_cast<double>(span));
    for (std::size_t w = 0; w + span < nwin; ++w) {
        const std::size_t v = w + span;
        const double grown = std::min(env[v - 1], env[v]);
        const double floor_v = std::max(p.envelope_floor, p.relative_floor * std::max(level[v - 1], level[v]));
        if (env[w] >= p.envelope_floor && std::isfinite(grown) && grown >= floor_v && grown > needed * env[w]) {
            flag(E[(w + 1) * p.window].t);
            break;
        }
    }
    return r;
}

SessionMetrics compute_metrics(const SessionTrace& trace, const InstabilityParams& p) {
    SessionMetrics m;
    if (!trace.entries.empty()) m.tracking_rmse = tracking_rmse(trace);
    try {
        const auto s = perceived_stiffness(trace);
        m.perceived_stiffness = s.leader_slope;
        m.stiffness_ratio = s.ratio;
    } catch (const std::runtime_error&) {
    }
    const auto inst = detect_instability(trace, p);
    m.unstable = inst.unstable;
    m.instability_onset = inst.onset;
    return m;
}

}  // namespace teleop
