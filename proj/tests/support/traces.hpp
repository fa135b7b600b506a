#pragma once

#include "teleop/session.hpp"

namespace testtrace {

// Mean of f over the last n entries.
template <class F>
Eigen::VectorXd tail_mean(const teleop::SessionTrace& tr, std::size_t n, F f) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f(tr.entries.back()).size());
    for (std::size_t k = tr.size() - n; k < tr.size(); ++k) acc += f(tr.entries[k]);
    return acc / static_cast<double>(n);
}

}  // namespace testtrace
