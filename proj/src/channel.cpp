#include "teleop/channel.hpp"

#include <cmath>

namespace teleop {

void ChannelConfig::validate() const {
    if (!(rate_hz > 0) || !std::isfinite(rate_hz)) throw ConfigError("channel rate_hz must be positive");
    if (!(latency_s >= 0) || !std::isfinite(latency_s)) throw ConfigError("channel latency_s must be >= 0");
    if (!(jitter_s >= 0) || jitter_s > latency_s) throw ConfigError("channel jitter_s must lie in [0, latency_s]");
    if (!(drop_prob >= 0 && drop_prob < 1)) throw ConfigError("channel drop_prob must lie in [0, 1)");
}

}  // namespace teleop
