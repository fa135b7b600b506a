#pragma once

#include "teleop/errors.hpp"

#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace teleop {

struct ChannelConfig {
    double rate_hz = 50.0;
    double latency_s = 0.0;
    double jitter_s = 0.0;
    double drop_prob = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ChannelStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
    double mean_delay = 0.0;
};

class TimeRegressionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

template <class Payload>
struct TimestampedMessage {
    std::uint64_t seq = 0;
    double sent_at = 0.0;
    double deliver_at = 0.0;
    Payload payload{};
};

// One direction of a lossy, delayed link. Sends faster than rate_hz are counted as dropped.
template <class Payload>
class Channel {
public:
    using Message = TimestampedMessage<Payload>;

    explicit Channel(const ChannelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

    // Returns true if the message was enqueued.
    bool send(const Payload& payload, double t_now) {
        if (has_sent_ && t_now < last_send_) throw TimeRegressionError("channel send time went backwards");
        has_sent_ = true;
        last_send_ = t_now;
        const std::uint64_t seq = next_seq_++;
        ++stats_.sent;
        // both draws happen on every send so the random stream does not depend on outcomes
        const double u_jitter = unit(rng_());
        const double u_drop = unit(rng_());
        const double min_gap = 1.0 / cfg_.rate_hz;
        if (has_accepted_ && t_now - last_accept_ < min_gap * (1.0 - 1e-9)) {
            ++stats_.dropped;
            return false;
        }
        if (u_drop < cfg_.drop_prob) {
            ++stats_.dropped;
            return false;
        }
        has_accepted_ = true;
        last_accept_ = t_now;
        Message m;
        m.seq = seq;
        m.sent_at = t_now;
        m.deliver_at = t_now + cfg_.latency_s + (2.0 * u_jitter - 1.0) * cfg_.jitter_s;
        if (m.deliver_at < t_now) m.deliver_at = t_now;
        m.payload = payload;
        queue_.push(std::move(m));
        return true;
    }

    // All messages due by t_now, ordered by (deliver_at, seq).
    std::vector<Message> deliver(double t_now) {
        std::vector<Message> out;
        while (!queue_.empty() && queue_.top().deliver_at <= t_now) {
            out.push_back(queue_.top());
            queue_.pop();
            ++stats_.delivered;
            delay_sum_ += out.back().deliver_at - out.back().sent_at;
        }
        return out;
    }

    ChannelStats stats() const {
        ChannelStats s = stats_;
        s.in_flight = queue_.size();
        s.mean_delay = s.delivered ? delay_sum_ / static_cast<double>(s.delivered) : 0.0;
        return s;
    }

    const ChannelConfig& config() const { return cfg_; }

private:
    struct Later {
        bool operator()(const Message& a, const Message& b) const {
            if (a.deliver_at != b.deliver_at) return a.deliver_at > b.deliver_at;
            return a.seq > b.seq;
        }
    };

    static double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

    ChannelConfig cfg_;
    std::mt19937_64 rng_;
    std::priority_queue<Message, std::vector<Message>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    bool has_sent_ = false;
    bool has_accepted_ = false;
    double last_send_ = 0.0;
    double last_accept_ = 0.0;
    double delay_sum_ = 0.0;
    ChannelStats stats_;
};

// Receiver side: keeps only the newest sample by sequence number.
template <class Payload>
struct LatestSample {
    Payload value{};
    std::uint64_t seq = 0;
    bool fresh = false;  // set when the last delivery batch replaced the value
    bool received = false;

    void accept(const std::vector<TimestampedMessage<Payload>>& batch) {
        fresh = false;
        for (const auto& m : batch) {
            if (received && m.seq <= seq) continue;
            value = m.payload;
            seq = m.seq;
            received = true;
            fresh = true;
        }
    }
};

}  // namespace teleop
