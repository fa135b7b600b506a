#include "teleop/channel.hpp"

#include <doctest.h>

#include <algorithm>

using namespace teleop;

namespace {

ChannelConfig cfg(double latency, double jitter, double drop, std::uint64_t seed = 1, double rate = 50.0) {
    ChannelConfig c;
    c.rate_hz = rate;
    c.latency_s = latency;
    c.jitter_s = jitter;
    c.drop_prob = drop;
    c.seed = seed;
    return c;
}

void check_conservation(const Channel<int>& ch) {
    const auto s = ch.stats();
    CHECK(s.sent == s.delivered + s.dropped + s.in_flight);
}

}  // namespace

TEST_CASE("ideal channel delivers immediately") {
    Channel<int> ch(cfg(0, 0, 0));
    CHECK(ch.send(7, 0.5));
    const auto out = ch.deliver(0.5);
    REQUIRE(out.size() == 1);
    CHECK(out[0].deliver_at == out[0].sent_at);
    CHECK(out[0].payload == 7);
}

TEST_CASE("config invariants") {
    CHECK_THROWS_AS(Channel<int>(cfg(0, 0, 1.0)), ConfigError);
    CHECK_THROWS_AS(Channel<int>(cfg(0.01, 0.02, 0)), ConfigError);
    CHECK_THROWS_AS(Channel<int>(cfg(-0.01, 0, 0)), ConfigError);
    CHECK_THROWS_AS(Channel<int>(cfg(0, 0, 0, 1, 0.0)), ConfigError);
}

TEST_CASE("time regression is an error") {
    Channel<int> ch(cfg(0, 0, 0));
    ch.send(1, 1.0);
    CHECK_THROWS_AS(ch.send(2, 0.5), TimeRegressionError);
}

TEST_CASE("fresh and empty channel") {
    Channel<int> ch(cfg(0.05, 0.01, 0.2));
    CHECK(ch.deliver(10.0).empty());
    const auto s = ch.stats();
    CHECK(s.sent == 0);
    CHECK(s.delivered == 0);
    CHECK(s.dropped == 0);
    CHECK(s.in_flight == 0);
    CHECK(s.mean_delay == 0.0);
}

TEST_CASE("delivery threshold") {
    Channel<int> ch(cfg(0.1, 0, 0));
    ch.send(1, 0.0);
    ch.send(2, 0.1);
    const auto a = ch.deliver(0.15);
    REQUIRE(a.size() == 1);
    CHECK(a[0].payload == 1);
    const auto b = ch.deliver(0.2);
    REQUIRE(b.size() == 1);
    CHECK(b[0].payload == 2);
}

TEST_CASE("counters: sent, delivered, dropped") {
    // the second send comes too soon for the rate limit and is dropped
    Channel<int> ch(cfg(0, 0, 0));
    ch.send(1, 0.0);
    ch.send(2, 0.001);
    ch.send(3, 0.02);
    ch.deliver(1.0);
    const auto s = ch.stats();
    CHECK(s.sent == 3);
    CHECK(s.delivered == 2);
    CHECK(s.dropped == 1);
}

TEST_CASE("drop statistics") {
    Channel<int> ch(cfg(0.0, 0.0, 0.5, 123));
    for (int k = 0; k < 10000; ++k) ch.send(k, k * 0.02);
    ch.deliver(1e9);
    const double frac = static_cast<double>(ch.stats().delivered) / 10000.0;
    CHECK(frac >= 0.48);
    CHECK(frac <= 0.52);
    check_conservation(ch);
}

TEST_CASE("mean delay stays within the jitter envelope") {
    const double latency = 0.05, jitter = 0.02;
    Channel<int> ch(cfg(latency, jitter, 0.1, 9));
    double lo = 1e9, hi = -1e9;
    for (int k = 0; k < 1000; ++k) {
        ch.send(k, k * 0.02);
        for (const auto& m : ch.deliver(k * 0.02)) {
            lo = std::min(lo, m.deliver_at - m.sent_at);
            hi = std::max(hi, m.deliver_at - m.sent_at);
        }
        check_conservation(ch);
    }
    for (const auto& m : ch.deliver(1e9)) {
        lo = std::min(lo, m.deliver_at - m.sent_at);
        hi = std::max(hi, m.deliver_at - m.sent_at);
    }
    const auto s = ch.stats();
    CHECK(s.delivered > 800);
    CHECK(std::abs(s.mean_delay - latency) <= jitter);
    CHECK(std::abs(s.mean_delay - latency) <= 0.002);
    CHECK(lo >= latency - jitter - 1e-12);
    CHECK(hi <= latency + jitter + 1e-12);
}

TEST_CASE("jittered messages come out in delivery-time order") {
    Channel<int> ch(cfg(0.1, 0.09, 0.0, 77));
    std::vector<TimestampedMessage<int>> all;
    for (int k = 0; k < 500; ++k) {
        ch.send(k, k * 0.02);
        for (auto& m : ch.deliver(k * 0.02)) all.push_back(m);
    }
    for (auto& m : ch.deliver(1e9)) all.push_back(m);
    REQUIRE(all.size() == 500);
    bool reordered = false;
    for (std::size_t i = 1; i < all.size(); ++i) {
        CHECK(all[i - 1].deliver_at <= all[i].deliver_at);
        reordered = reordered || all[i].seq < all[i - 1].seq;
    }
    // with this much jitter some messages overtake earlier ones
    CHECK(reordered);
    std::vector<std::uint64_t> seqs;
    for (const auto& m : all) seqs.push_back(m.seq);
    std::sort(seqs.begin(), seqs.end());
    for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(seqs[i] == i);
}

TEST_CASE("latest sample wins") {
    LatestSample<int> rx;
    std::vector<TimestampedMessage<int>> batch(3);
    batch[0].seq = 5; batch[0].payload = 50;
    batch[1].seq = 3; batch[1].payload = 30;
    batch[2].seq = 4; batch[2].payload = 40;
    rx.accept(batch);
    CHECK(rx.value == 50);
    CHECK(rx.fresh);

    std::vector<TimestampedMessage<int>> stale(1);
    stale[0].seq = 2;
    stale[0].payload = 20;
    rx.accept(stale);
    CHECK(rx.value == 50);
    CHECK_FALSE(rx.fresh);
}

TEST_CASE("same seed and schedule give the same delivery trace") {
    auto run = [](std::uint64_t seed) {
        Channel<int> ch(cfg(0.05, 0.03, 0.3, seed));
        std::vector<std::pair<std::uint64_t, double>> out;
        for (int k = 0; k < 2000; ++k) {
            ch.send(k, k * 0.02);
            for (const auto& m : ch.deliver(k * 0.02)) out.emplace_back(m.seq, m.deliver_at);
        }
        return out;
    };
    CHECK(run(4) == run(4));
    CHECK(run(4) != run(5));
}

TEST_CASE("zero-config channel delays by at most one poll period") {
    Channel<int> ch(cfg(0, 0, 0));
    const double poll = 0.02;
    for (int k = 0; k < 100; ++k) {
        ch.send(k, k * poll + 0.007);
        const auto out = ch.deliver((k + 1) * poll);
        REQUIRE(out.size() == 1);
        CHECK(out[0].payload == k);
        CHECK((k + 1) * poll - out[0].sent_at <= poll);
    }
}
