#pragma once

// Raw host telemetry -> seven normalized input signals.
//
//   pamp1  ICMP destination-unreachable errors/s, x5, capped at 100
//   pamp2  TCP RST packets/s, capped at 100
//   ds1    packets sent/s through a base-2 sigmoid centred on 750/s
//   ds2    percentage of TCP packets among all packets
//   ss1    inverted packet-send rate of change, 0 at >= 100/s
//   ss2    step function over the 60 s moving mean of average packet size
//   infl   1 while a remote root login is active
//
// All signals except infl lie in [0, 100].

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <algorithm>
#include <vector>

#include "immunesom/error.hpp"

namespace immunesom {

using Timestamp = std::int64_t;

struct RawSample {
    Timestamp timestamp = 0;
    double icmp_du_per_sec = 0.0;
    double rst_per_sec = 0.0;
    double pkts_sent_per_sec = 0.0;
    double tcp_pkts_per_sec = 0.0;
    double all_pkts_per_sec = 0.0;
    double pkt_rate_of_change = 0.0;
    double avg_pkt_size_bytes = 0.0;
    bool root_login_active = false;

    friend bool operator==(const RawSample&, const RawSample&) = default;
};

inline constexpr std::size_t kSignalDim = 7;
using SignalVector = std::array<double, kSignalDim>;

struct NormalizedSignalFrame {
    Timestamp timestamp = 0;
    double pamp1 = 0.0;
    double pamp2 = 0.0;
    double ds1 = 0.0;
    double ds2 = 0.0;
    double ss1 = 0.0;
    double ss2 = 0.0;
    bool inflammation = false;

    /// Feature-vector view in column order pamp1..ss2, infl (infl as 0/1).
    SignalVector as_vector() const {
        return {pamp1, pamp2, ds1, ds2, ss1, ss2, inflammation ? 1.0 : 0.0};
    }

    friend bool operator==(const NormalizedSignalFrame&, const NormalizedSignalFrame&) = default;
};

namespace detail {

inline void require_non_negative(double raw, const char* signal) {
    if (!(raw >= 0.0)) {
        throw DomainError(std::string(signal) + ": raw value must be >= 0, got " +
                          std::to_string(raw));
    }
}

} // namespace detail

inline double normalize_pamp1(double raw) {
    detail::require_non_negative(raw, "pamp1");
    return std::min(100.0, raw * 5.0);
}

inline double normalize_pamp2(double raw) {
    detail::require_non_negative(raw, "pamp2");
    return std::min(100.0, raw);
}

inline double normalize_ds1(double raw) {
    detail::require_non_negative(raw, "ds1");
    const double s = 1.0 / (1.0 + std::exp2(7.5 - raw / 100.0)) * 100.0;
    return std::min(s, 100.0);
}

/// Zero traffic carries no evidence of TCP dominance and maps to 0.
inline double normalize_ds2(double tcp, double all) {
    detail::require_non_negative(tcp, "ds2 tcp");
    detail::require_non_negative(all, "ds2 all");
    if (tcp > all) {
        throw DomainError("ds2: tcp packets (" + std::to_string(tcp) +
                          ") exceed all packets (" + std::to_string(all) + ")");
    }
    if (all == 0.0) {
        return 0.0;
    }
    return tcp / all * 100.0;
}

inline double normalize_ss1(double raw) {
    detail::require_non_negative(raw, "ss1");
    return std::min(100.0, std::max(0.0, (100.0 - raw) * 10.0 / 9.0));
}

/// Moving window of per-second average packet sizes feeding SS-2.
class Ss2State {
public:
    static constexpr std::size_t kWindowLen = 60;

    void push(double avg_pkt_size) {
        window_[(start_ + size_) % kWindowLen] = avg_pkt_size;
        if (size_ < kWindowLen) {
            ++size_;
        } else {
            start_ = (start_ + 1) % kWindowLen;
        }
    }

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    /// Mean over populated entries, summed oldest first.
    double mean() const {
        if (size_ == 0) {
            return 0.0;
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < size_; ++k) {
            sum += window_[(start_ + k) % kWindowLen];
        }
        return sum / static_cast<double>(size_);
    }

private:
    std::array<double, kWindowLen> window_{};
    std::size_t start_ = 0;
    std::size_t size_ = 0;
};

/// Step mapping of a windowed mean packet size: (-inf,45] -> 0, (45,50] -> 10,
/// (50,60] -> 50, (60,inf) -> 100.
inline double ss2_band(double mean_size) {
    if (mean_size <= 45.0) {
        return 0.0;
    }
    if (mean_size <= 50.0) {
        return 10.0;
    }
    if (mean_size <= 60.0) {
        return 50.0;
    }
    return 100.0;
}

inline double normalize_ss2(Ss2State& state, double avg_pkt_size) {
    detail::require_non_negative(avg_pkt_size, "ss2");
    state.push(avg_pkt_size);
    return ss2_band(state.mean());
}

inline int inflammation_signal(bool root_login_active) { return root_login_active ? 1 : 0; }

/// Checks the RawSample invariants; throws DomainError on violation.
inline void validate(const RawSample& s) {
    detail::require_non_negative(s.icmp_du_per_sec, "icmp_du");
    detail::require_non_negative(s.rst_per_sec, "rst");
    detail::require_non_negative(s.pkts_sent_per_sec, "pkts");
    detail::require_non_negative(s.tcp_pkts_per_sec, "tcp_pkts");
    detail::require_non_negative(s.all_pkts_per_sec, "all_pkts");
    detail::require_non_negative(s.pkt_rate_of_change, "pkt_roc");
    detail::require_non_negative(s.avg_pkt_size_bytes, "avg_size");
    if (s.tcp_pkts_per_sec > s.all_pkts_per_sec) {
        throw DomainError("t=" + std::to_string(s.timestamp) +
                          ": tcp_pkts exceeds all_pkts");
    }
}

/// Applies all seven normalizers. Mutates only the SS-2 window; the result
/// depends on nothing but (sample, window contents).
inline NormalizedSignalFrame build_frame(const RawSample& sample, Ss2State& state) {
    validate(sample);
    NormalizedSignalFrame f;
    f.timestamp = sample.timestamp;
    f.pamp1 = normalize_pamp1(sample.icmp_du_per_sec);
    f.pamp2 = normalize_pamp2(sample.rst_per_sec);
    f.ds1 = normalize_ds1(sample.pkts_sent_per_sec);
    f.ds2 = normalize_ds2(sample.tcp_pkts_per_sec, sample.all_pkts_per_sec);
    f.ss1 = normalize_ss1(sample.pkt_rate_of_change);
    f.ss2 = normalize_ss2(state, sample.avg_pkt_size_bytes);
    f.inflammation = inflammation_signal(sample.root_login_active) == 1;
    return f;
}

/// One session's normalizer. Single writer: owns its SS-2 window and rejects
/// samples whose timestamps do not strictly increase.
class SignalPipeline {
public:
    NormalizedSignalFrame push(const RawSample& sample) {
        if (last_ && sample.timestamp <= *last_) {
            throw SequencingError("sample timestamp " + std::to_string(sample.timestamp) +
                                  " does not follow " + std::to_string(*last_));
        }
        auto frame = build_frame(sample, ss2_);
        last_ = sample.timestamp;
        return frame;
    }

    const Ss2State& ss2_state() const noexcept { return ss2_; }

private:
    Ss2State ss2_;
    std::optional<Timestamp> last_;
};

template <typename Range>
auto normalize_session(const Range& samples) {
    std::vector<NormalizedSignalFrame> frames;
    SignalPipeline pipeline;
    for (const auto& s : samples) {
        frames.push_back(pipeline.push(s));
    }
    return frames;
}

} // namespace immunesom
