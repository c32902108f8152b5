#pragma once

// Antigen segmentation: the detector output stream is cut into consecutive
// blocks of z items and each block gets one score per antigen type present.
// DCA output is scored by MCAV (fraction of presentations in mature context),
// SOM output by MBMU (mean binary BMU-distance verdict).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "immunesom/dca.hpp"
#include "immunesom/error.hpp"
#include "immunesom/signal_pipeline.hpp"
#include "immunesom/som.hpp"

namespace immunesom {

enum class ScoreKind { mcav, mbmu };

struct SegmentScore {
    double score = 0.0;
    std::size_t count = 0;

    friend bool operator==(const SegmentScore&, const SegmentScore&) = default;
};

struct Segment {
    std::size_t index = 0;
    std::size_t size = 0;
    bool partial = false;
    std::map<Pid, SegmentScore> scores;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentSeries {
    std::size_t segment_size = 0;
    ScoreKind kind = ScoreKind::mcav;
    std::vector<Segment> segments;

    /// Scores of one antigen type over the segments in which it appears.
    std::vector<double> scores_for(Pid pid) const {
        std::vector<double> out;
        for (const auto& s : segments) {
            if (auto it = s.scores.find(pid); it != s.scores.end()) {
                out.push_back(it->second.score);
            }
        }
        return out;
    }

    friend bool operator==(const SegmentSeries&, const SegmentSeries&) = default;
};

/// Mature presentations / all presentations for one antigen type; empty when
/// the type was never presented.
inline std::optional<double> compute_mcav(std::span<const PresentedAntigenRecord> records, Pid type) {
    std::size_t total = 0;
    std::size_t mature = 0;
    for (const auto& r : records) {
        if (r.antigen_type == type) {
            ++total;
            if (r.context == Context::mature) {
                ++mature;
            }
        }
    }
    if (total == 0) {
        return std::nullopt;
    }
    return static_cast<double>(mature) / static_cast<double>(total);
}

/// MCAV of every presented type.
inline std::map<Pid, double> compute_mcav_all(std::span<const PresentedAntigenRecord> records) {
    std::map<Pid, std::pair<std::size_t, std::size_t>> tally;
    for (const auto& r : records) {
        auto& [mature, total] = tally[r.antigen_type];
        ++total;
        mature += r.context == Context::mature ? 1 : 0;
    }
    std::map<Pid, double> out;
    for (const auto& [pid, t] : tally) {
        out[pid] = static_cast<double>(t.first) / static_cast<double>(t.second);
    }
    return out;
}

inline std::vector<PresentedAntigenRecord> without_forced(std::span<const PresentedAntigenRecord> records) {
    std::vector<PresentedAntigenRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.forced) {
            out.push_back(r);
        }
    }
    return out;
}

namespace detail {

// Cuts `n` items into blocks of z; `value(i)` yields (type, 0/1 verdict).
template <typename ValueFn>
SegmentSeries segment_binary(std::size_t n, std::size_t z, ScoreKind kind, ValueFn value) {
    if (z == 0) {
        throw DomainError("segment size must be >= 1");
    }
    SegmentSeries series{z, kind, {}};
    for (std::size_t begin = 0; begin < n; begin += z) {
        const std::size_t end = std::min(n, begin + z);
        Segment seg;
        seg.index = series.segments.size();
        seg.size = end - begin;
        seg.partial = seg.size < z;
        std::map<Pid, std::size_t> hits;
        for (std::size_t i = begin; i < end; ++i) {
            const auto [pid, v] = value(i);
            ++seg.scores[pid].count;
            hits[pid] += v;
        }
        for (auto& [pid, sc] : seg.scores) {
            sc.score = static_cast<double>(hits[pid]) / static_cast<double>(sc.count);
        }
        series.segments.push_back(std::move(seg));
    }
    return series;
}

} // namespace detail

/// Consecutive blocks of z presentations, per-type MCAV in each. The final
/// block may be short and is flagged partial.
inline SegmentSeries segment_stream(std::span<const PresentedAntigenRecord> records, std::size_t z) {
    return detail::segment_binary(records.size(), z, ScoreKind::mcav, [&](std::size_t i) {
        return std::pair<Pid, std::size_t>{records[i].antigen_type,
                                           records[i].context == Context::mature ? 1u : 0u};
    });
}

/// An antigen event paired with the signal frame of its second.
struct Coupling {
    Pid pid{};
    std::size_t frame_index = 0;

    friend bool operator==(const Coupling&, const Coupling&) = default;
};

struct CouplingSet {
    std::vector<Coupling> couplings;
    std::size_t dropped = 0;  // events whose second has no frame
};

inline CouplingSet couple_antigen_signals(std::span<const AntigenEvent> events,
                                          std::span<const NormalizedSignalFrame> frames) {
    std::unordered_map<Timestamp, std::size_t> by_second;
    by_second.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        by_second.emplace(frames[i].timestamp, i);
    }
    CouplingSet out;
    out.couplings.reserve(events.size());
    for (const auto& e : events) {
        if (auto it = by_second.find(e.timestamp); it != by_second.end()) {
            out.couplings.push_back({e.pid, it->second});
        } else {
            ++out.dropped;
        }
    }
    return out;
}

/// Classifies every coupling against the trained map (one BMU search per
/// distinct frame), cuts the coupling stream into blocks of z and averages
/// the verdicts per antigen type.
inline SegmentSeries compute_mbmu(std::span<const Coupling> couplings,
                                  std::span<const NormalizedSignalFrame> frames, const SomMap& map,
                                  double threshold, std::size_t z) {
    if (!map.trained()) {
        throw DomainError("MBMU requires a trained map");
    }
    std::vector<int> verdict(frames.size(), -1);
    auto classify = [&](std::size_t f) {
        if (verdict[f] < 0) {
            const auto v = frames[f].as_vector();
            verdict[f] = classify_frame(map, v, threshold);
        }
        return static_cast<std::size_t>(verdict[f]);
    };
    for (const auto& c : couplings) {
        if (c.frame_index >= frames.size()) {
            throw DomainError("coupling references a missing frame");
        }
    }
    return detail::segment_binary(couplings.size(), z, ScoreKind::mbmu, [&](std::size_t i) {
        return std::pair<Pid, std::size_t>{couplings[i].pid, classify(couplings[i].frame_index)};
    });
}

/// Per segment index and type: mean score over the series in which the type
/// appears, counts summed. Used for mean-of-runs reporting.
inline SegmentSeries average_series(std::span<const SegmentSeries> runs) {
    if (runs.empty()) {
        throw DomainError("no series to average");
    }
    SegmentSeries out{runs.front().segment_size, runs.front().kind, {}};
    std::size_t longest = 0;
    for (const auto& r : runs) {
        longest = std::max(longest, r.segments.size());
    }
    for (std::size_t s = 0; s < longest; ++s) {
        Segment seg;
        seg.index = s;
        std::map<Pid, std::size_t> appearances;
        for (const auto& r : runs) {
            if (s >= r.segments.size()) {
                continue;
            }
            const auto& src = r.segments[s];
            seg.size = std::max(seg.size, src.size);
            seg.partial = seg.partial || src.partial;
            for (const auto& [pid, sc] : src.scores) {
                auto& dst = seg.scores[pid];
                dst.score += sc.score;
                dst.count += sc.count;
                ++appearances[pid];
            }
        }
        for (auto& [pid, sc] : seg.scores) {
            sc.score /= static_cast<double>(appearances[pid]);
        }
        out.segments.push_back(std::move(seg));
    }
    return out;
}

/// Smallest segment size that cuts `n_items` into at most as many segments
/// as `reference_z` cuts `n_reference` items. The count matches exactly
/// whenever some size can produce it; ceil(n/z) skips values for small z.
inline std::size_t matched_segment_size(std::size_t reference_z, std::size_t n_reference,
                                        std::size_t n_items) {
    if (reference_z == 0 || n_reference == 0 || n_items == 0) {
        throw DomainError("matched_segment_size needs non-zero sizes");
    }
    const std::size_t segments = (n_reference + reference_z - 1) / reference_z;
    if (segments > n_items) {
        throw DomainError("cannot cut " + std::to_string(n_items) + " items into " +
                          std::to_string(segments) + " segments");
    }
    std::size_t z = (n_items + segments - 1) / segments;
    while (z > 1 && (n_items + z - 2) / (z - 1) == segments) {
        --z;
    }
    while ((n_items + z - 1) / z > segments) {
        ++z;
    }
    return z;
}

/// Trailing mean over min(window, points so far) values.
inline std::vector<double> moving_average(std::span<const double> series, std::size_t window) {
    if (window == 0) {
        throw DomainError("moving average window must be >= 1");
    }
    std::vector<double> out(series.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        sum += series[i];
        if (i >= window) {
            sum -= series[i - window];
        }
        const std::size_t n = std::min(window, i + 1);
        out[i] = sum / static_cast<double>(n);
    }
    return out;
}

} // namespace immunesom
