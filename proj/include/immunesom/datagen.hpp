#pragma once

// Seeded synthetic host sessions: per-second raw telemetry, system-call
// antigen events and per-process ground truth.
//
// Background traffic alternates between quiet and busy browsing regimes
// (a two-state Markov chain). A SYN scan, when configured, adds probe
// traffic whose intensity has a base level plus three bumps: the opening
// probe burst, targeted scanning and teardown. Scan traffic is all TCP with
// 40-byte packets, raises RST and ICMP destination-unreachable counts, and
// runs with a root login active.
//
// System-call counts per process and second are Poisson around a log-normal
// rate matched to the configured mean and standard deviation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "immunesom/dca.hpp"
#include "immunesom/error.hpp"
#include "immunesom/rng.hpp"
#include "immunesom/signal_pipeline.hpp"

namespace immunesom {

enum class ScenarioKind { passive_normal, active_normal, normal_only };

enum class ProcessName { nmap, pts, firefox, sshd };

inline std::string_view to_string(ProcessName p) {
    switch (p) {
    case ProcessName::nmap: return "nmap";
    case ProcessName::pts: return "pts";
    case ProcessName::firefox: return "firefox";
    case ProcessName::sshd: return "sshd";
    }
    return "?";
}

inline bool is_anomalous(ProcessName p) { return p == ProcessName::nmap || p == ProcessName::pts; }

struct ProcessModel {
    ProcessName name = ProcessName::sshd;
    Pid pid{};
    double rate_mean = 0.0;  // system calls per active second
    double rate_sd = 0.0;
    Timestamp active_start = 0;  // [start, end)
    Timestamp active_end = 0;
    double scan_rate_factor = 1.0;  // rate multiplier while the scan runs

    bool active_at(Timestamp t) const { return t >= active_start && t < active_end; }
};

struct BackgroundTraffic {
    double busy_fraction = 0.5;     // stationary share of busy seconds
    double mean_dwell = 8.0;        // mean seconds per regime visit (both regimes)
    double quiet_pkts_mean = 40.0;  // packets sent per second
    double quiet_pkts_sd = 10.0;
    double busy_pkts_mean = 650.0;
    double busy_pkts_sd = 250.0;
    double received_per_sent = 1.2;
    double quiet_tcp_share_lo = 0.15;
    double quiet_tcp_share_hi = 0.35;
    double busy_tcp_share_lo = 0.60;
    double busy_tcp_share_hi = 0.90;
    double pkt_size_lo = 70.0;  // average bytes per packet
    double pkt_size_hi = 90.0;
    double quiet_rst_rate = 0.3;
    double busy_rst_rate = 1.5;
    double du_rate = 0.02;
};

struct ScanTraffic {
    double base_intensity = 0.35;
    double spike_amplitude = 1.0;
    double spike_width_frac = 0.02;  // of the scan window, as a Gaussian sd
    double jitter_sd = 0.5;          // log-normal per-second multiplier
    double probes_per_sec = 1200.0;  // at intensity 1
    double rst_per_reachable_probe = 0.55;   // closed-port replies
    double du_per_unreachable_probe = 0.014;  // most unreachable hosts stay silent
    double probe_size = 40.0;
    double du_size = 56.0;
    int hosts_scanned = 254;
    int hosts_available = 70;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::active_normal;
    Timestamp duration = 7000;
    Timestamp scan_start = 0;
    Timestamp scan_duration = 0;
    std::vector<ProcessModel> processes;
    std::uint64_t rng_seed = 0;
    BackgroundTraffic background;
    ScanTraffic scan;
    double antigen_rate_scale = 1.0;  // thins every process rate uniformly

    Timestamp scan_end() const { return scan_start + scan_duration; }
    bool in_scan(Timestamp t) const { return scan_duration > 0 && t >= scan_start && t < scan_end(); }

    void validate() const {
        if (duration <= 0) {
            throw DomainError("scenario duration must be > 0");
        }
        if (scan_duration < 0 || scan_start < 0 || (scan_duration > 0 && scan_end() > duration)) {
            throw DomainError("scan window must lie inside [0, duration)");
        }
        if (!(antigen_rate_scale >= 0.0)) {
            throw DomainError("antigen_rate_scale must be >= 0");
        }
        if (!(background.busy_fraction >= 0.0 && background.busy_fraction <= 1.0) ||
            !(background.mean_dwell >= 1.0)) {
            throw DomainError("background regime parameters out of range");
        }
        for (const auto& p : processes) {
            if (p.rate_mean < 0.0 || p.rate_sd < 0.0 || p.scan_rate_factor < 0.0) {
                throw DomainError("process rates must be >= 0");
            }
        }
    }

    /// Passive normal: SYN scan from shortly after login until ~79% of the
    /// session, with only its shell and the ssh daemon producing antigen.
    /// A local browser shapes the traffic but issues no monitored calls.
    static ScenarioConfig passive_normal(Timestamp duration = 7000, std::uint64_t seed = 0);

    /// Active normal: the same scan starting at ~9% of the session while a
    /// remote browser (parent plus two children) runs throughout.
    static ScenarioConfig active_normal(Timestamp duration = 7000, std::uint64_t seed = 0);

    /// Normal activity only: browsing traffic, no scan, no antigen.
    static ScenarioConfig normal_only(Timestamp duration = 3600, std::uint64_t seed = 0);
};

namespace detail {

inline Timestamp scale_time(Timestamp t_at_7000, Timestamp duration) {
    return static_cast<Timestamp>(std::llround(static_cast<double>(t_at_7000) *
                                               static_cast<double>(duration) / 7000.0));
}

inline ProcessModel process(ProcessName name, std::int32_t pid, double mean, double sd,
                            Timestamp start, Timestamp end, double scan_factor = 1.0) {
    return {name, Pid{pid}, mean, sd, start, end, scan_factor};
}

} // namespace detail

inline ScenarioConfig ScenarioConfig::passive_normal(Timestamp duration, std::uint64_t seed) {
    ScenarioConfig c;
    c.kind = ScenarioKind::passive_normal;
    c.duration = duration;
    c.rng_seed = seed;
    c.scan_start = std::max<Timestamp>(1, detail::scale_time(100, duration));
    c.scan_duration = detail::scale_time(5500, duration) - c.scan_start;
    c.background.busy_fraction = 0.25;
    c.scan.base_intensity = 0.35;
    const Timestamp shell_start = std::max<Timestamp>(0, c.scan_start - 2);
    const Timestamp shell_end = std::min(duration, c.scan_end() + 2);
    c.processes = {
        detail::process(ProcessName::nmap, 4711, 2445.0, 1243.0, c.scan_start, c.scan_end()),
        detail::process(ProcessName::pts, 4690, 120.0, 100.0, shell_start, shell_end),
        detail::process(ProcessName::sshd, 4688, 40.0, 30.0, 0, duration, 0.1),
    };
    return c;
}

inline ScenarioConfig ScenarioConfig::active_normal(Timestamp duration, std::uint64_t seed) {
    ScenarioConfig c;
    c.kind = ScenarioKind::active_normal;
    c.duration = duration;
    c.rng_seed = seed;
    c.scan_start = detail::scale_time(651, duration);
    c.scan_duration = detail::scale_time(5450, duration) - c.scan_start;
    c.background.busy_fraction = 0.5;
    c.scan.base_intensity = 0.15;
    const Timestamp shell_start = std::max<Timestamp>(0, c.scan_start - 2);
    const Timestamp shell_end = std::min(duration, c.scan_end() + 2);
    c.processes = {
        detail::process(ProcessName::nmap, 5120, 2445.0, 1243.0, c.scan_start, c.scan_end()),
        detail::process(ProcessName::pts, 5102, 120.0, 100.0, shell_start, shell_end),
        detail::process(ProcessName::firefox, 3301, 176.0, 170.0, 0, duration),
        detail::process(ProcessName::firefox, 3342, 352.0, 480.0, 0, duration),
        detail::process(ProcessName::firefox, 3343, 352.0, 480.0, 0, duration),
        detail::process(ProcessName::sshd, 3290, 60.0, 40.0, 0, duration),
    };
    return c;
}

inline ScenarioConfig ScenarioConfig::normal_only(Timestamp duration, std::uint64_t seed) {
    ScenarioConfig c;
    c.kind = ScenarioKind::normal_only;
    c.duration = duration;
    c.rng_seed = seed;
    c.background.busy_fraction = 0.5;
    return c;
}

struct ProcessLabel {
    Pid pid{};
    ProcessName name = ProcessName::sshd;
    bool anomalous = false;

    friend bool operator==(const ProcessLabel&, const ProcessLabel&) = default;
};

struct GeneratedSession {
    std::vector<RawSample> samples;
    std::vector<AntigenEvent> antigen;
    std::vector<ProcessLabel> labels;
};

/// Scan intensity at second t (before per-second jitter).
inline double scan_intensity(const ScenarioConfig& c, Timestamp t) {
    if (!c.in_scan(t)) {
        return 0.0;
    }
    const double len = static_cast<double>(c.scan_duration);
    const double x = static_cast<double>(t - c.scan_start);
    const double width = std::max(2.0, c.scan.spike_width_frac * len);
    double v = c.scan.base_intensity;
    for (double centre : {0.04, 0.50, 0.93}) {
        const double d = (x - centre * len) / width;
        v += c.scan.spike_amplitude * std::exp(-0.5 * d * d);
    }
    return v;
}

inline GeneratedSession generate_session(const ScenarioConfig& config) {
    config.validate();
    GeneratedSession out;
    const auto n = static_cast<std::size_t>(config.duration);
    out.samples.reserve(n);

    Rng traffic(config.rng_seed);
    Rng calls(config.rng_seed ^ 0xD1B54A32D192ED03ULL);

    const auto& bg = config.background;
    // Two-state chain with equal-length mean visits scaled to hit busy_fraction.
    const double to_busy = bg.busy_fraction / bg.mean_dwell;
    const double to_quiet = (1.0 - bg.busy_fraction) / bg.mean_dwell;
    bool busy = traffic.bernoulli(bg.busy_fraction);

    std::vector<double> sent_history;
    sent_history.reserve(n);
    std::vector<Pid> second_events;

    for (Timestamp t = 0; t < config.duration; ++t) {
        if (t > 0) {
            busy = busy ? !traffic.bernoulli(to_quiet) : traffic.bernoulli(to_busy);
        }

        double bg_sent = busy ? traffic.normal(bg.busy_pkts_mean, bg.busy_pkts_sd)
                              : traffic.normal(bg.quiet_pkts_mean, bg.quiet_pkts_sd);
        bg_sent = std::max(0.0, std::round(bg_sent));
        const double bg_all = std::round(bg_sent * (1.0 + bg.received_per_sent));
        const double tcp_share = busy ? traffic.uniform(bg.busy_tcp_share_lo, bg.busy_tcp_share_hi)
                                      : traffic.uniform(bg.quiet_tcp_share_lo, bg.quiet_tcp_share_hi);
        const double bg_tcp = std::round(bg_all * tcp_share);
        const double bg_size = traffic.uniform(bg.pkt_size_lo, bg.pkt_size_hi);
        double rst = static_cast<double>(traffic.poisson(busy ? bg.busy_rst_rate : bg.quiet_rst_rate));
        double du = static_cast<double>(traffic.poisson(bg.du_rate));

        double probes = 0.0;
        double scan_rst = 0.0;
        double scan_du = 0.0;
        const double intensity = scan_intensity(config, t);
        if (intensity > 0.0) {
            const auto& sc = config.scan;
            const double jitter = traffic.lognormal_from_moments(1.0, sc.jitter_sd);
            const double a = intensity * jitter;
            const double reach = static_cast<double>(sc.hosts_available) /
                                 static_cast<double>(std::max(1, sc.hosts_scanned));
            probes = std::round(a * sc.probes_per_sec);
            scan_rst = static_cast<double>(traffic.poisson(probes * reach * sc.rst_per_reachable_probe));
            scan_du = static_cast<double>(
                traffic.poisson(probes * (1.0 - reach) * sc.du_per_unreachable_probe));
        }
        rst += scan_rst;
        du += scan_du;

        RawSample s;
        s.timestamp = t;
        s.icmp_du_per_sec = du;
        s.rst_per_sec = rst;
        s.pkts_sent_per_sec = bg_sent + probes;
        s.tcp_pkts_per_sec = bg_tcp + probes + scan_rst;
        s.all_pkts_per_sec = bg_all + probes + scan_rst + scan_du;
        const double bytes = bg_all * bg_size + (probes + scan_rst) * config.scan.probe_size +
                             scan_du * config.scan.du_size;
        s.avg_pkt_size_bytes = s.all_pkts_per_sec > 0.0 ? bytes / s.all_pkts_per_sec : 0.0;
        sent_history.push_back(s.pkts_sent_per_sec);
        // Rate of change averaged over the last two seconds.
        const std::size_t i = sent_history.size() - 1;
        const std::size_t back = std::min<std::size_t>(2, i);
        s.pkt_rate_of_change =
            back == 0 ? 0.0 : std::abs(sent_history[i] - sent_history[i - back]) / static_cast<double>(back);
        s.root_login_active = config.in_scan(t);
        out.samples.push_back(s);

        second_events.clear();
        for (const auto& p : config.processes) {
            if (!p.active_at(t)) {
                continue;
            }
            double mean = p.rate_mean * config.antigen_rate_scale;
            double sd = p.rate_sd * config.antigen_rate_scale;
            if (config.in_scan(t)) {
                mean *= p.scan_rate_factor;
                sd *= p.scan_rate_factor;
            }
            const double rate = calls.lognormal_from_moments(mean, sd);
            const auto count = calls.poisson(rate);
            second_events.insert(second_events.end(), count, p.pid);
        }
        shuffle(second_events.begin(), second_events.end(), calls);
        for (Pid pid : second_events) {
            out.antigen.push_back({t, pid});
        }
    }

    for (const auto& p : config.processes) {
        out.labels.push_back({p.pid, p.name, is_anomalous(p.name)});
    }
    return out;
}

/// `n_sessions` normal-only sessions of `duration` seconds, normalized;
/// session k uses seed + k.
inline std::vector<std::vector<NormalizedSignalFrame>> training_corpus(std::size_t n_sessions,
                                                                       std::uint64_t seed,
                                                                       Timestamp duration = 3600) {
    if (n_sessions == 0) {
        throw DomainError("training corpus needs at least one session");
    }
    std::vector<std::vector<NormalizedSignalFrame>> corpus;
    corpus.reserve(n_sessions);
    for (std::size_t k = 0; k < n_sessions; ++k) {
        const auto session = generate_session(ScenarioConfig::normal_only(duration, seed + k));
        corpus.push_back(normalize_session(session.samples));
    }
    return corpus;
}

} // namespace immunesom
