#pragma once

// CSV and params-file readers/writers for every on-disk artifact.
//
// Readers check the header exactly and report the 1-based line number of the
// first malformed row via ParseError. Writers use fixed formats so identical
// inputs produce identical bytes.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "immunesom/datagen.hpp"
#include "immunesom/dca.hpp"
#include "immunesom/error.hpp"
#include "immunesom/rank_test.hpp"
#include "immunesom/segments.hpp"
#include "immunesom/signal_pipeline.hpp"
#include "immunesom/som.hpp"

namespace immunesom::io {

inline constexpr std::string_view kRawHeader = "t,icmp_du,rst,pkts,tcp_pkts,all_pkts,pkt_roc,avg_size,root";
inline constexpr std::string_view kFrameHeader = "t,pamp1,pamp2,ds1,ds2,ss1,ss2,infl";
inline constexpr std::string_view kAntigenHeader = "t,pid,name";
inline constexpr std::string_view kLabelHeader = "pid,name,label";
inline constexpr std::string_view kRecordHeader = "cycle,antigen_type,context,o_semi,o_mature,forced";
inline constexpr std::string_view kSegmentHeader = "segment_index,antigen_type,score,count,partial";
inline constexpr std::string_view kUMatrixHeader = "row,col,u";

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, spec, v);
    return std::string(buf, static_cast<std::size_t>(n));
}

/// Shortest form that round-trips a double.
inline std::string g17(double v) { return fmt("%.17g", v); }
inline std::string f6(double v) { return fmt("%.6f", v); }

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Line-oriented reader tracking the current line number.
class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (!line.empty()) {
                return true;
            }
        }
        return false;
    }

    void expect_header(std::string_view header) {
        std::string line;
        if (!next(line)) {
            fail("empty file, expected header '" + std::string(header) + "'");
        }
        if (trim(line) != header) {
            fail("expected header '" + std::string(header) + "', got '" + line + "'");
        }
    }

    std::vector<std::string_view> fields(std::string_view line, std::size_t expected) {
        auto f = split(line);
        if (f.size() != expected) {
            fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()));
        }
        for (auto& s : f) {
            s = trim(s);
        }
        return f;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

    template <typename T>
    T number(std::string_view s, const char* column) const {
        T v{};
        const auto* end = s.data() + s.size();
        const auto [ptr, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc{} || ptr != end || s.empty()) {
            fail(std::string("bad ") + column + " value '" + std::string(s) + "'");
        }
        return v;
    }

    bool flag(std::string_view s, const char* column) const {
        if (s == "1" || s == "true") {
            return true;
        }
        if (s == "0" || s == "false") {
            return false;
        }
        fail(std::string("bad ") + column + " flag '" + std::string(s) + "'");
    }

    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

} // namespace detail

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    return out;
}

// ---- raw session ----------------------------------------------------------

inline void write_raw(std::ostream& out, const std::vector<RawSample>& samples) {
    out << kRawHeader << '\n';
    for (const auto& s : samples) {
        out << s.timestamp << ',' << detail::g17(s.icmp_du_per_sec) << ',' << detail::g17(s.rst_per_sec)
            << ',' << detail::g17(s.pkts_sent_per_sec) << ',' << detail::g17(s.tcp_pkts_per_sec) << ','
            << detail::g17(s.all_pkts_per_sec) << ',' << detail::g17(s.pkt_rate_of_change) << ','
            << detail::g17(s.avg_pkt_size_bytes) << ',' << (s.root_login_active ? 1 : 0) << '\n';
    }
}

inline std::vector<RawSample> read_raw(std::istream& in, const std::string& source = "raw") {
    detail::LineReader r(in, source);
    r.expect_header(kRawHeader);
    std::vector<RawSample> out;
    std::string line;
    while (r.next(line)) {
        const auto f = r.fields(line, 9);
        RawSample s;
        s.timestamp = r.number<Timestamp>(f[0], "t");
        s.icmp_du_per_sec = r.number<double>(f[1], "icmp_du");
        s.rst_per_sec = r.number<double>(f[2], "rst");
        s.pkts_sent_per_sec = r.number<double>(f[3], "pkts");
        s.tcp_pkts_per_sec = r.number<double>(f[4], "tcp_pkts");
        s.all_pkts_per_sec = r.number<double>(f[5], "all_pkts");
        s.pkt_rate_of_change = r.number<double>(f[6], "pkt_roc");
        s.avg_pkt_size_bytes = r.number<double>(f[7], "avg_size");
        s.root_login_active = r.flag(f[8], "root");
        try {
            validate(s);
        } catch (const DomainError& e) {
            r.fail(e.what());
        }
        out.push_back(s);
    }
    return out;
}

// ---- normalized frames ----------------------------------------------------

inline void write_frames(std::ostream& out, const std::vector<NormalizedSignalFrame>& frames) {
    out << kFrameHeader << '\n';
    for (const auto& f : frames) {
        out << f.timestamp << ',' << detail::f6(f.pamp1) << ',' << detail::f6(f.pamp2) << ','
            << detail::f6(f.ds1) << ',' << detail::f6(f.ds2) << ',' << detail::f6(f.ss1) << ','
            << detail::f6(f.ss2) << ',' << (f.inflammation ? 1 : 0) << '\n';
    }
}

inline std::vector<NormalizedSignalFrame> read_frames(std::istream& in, const std::string& source = "frames") {
    detail::LineReader r(in, source);
    r.expect_header(kFrameHeader);
    std::vector<NormalizedSignalFrame> out;
    std::string line;
    while (r.next(line)) {
        const auto f = r.fields(line, 8);
        NormalizedSignalFrame fr;
        fr.timestamp = r.number<Timestamp>(f[0], "t");
        fr.pamp1 = r.number<double>(f[1], "pamp1");
        fr.pamp2 = r.number<double>(f[2], "pamp2");
        fr.ds1 = r.number<double>(f[3], "ds1");
        fr.ds2 = r.number<double>(f[4], "ds2");
        fr.ss1 = r.number<double>(f[5], "ss1");
        fr.ss2 = r.number<double>(f[6], "ss2");
        fr.inflammation = r.flag(f[7], "infl");
        for (double v : {fr.pamp1, fr.pamp2, fr.ds1, fr.ds2, fr.ss1, fr.ss2}) {
            if (!(v >= 0.0 && v <= 100.0)) {
                r.fail("signal value outside [0, 100]");
            }
        }
        out.push_back(fr);
    }
    return out;
}

// ---- antigen and labels ---------------------------------------------------

/// Names are looked up from `labels`; unknown PIDs are written as "?".
inline void write_antigen(std::ostream& out, const std::vector<AntigenEvent>& events,
                          const std::vector<ProcessLabel>& labels) {
    std::map<Pid, std::string_view> names;
    for (const auto& l : labels) {
        names[l.pid] = to_string(l.name);
    }
    out << kAntigenHeader << '\n';
    for (const auto& e : events) {
        const auto it = names.find(e.pid);
        out << e.timestamp << ',' << to_int(e.pid) << ',' << (it == names.end() ? "?" : it->second) << '\n';
    }
}

inline std::vector<AntigenEvent> read_antigen(std::istream& in, const std::string& source = "antigen") {
    detail::LineReader r(in, source);
    r.expect_header(kAntigenHeader);
    std::vector<AntigenEvent> out;
    std::string line;
    Timestamp prev = std::numeric_limits<Timestamp>::min();
    while (r.next(line)) {
        const auto f = r.fields(line, 3);
        AntigenEvent e;
        e.timestamp = r.number<Timestamp>(f[0], "t");
        e.pid = Pid{r.number<std::int32_t>(f[1], "pid")};
        if (e.timestamp < prev) {
            r.fail("antigen timestamps must be non-decreasing");
        }
        prev = e.timestamp;
        out.push_back(e);
    }
    return out;
}

inline std::optional<ProcessName> parse_process_name(std::string_view s) {
    for (auto p : {ProcessName::nmap, ProcessName::pts, ProcessName::firefox, ProcessName::sshd}) {
        if (to_string(p) == s) {
            return p;
        }
    }
    return std::nullopt;
}

inline void write_labels(std::ostream& out, const std::vector<ProcessLabel>& labels) {
    out << kLabelHeader << '\n';
    for (const auto& l : labels) {
        out << to_int(l.pid) << ',' << to_string(l.name) << ',' << (l.anomalous ? "anomalous" : "normal")
            << '\n';
    }
}

inline std::vector<ProcessLabel> read_labels(std::istream& in, const std::string& source = "labels") {
    detail::LineReader r(in, source);
    r.expect_header(kLabelHeader);
    std::vector<ProcessLabel> out;
    std::string line;
    while (r.next(line)) {
        const auto f = r.fields(line, 3);
        ProcessLabel l;
        l.pid = Pid{r.number<std::int32_t>(f[0], "pid")};
        const auto name = parse_process_name(f[1]);
        if (!name) {
            r.fail("unknown process name '" + std::string(f[1]) + "'");
        }
        l.name = *name;
        if (f[2] == "anomalous") {
            l.anomalous = true;
        } else if (f[2] != "normal") {
            r.fail("label must be 'anomalous' or 'normal'");
        }
        out.push_back(l);
    }
    return out;
}

// ---- presented-antigen log ------------------------------------------------

inline void write_records(std::ostream& out, const std::vector<PresentedAntigenRecord>& records) {
    out << kRecordHeader << '\n';
    for (const auto& r : records) {
        out << r.cycle << ',' << to_int(r.antigen_type) << ',' << static_cast<int>(r.context) << ','
            << detail::g17(r.o_semi) << ',' << detail::g17(r.o_mature) << ',' << (r.forced ? 1 : 0) << '\n';
    }
}

inline std::vector<PresentedAntigenRecord> read_records(std::istream& in, const std::string& source = "records") {
    detail::LineReader r(in, source);
    r.expect_header(kRecordHeader);
    std::vector<PresentedAntigenRecord> out;
    std::string line;
    while (r.next(line)) {
        const auto f = r.fields(line, 6);
        PresentedAntigenRecord rec;
        rec.cycle = r.number<std::size_t>(f[0], "cycle");
        rec.antigen_type = Pid{r.number<std::int32_t>(f[1], "antigen_type")};
        rec.context = r.flag(f[2], "context") ? Context::mature : Context::semi_mature;
        rec.o_semi = r.number<double>(f[3], "o_semi");
        rec.o_mature = r.number<double>(f[4], "o_mature");
        rec.forced = r.flag(f[5], "forced");
        out.push_back(rec);
    }
    return out;
}

// ---- segment series -------------------------------------------------------

inline void write_segments(std::ostream& out, const SegmentSeries& series) {
    out << kSegmentHeader << '\n';
    for (const auto& s : series.segments) {
        for (const auto& [pid, sc] : s.scores) {
            out << s.index << ',' << to_int(pid) << ',' << detail::g17(sc.score) << ',' << sc.count << ','
                << (s.partial ? 1 : 0) << '\n';
        }
    }
}

/// Segment sizes are not stored in the file and come back as 0.
inline SegmentSeries read_segments(std::istream& in, const std::string& source = "segments") {
    detail::LineReader r(in, source);
    r.expect_header(kSegmentHeader);
    SegmentSeries series;
    std::string line;
    while (r.next(line)) {
        const auto f = r.fields(line, 5);
        const auto index = r.number<std::size_t>(f[0], "segment_index");
        const Pid pid{r.number<std::int32_t>(f[1], "antigen_type")};
        SegmentScore sc;
        sc.score = r.number<double>(f[2], "score");
        sc.count = r.number<std::size_t>(f[3], "count");
        const bool partial = r.flag(f[4], "partial");
        if (!(sc.score >= 0.0 && sc.score <= 1.0)) {
            r.fail("score outside [0, 1]");
        }
        if (!series.segments.empty() && index < series.segments.back().index) {
            r.fail("segment_index must be non-decreasing");
        }
        if (series.segments.empty() || series.segments.back().index != index) {
            series.segments.push_back(Segment{index, 0, partial, {}});
        }
        series.segments.back().scores[pid] = sc;
    }
    return series;
}

// ---- SOM map --------------------------------------------------------------

inline void write_map(std::ostream& out, const SomMap& map) {
    out << "row,col";
    for (std::size_t k = 0; k < map.dim(); ++k) {
        out << ",w" << k;
    }
    out << '\n';
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        const auto [row, col] = map.location(n);
        out << row << ',' << col;
        for (double w : map.weights(n)) {
            out << ',' << detail::g17(w);
        }
        out << '\n';
    }
}

/// Rows must cover a full rows x cols lattice. The result is marked trained.
inline SomMap read_map(std::istream& in, const std::string& source = "map") {
    detail::LineReader r(in, source);
    std::string line;
    if (!r.next(line)) {
        r.fail("empty map file");
    }
    const auto header = detail::split(detail::trim(line));
    if (header.size() < 3 || header[0] != "row" || header[1] != "col") {
        r.fail("expected header 'row,col,w0,...'");
    }
    const std::size_t dim = header.size() - 2;
    for (std::size_t k = 0; k < dim; ++k) {
        if (header[k + 2] != "w" + std::to_string(k)) {
            r.fail("expected column w" + std::to_string(k));
        }
    }
    struct Row {
        std::size_t row, col;
        std::vector<double> w;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::size_t max_row = 0;
    std::size_t max_col = 0;
    while (r.next(line)) {
        const auto f = r.fields(line, dim + 2);
        Row row{r.number<std::size_t>(f[0], "row"), r.number<std::size_t>(f[1], "col"), {}, r.line_no()};
        for (std::size_t k = 0; k < dim; ++k) {
            row.w.push_back(r.number<double>(f[k + 2], "weight"));
        }
        max_row = std::max(max_row, row.row);
        max_col = std::max(max_col, row.col);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        r.fail("map has no nodes");
    }
    SomMap map(max_row + 1, max_col + 1, dim);
    if (rows.size() != map.node_count()) {
        r.fail("map has " + std::to_string(rows.size()) + " nodes, lattice needs " +
               std::to_string(map.node_count()));
    }
    std::vector<bool> seen(map.node_count(), false);
    for (const auto& row : rows) {
        const std::size_t n = map.index({row.row, row.col});
        if (seen[n]) {
            throw ParseError(source, row.line, "duplicate node " + std::to_string(row.row) + "," +
                                                   std::to_string(row.col));
        }
        seen[n] = true;
        std::copy(row.w.begin(), row.w.end(), map.weights(n).begin());
    }
    map.mark_trained();
    return map;
}

inline void write_u_matrix(std::ostream& out, const SomMap& map) {
    const auto u = u_matrix(map);
    out << kUMatrixHeader << '\n';
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        const auto [row, col] = map.location(n);
        out << row << ',' << col << ',' << detail::g17(u[n]) << '\n';
    }
}

// ---- params file ----------------------------------------------------------

/// Everything a params file can set. Keys are the DcaParams / SomParams field
/// names plus weight_w1 and weight_w2; `rng_seed` sets both seeds.
struct ParamsFile {
    DcaParams dca = DcaParams::seven_signal();
    SomParams som;
    double weight_w1 = 4.0;
    double weight_w2 = 8.0;

    WeightMatrix weights() const { return WeightMatrix::from_pamp_weights(weight_w1, weight_w2); }
};

inline ParamsFile read_params(std::istream& in, const std::string& source = "params") {
    ParamsFile p;
    detail::LineReader r(in, source);
    std::string line;
    while (r.next(line)) {
        auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            r.fail("expected key=value");
        }
        const auto key = detail::trim(body.substr(0, eq));
        const auto value = detail::trim(body.substr(eq + 1));
        auto sz = [&](std::size_t& dst) { dst = r.number<std::size_t>(value, std::string(key).c_str()); };
        auto dbl = [&](double& dst) { dst = r.number<double>(value, std::string(key).c_str()); };
        if (key == "signals_per_category") sz(p.dca.signals_per_category);
        else if (key == "categories") sz(p.dca.categories);
        else if (key == "tissue_antigen_capacity") sz(p.dca.tissue_antigen_capacity);
        else if (key == "max_cycles") sz(p.dca.max_cycles);
        else if (key == "population_size") sz(p.dca.population_size);
        else if (key == "dc_antigen_capacity") sz(p.dca.dc_antigen_capacity);
        else if (key == "outputs_per_dc") sz(p.dca.outputs_per_dc);
        else if (key == "antigens_sampled_per_cycle") sz(p.dca.antigens_sampled_per_cycle);
        else if (key == "migration_threshold_center") dbl(p.dca.migration_threshold_center);
        else if (key == "migration_threshold_halfwidth") dbl(p.dca.migration_threshold_halfwidth);
        else if (key == "weight_w1") dbl(p.weight_w1);
        else if (key == "weight_w2") dbl(p.weight_w2);
        else if (key == "grid_rows") sz(p.som.grid_rows);
        else if (key == "grid_cols") sz(p.som.grid_cols);
        else if (key == "epoch_limit") sz(p.som.epoch_limit);
        else if (key == "alpha_initial_global") dbl(p.som.alpha_initial_global);
        else if (key == "alpha_fine") dbl(p.som.alpha_fine);
        else if (key == "global_ordering_steps") sz(p.som.global_ordering_steps);
        else if (key == "neighborhood_initial") dbl(p.som.neighborhood_initial);
        else if (key == "neighborhood_fine") dbl(p.som.neighborhood_fine);
        else if (key == "anomaly_threshold") dbl(p.som.anomaly_threshold);
        else if (key == "rng_seed") {
            p.dca.rng_seed = r.number<std::uint64_t>(value, "rng_seed");
            p.som.rng_seed = p.dca.rng_seed;
        } else {
            r.fail("unknown key '" + std::string(key) + "'");
        }
    }
    try {
        p.dca.validate();
        p.som.validate();
    } catch (const DomainError& e) {
        throw ParseError(source, r.line_no(), e.what());
    }
    return p;
}

inline void write_params(std::ostream& out, const ParamsFile& p) {
    out << "signals_per_category=" << p.dca.signals_per_category << '\n'
        << "tissue_antigen_capacity=" << p.dca.tissue_antigen_capacity << '\n'
        << "max_cycles=" << p.dca.max_cycles << '\n'
        << "population_size=" << p.dca.population_size << '\n'
        << "dc_antigen_capacity=" << p.dca.dc_antigen_capacity << '\n'
        << "antigens_sampled_per_cycle=" << p.dca.antigens_sampled_per_cycle << '\n'
        << "migration_threshold_center=" << detail::g17(p.dca.migration_threshold_center) << '\n'
        << "migration_threshold_halfwidth=" << detail::g17(p.dca.migration_threshold_halfwidth) << '\n'
        << "weight_w1=" << detail::g17(p.weight_w1) << '\n'
        << "weight_w2=" << detail::g17(p.weight_w2) << '\n'
        << "grid_rows=" << p.som.grid_rows << '\n'
        << "grid_cols=" << p.som.grid_cols << '\n'
        << "epoch_limit=" << p.som.epoch_limit << '\n'
        << "alpha_initial_global=" << detail::g17(p.som.alpha_initial_global) << '\n'
        << "alpha_fine=" << detail::g17(p.som.alpha_fine) << '\n'
        << "global_ordering_steps=" << p.som.global_ordering_steps << '\n'
        << "neighborhood_initial=" << detail::g17(p.som.neighborhood_initial) << '\n'
        << "neighborhood_fine=" << detail::g17(p.som.neighborhood_fine) << '\n'
        << "anomaly_threshold=" << detail::g17(p.som.anomaly_threshold) << '\n';
}

// ---- test report ----------------------------------------------------------

inline std::string format_report(std::string_view title, const RankTestResult& r, double confidence) {
    const double alpha = 1.0 - confidence;
    std::string s;
    s += std::string(title) + '\n';
    s += "  U = " + detail::fmt("%.1f", r.u_statistic) + '\n';
    s += "  p = " + detail::fmt("%.6g", r.p_value) + (r.exact ? " (exact)" : " (normal approx.)") + '\n';
    s += "  n1 = " + std::to_string(r.n1) + ", n2 = " + std::to_string(r.n2) + '\n';
    s += "  sidedness = " + std::string(r.sidedness == Sidedness::one ? "one" : "two") + " (" +
         to_string(r.alternative) + ")\n";
    s += "  verdict at " + detail::fmt("%g", confidence * 100.0) + "% confidence: " +
         (r.p_value < alpha ? "significant" : "not significant") + '\n';
    return s;
}

} // namespace immunesom::io
