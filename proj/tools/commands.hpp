#pragma once

// Subcommand implementations behind tools/immunesom.cpp. Each command reads
// its inputs, writes its outputs into one directory and finishes by writing
// manifest.json describing what produced that directory.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "immunesom/immunesom.hpp"

namespace immunesom::cli {

namespace fs = std::filesystem;

/// Bad flag values that CLI11 cannot check on its own; mapped to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::size_t> kDcaZ = {100, 1'000, 10'000, 100'000, 1'000'000};
inline const std::vector<std::size_t> kSomZ = {1'800, 18'000, 180'000, 1'800'000};

/// 64-bit FNV-1a over a file's bytes, as 16 hex digits.
inline std::string file_hash(const fs::path& p) {
    auto in = io::open_in(p.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct Manifest {
    std::string subcommand;
    std::map<std::string, std::string> inputs;
    std::string params_file;
    std::uint64_t seed = 0;
    std::vector<std::size_t> z;
    std::size_t runs = 0;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

/// Writes manifest.json listing every other file in `dir` with its hash.
/// `created_utc` is the only field that differs between identical reruns.
inline void write_manifest(const fs::path& dir, const Manifest& m) {
    nlohmann::ordered_json j;
    j["subcommand"] = m.subcommand;
    j["inputs"] = m.inputs;
    j["params_file"] = m.params_file;
    j["seed"] = m.seed;
    j["z"] = m.z;
    j["runs"] = m.runs;
    if (!m.extra.empty()) {
        j["details"] = m.extra;
    }
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name != "manifest.json") {
            names.push_back(name);
        }
    }
    std::sort(names.begin(), names.end());
    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
    for (const auto& n : names) {
        outputs[n] = file_hash(dir / n);
    }
    j["outputs"] = outputs;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["created_utc"] = stamp;
    auto out = io::open_out((dir / "manifest.json").string());
    out << j.dump(2) << '\n';
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    }
}

inline io::ParamsFile load_params(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    auto in = io::open_in(path);
    return io::read_params(in, path);
}

template <typename Fn>
void write_file(const fs::path& p, Fn&& fn) {
    auto out = io::open_out(p.string());
    fn(out);
    if (!out) {
        throw std::runtime_error("write failed: " + p.string());
    }
}

template <typename T, typename Reader>
T read_file(const fs::path& p, Reader&& reader) {
    auto in = io::open_in(p.string());
    return reader(in, p.string());
}

struct Session {
    std::vector<RawSample> raw;
    std::vector<NormalizedSignalFrame> frames;
    std::vector<AntigenEvent> antigen;
    std::vector<ProcessLabel> labels;
};

inline Session load_session(const fs::path& dir, bool need_antigen = true) {
    Session s;
    s.raw = read_file<std::vector<RawSample>>(dir / "raw.csv",
                                              [](auto& in, const auto& src) { return io::read_raw(in, src); });
    s.frames = normalize_session(s.raw);
    if (need_antigen) {
        s.antigen = read_file<std::vector<AntigenEvent>>(
            dir / "antigen.csv", [](auto& in, const auto& src) { return io::read_antigen(in, src); });
    }
    if (fs::exists(dir / "labels.csv")) {
        s.labels = read_file<std::vector<ProcessLabel>>(
            dir / "labels.csv", [](auto& in, const auto& src) { return io::read_labels(in, src); });
    }
    return s;
}

// ---- generate -------------------------------------------------------------

struct GenerateOptions {
    std::string scenario = "an";  // pn | an | normal
    std::uint64_t seed = 0;
    Timestamp duration = 7000;
    std::string out;
};

inline ScenarioConfig scenario_config(const std::string& name, Timestamp duration, std::uint64_t seed) {
    if (name == "pn") {
        return ScenarioConfig::passive_normal(duration, seed);
    }
    if (name == "an") {
        return ScenarioConfig::active_normal(duration, seed);
    }
    if (name == "normal") {
        return ScenarioConfig::normal_only(duration, seed);
    }
    throw UsageError("unknown scenario '" + name + "' (expected pn, an or normal)");
}

inline void cmd_generate(const GenerateOptions& o) {
    const auto config = scenario_config(o.scenario, o.duration, o.seed);
    const auto session = generate_session(config);
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_file(dir / "raw.csv", [&](auto& out) { io::write_raw(out, session.samples); });
    write_file(dir / "antigen.csv",
               [&](auto& out) { io::write_antigen(out, session.antigen, session.labels); });
    write_file(dir / "labels.csv", [&](auto& out) { io::write_labels(out, session.labels); });
    Manifest m{"generate", {}, "", o.seed, {}, 0};
    m.extra["scenario"] = o.scenario;
    m.extra["duration"] = o.duration;
    m.extra["scan_start"] = config.scan_start;
    m.extra["scan_end"] = config.scan_end();
    m.extra["antigen_events"] = session.antigen.size();
    write_manifest(dir, m);
}

// ---- run-dca --------------------------------------------------------------

struct RunDcaOptions {
    std::string session;
    std::string params;
    std::size_t runs = 10;
    std::uint64_t seed = 0;
    std::vector<std::size_t> z = kDcaZ;
    std::string out;
};

inline void cmd_run_dca(const RunDcaOptions& o) {
    if (o.runs == 0) {
        throw UsageError("--runs must be >= 1");
    }
    const auto params = load_params(o.params);
    const auto weights = params.weights();
    const auto session = load_session(o.session);
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_file(dir / "frames.csv", [&](auto& out) { io::write_frames(out, session.frames); });

    std::map<std::size_t, std::vector<SegmentSeries>> per_z;
    std::map<Pid, std::vector<double>> whole;
    std::ostringstream runs_csv;
    runs_csv << "run,seed,records,cycles\n";
    for (std::size_t i = 0; i < o.runs; ++i) {
        DcaParams p = params.dca;
        p.rng_seed = o.seed + i;
        const auto result = run_session(session.frames, session.antigen, p, weights);
        write_file(dir / ("records_run" + std::to_string(i) + ".csv"),
                   [&](auto& out) { io::write_records(out, result.records); });
        for (std::size_t z : o.z) {
            per_z[z].push_back(segment_stream(result.records, z));
        }
        for (const auto& [pid, v] : compute_mcav_all(result.records)) {
            whole[pid].push_back(v);
        }
        runs_csv << i << ',' << p.rng_seed << ',' << result.records.size() << ',' << result.cycles << '\n';
    }
    for (const auto& [z, series] : per_z) {
        const auto mean = average_series(series);
        write_file(dir / ("mcav_z" + std::to_string(z) + ".csv"),
                   [&](auto& out) { io::write_segments(out, mean); });
    }
    write_file(dir / "runs.csv", [&](auto& out) { out << runs_csv.str(); });

    std::map<Pid, const ProcessLabel*> label_of;
    for (const auto& l : session.labels) {
        label_of[l.pid] = &l;
    }
    write_file(dir / "summary.csv", [&](auto& out) {
        out << "antigen_type,name,label,mcav_mean,runs_present\n";
        for (const auto& [pid, values] : whole) {
            double sum = 0.0;
            for (double v : values) {
                sum += v;
            }
            const auto it = label_of.find(pid);
            out << to_int(pid) << ',' << (it == label_of.end() ? "?" : to_string(it->second->name)) << ','
                << (it == label_of.end() ? "?" : (it->second->anomalous ? "anomalous" : "normal")) << ','
                << io::detail::g17(sum / static_cast<double>(values.size())) << ',' << values.size() << '\n';
        }
    });
    Manifest m{"run-dca", {{"session", o.session}}, o.params, o.seed, o.z, o.runs};
    write_manifest(dir, m);
}

// ---- train-som ------------------------------------------------------------

struct TrainSomOptions {
    std::vector<std::string> inputs;  // session dirs with raw.csv; empty -> generated corpus
    std::size_t sessions = 10;
    Timestamp duration = 3600;
    std::size_t maps = 10;
    std::string params;
    std::uint64_t seed = 0;
    std::string out;
};

inline void cmd_train_som(const TrainSomOptions& o) {
    if (o.maps == 0) {
        throw UsageError("--maps must be >= 1");
    }
    const auto params = load_params(o.params);
    std::vector<SignalVector> data;
    if (o.inputs.empty()) {
        if (o.sessions == 0) {
            throw UsageError("--sessions must be >= 1");
        }
        for (const auto& frames : training_corpus(o.sessions, o.seed, o.duration)) {
            for (const auto& f : frames) {
                data.push_back(f.as_vector());
            }
        }
    } else {
        for (const auto& d : o.inputs) {
            for (const auto& f : load_session(d, false).frames) {
                data.push_back(f.as_vector());
            }
        }
    }
    if (auto warn = params.som.epoch_warning()) {
        std::cerr << "warning: " << *warn << '\n';
    }
    const fs::path dir(o.out);
    ensure_dir(dir);
    std::ostringstream qe;
    qe << "map,seed,qe_untrained,qe_trained\n";
    const std::span<const SignalVector> view(data);
    for (std::size_t i = 0; i < o.maps; ++i) {
        SomParams p = params.som;
        p.rng_seed = o.seed + i;
        auto map = init_map(p, kSignalDim);
        const double before = quantization_error(map, view);
        train(map, view, p);
        const double after = quantization_error(map, view);
        write_file(dir / ("map_" + std::to_string(i) + ".csv"), [&](auto& out) { io::write_map(out, map); });
        write_file(dir / ("umatrix_" + std::to_string(i) + ".csv"),
                   [&](auto& out) { io::write_u_matrix(out, map); });
        qe << i << ',' << p.rng_seed << ',' << io::detail::g17(before) << ',' << io::detail::g17(after) << '\n';
    }
    write_file(dir / "quantization.csv", [&](auto& out) { out << qe.str(); });
    Manifest m{"train-som", {}, o.params, o.seed, {}, o.maps};
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
        m.inputs["session" + std::to_string(k)] = o.inputs[k];
    }
    m.extra["training_vectors"] = data.size();
    m.extra["epochs"] = params.som.epoch_limit;
    write_manifest(dir, m);
}

// ---- run-som --------------------------------------------------------------

struct RunSomOptions {
    std::string session;
    std::vector<std::string> maps;  // map files, or directories holding map_*.csv
    std::string params;
    std::vector<std::size_t> z = kSomZ;
    std::string match_dca;  // run-dca output directory
    std::vector<std::size_t> dca_z = kDcaZ;
    std::uint64_t seed = 0;
    std::string out;
};

inline std::vector<fs::path> expand_maps(const std::vector<std::string>& given) {
    std::vector<fs::path> out;
    for (const auto& g : given) {
        const fs::path p(g);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto name = e.path().filename().string();
                if (name.rfind("map_", 0) == 0 && e.path().extension() == ".csv") {
                    found.push_back(e.path());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw std::runtime_error("missing map: " + g);
        }
    }
    if (out.empty()) {
        throw std::runtime_error("no map files given");
    }
    return out;
}

/// Record count of the first DCA run in a run-dca output directory.
inline std::size_t dca_record_count(const fs::path& dir) {
    auto in = io::open_in((dir / "runs.csv").string());
    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line)) {
        throw ParseError((dir / "runs.csv").string(), 2, "no runs listed");
    }
    const auto f = io::detail::split(line);
    if (f.size() != 4) {
        throw ParseError((dir / "runs.csv").string(), 2, "expected 4 fields");
    }
    return std::stoull(std::string(f[2]));
}

inline void cmd_run_som(const RunSomOptions& o) {
    const auto params = load_params(o.params);
    const auto session = load_session(o.session);
    const auto paths = expand_maps(o.maps);
    std::vector<SomMap> maps;
    for (const auto& p : paths) {
        maps.push_back(read_file<SomMap>(p, [](auto& in, const auto& src) { return io::read_map(in, src); }));
        if (maps.back().dim() != kSignalDim) {
            throw DomainError(p.string() + ": map dimension " + std::to_string(maps.back().dim()) +
                              " does not match the " + std::to_string(kSignalDim) + "-signal input");
        }
    }
    const auto coupled = couple_antigen_signals(session.antigen, session.frames);
    if (coupled.dropped > 0) {
        std::cerr << "warning: " << coupled.dropped << " antigen events had no signal frame\n";
    }
    std::vector<std::size_t> zs = o.z;
    nlohmann::ordered_json matched = nlohmann::ordered_json::object();
    if (!o.match_dca.empty()) {
        const std::size_t n_records = dca_record_count(o.match_dca);
        zs.clear();
        for (std::size_t dz : o.dca_z) {
            const std::size_t sz = matched_segment_size(dz, n_records, coupled.couplings.size());
            zs.push_back(sz);
            matched[std::to_string(dz)] = sz;
        }
    }
    const fs::path dir(o.out);
    ensure_dir(dir);
    for (std::size_t z : zs) {
        std::vector<SegmentSeries> runs;
        for (const auto& map : maps) {
            runs.push_back(compute_mbmu(coupled.couplings, session.frames, map, params.som.anomaly_threshold, z));
        }
        const auto mean = average_series(runs);
        write_file(dir / ("mbmu_z" + std::to_string(z) + ".csv"),
                   [&](auto& out) { io::write_segments(out, mean); });
    }
    Manifest m{"run-som", {{"session", o.session}}, o.params, o.seed, zs, maps.size()};
    for (std::size_t k = 0; k < paths.size(); ++k) {
        m.inputs["map" + std::to_string(k)] = paths[k].string();
    }
    m.extra["couplings"] = coupled.couplings.size();
    m.extra["dropped"] = coupled.dropped;
    if (!matched.empty()) {
        m.inputs["match_dca"] = o.match_dca;
        m.extra["dca_z_to_som_z"] = matched;
    }
    write_manifest(dir, m);
}

// ---- compare --------------------------------------------------------------

struct CompareOptions {
    std::string a;
    std::string b;
    std::vector<std::int32_t> pids;  // empty -> every type present in both
    double confidence = 0.99;
    std::string out;  // optional directory for report.txt
};

inline std::string cmd_compare(const CompareOptions& o) {
    if (!(o.confidence > 0.0 && o.confidence < 1.0)) {
        throw UsageError("--confidence must lie in (0, 1)");
    }
    const auto a = read_file<SegmentSeries>(o.a, [](auto& in, const auto& s) { return io::read_segments(in, s); });
    const auto b = read_file<SegmentSeries>(o.b, [](auto& in, const auto& s) { return io::read_segments(in, s); });
    auto types_of = [](const SegmentSeries& s) {
        std::set<std::int32_t> t;
        for (const auto& seg : s.segments) {
            for (const auto& [pid, sc] : seg.scores) {
                t.insert(to_int(pid));
            }
        }
        return t;
    };
    const auto ta = types_of(a);
    const auto tb = types_of(b);
    std::vector<std::int32_t> pids = o.pids;
    if (pids.empty()) {
        std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(pids));
        if (pids.empty()) {
            throw std::runtime_error("the two series share no antigen type");
        }
    }
    std::string report;
    for (std::int32_t pid : pids) {
        if (!ta.count(pid) || !tb.count(pid)) {
            throw std::runtime_error("antigen type " + std::to_string(pid) + " missing from " +
                                     (ta.count(pid) ? o.b : o.a));
        }
        const auto xa = a.scores_for(Pid{pid});
        const auto xb = b.scores_for(Pid{pid});
        const std::string head = "antigen_type " + std::to_string(pid) + ": " + o.a + " vs " + o.b;
        report += io::format_report(head + " [one-sided, first > second]",
                                    mann_whitney_u(xa, xb, Alternative::greater), o.confidence);
        report += io::format_report(head + " [two-sided]", mann_whitney_u(xa, xb, Alternative::two_sided),
                                    o.confidence);
    }
    if (!o.out.empty()) {
        const fs::path dir(o.out);
        ensure_dir(dir);
        write_file(dir / "report.txt", [&](auto& out) { out << report; });
        Manifest m{"compare", {{"a", o.a}, {"b", o.b}}, "", 0, {}, 0};
        m.extra["confidence"] = o.confidence;
        m.extra["antigen_types"] = pids;
        write_manifest(dir, m);
    }
    return report;
}

// ---- baseline -------------------------------------------------------------

struct BaselineOptions {
    std::string session;
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::string out;
};

/// Seconds during which any anomalous process issued a system call.
inline std::vector<bool> anomalous_seconds(const Session& s) {
    std::set<Pid> bad;
    for (const auto& l : s.labels) {
        if (l.anomalous) {
            bad.insert(l.pid);
        }
    }
    std::set<Timestamp> hit;
    for (const auto& e : s.antigen) {
        if (bad.count(e.pid)) {
            hit.insert(e.timestamp);
        }
    }
    std::vector<bool> out;
    out.reserve(s.frames.size());
    for (const auto& f : s.frames) {
        out.push_back(hit.count(f.timestamp) > 0);
    }
    return out;
}

inline KMeansResult cmd_baseline(const BaselineOptions& o) {
    const auto session = load_session(o.session);
    std::vector<SignalVector> data;
    data.reserve(session.frames.size());
    for (const auto& f : session.frames) {
        data.push_back(f.as_vector());
    }
    const auto result = kmeans(std::span<const SignalVector>(data), o.k, o.seed);
    const auto truth = anomalous_seconds(session);
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_file(dir / "assignments.csv", [&](auto& out) {
        out << "t,cluster,anomalous\n";
        for (std::size_t i = 0; i < data.size(); ++i) {
            out << session.frames[i].timestamp << ',' << result.assignment[i] << ',' << (truth[i] ? 1 : 0)
                << '\n';
        }
    });
    write_file(dir / "clusters.csv", [&](auto& out) {
        out << "cluster,size,fraction,anomalous_share";
        for (std::size_t d = 0; d < kSignalDim; ++d) {
            out << ",c" << d;
        }
        out << '\n';
        for (std::size_t c = 0; c < result.centroids.size(); ++c) {
            std::size_t size = 0;
            std::size_t bad = 0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (result.assignment[i] == c) {
                    ++size;
                    bad += truth[i] ? 1 : 0;
                }
            }
            out << c << ',' << size << ',' << io::detail::g17(result.fractions[c]) << ','
                << io::detail::g17(size ? static_cast<double>(bad) / static_cast<double>(size) : 0.0);
            for (double v : result.centroids[c]) {
                out << ',' << io::detail::g17(v);
            }
            out << '\n';
        }
    });
    Manifest m{"baseline", {{"session", o.session}}, "", o.seed, {}, 0};
    m.extra["k"] = o.k;
    m.extra["iterations"] = result.iterations;
    m.extra["converged"] = result.converged;
    write_manifest(dir, m);
    return result;
}

} // namespace immunesom::cli
