// Acceptance run: one PASS/FAIL line per criterion, each held to its runtime
// limit. Exits non-zero if any criterion fails. Argument: scratch directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "commands.hpp"
#include "immunesom/immunesom.hpp"
#include "rank_oracle.hpp"

using namespace immunesom;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string printf_str(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1: weight table -------------------------------------------------------

Outcome weights() {
    const WeightMatrix::Table want = {{{4.0, 0.0, 8.0}, {2.0, 0.0, 4.0}, {6.0, 1.0, -12.0}}};
    const bool ok = WeightMatrix::from_pamp_weights(4.0, 8.0).table() == want && WeightMatrix{}.table() == want;
    return {ok, "csm/semi/mature rows for pamp, danger, safe"};
}

// ---- 2: normalizers --------------------------------------------------------

Outcome normalizers() {
    struct Case {
        const char* name;
        double got;
        double want;
    };
    Ss2State ss2;
    double ss2_got = 0.0;
    for (double s : {40.0, 50.0, 60.0}) {
        ss2_got = normalize_ss2(ss2, s);  // window mean 50 -> band 10
    }
    const std::vector<Case> cases = {
        {"pamp1(10)", normalize_pamp1(10), 50.0},
        {"pamp1(25)", normalize_pamp1(25), 100.0},
        {"pamp2(42)", normalize_pamp2(42), 42.0},
        {"pamp2(250)", normalize_pamp2(250), 100.0},
        {"ds1(0)", normalize_ds1(0), 0.5493921811082984900864166896537411238652},
        {"ds1(750)", normalize_ds1(750), 50.0},
        {"ds1(1500)", normalize_ds1(1500), 99.45060781889170150991358331034625887614},
        {"ds2(30,40)", normalize_ds2(30, 40), 75.0},
        {"ds2(0,0)", normalize_ds2(0, 0), 0.0},
        {"ss1(10)", normalize_ss1(10), 100.0},
        {"ss1(55)", normalize_ss1(55), 50.0},
        {"ss1(120)", normalize_ss1(120), 0.0},
        {"ss2(mean 50)", ss2_got, 10.0},
        {"ss2 band 45", ss2_band(45), 0.0},
        {"ss2 band 60", ss2_band(60), 50.0},
        {"ss2 band 60.5", ss2_band(60.5), 100.0},
    };
    double worst = 0.0;
    std::string where = "-";
    for (const auto& c : cases) {
        const double err = std::abs(c.got - c.want);
        if (!(err <= worst)) {
            worst = err;
            where = c.name;
        }
    }
    return {worst <= 1e-9, printf_str("%zu cases, max error %.3g (%s)", cases.size(), worst, where.c_str())};
}

// ---- 3: BMU vs brute force -------------------------------------------------

Outcome bmu() {
    Rng rng(3);
    std::size_t mismatches = 0;
    std::size_t ties = 0;
    constexpr int kTrials = 10'000;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t rows = 1 + rng.below(10);
        const std::size_t cols = 1 + rng.below(10);
        const std::size_t dim = 1 + rng.below(7);
        SomMap m(rows, cols, dim);
        // coarse integer weights make equal distances common
        for (std::size_t n = 0; n < m.node_count(); ++n) {
            for (double& w : m.weights(n)) {
                w = static_cast<double>(rng.below(4));
            }
        }
        std::vector<double> x(dim);
        for (double& v : x) {
            v = static_cast<double>(rng.below(4));
        }
        std::size_t best = 0;
        double best_sq = -1.0;
        std::size_t at_best = 0;
        for (std::size_t n = 0; n < m.node_count(); ++n) {
            double sq = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                sq += (x[k] - m.weights(n)[k]) * (x[k] - m.weights(n)[k]);
            }
            if (best_sq < 0.0 || sq < best_sq) {
                best_sq = sq;
                best = n;
                at_best = 1;
            } else if (sq == best_sq) {
                ++at_best;
            }
        }
        ties += at_best > 1;
        const auto got = find_bmu(m, x);
        if (got.node != best || got.distance != std::sqrt(best_sq)) {
            ++mismatches;
        }
    }
    return {mismatches == 0, printf_str("%d queries, %zu with tied nearest nodes, %zu mismatches", kTrials, ties,
                                        mismatches)};
}

// ---- 4: Mann-Whitney vs references -----------------------------------------

Outcome rank_test() {
    Rng rng(4);
    auto sample = [&rng](std::size_t n, std::uint64_t range) {
        std::vector<double> v(n);
        for (double& x : v) {
            x = static_cast<double>(rng.below(range));
        }
        return v;
    };
    double worst_exact = 0.0;
    std::size_t u_bad = 0;
    constexpr int kSmall = 1'000;
    for (int trial = 0; trial < kSmall; ++trial) {
        // cycle through every (n1, n2) pair with n1, n2 <= 7
        const std::size_t n1 = 1 + static_cast<std::size_t>(trial % 49) / 7;
        const std::size_t n2 = 1 + static_cast<std::size_t>(trial % 7);
        const auto a = sample(n1, 5);
        const auto b = sample(n2, 5);
        const auto want = oracle::enumerate_p(a, b);
        const auto two = mann_whitney_u(a, b);
        u_bad += two.u_statistic != oracle::pairwise_u(a, b) || !two.exact;
        worst_exact = std::max({worst_exact, std::abs(two.p_value - want.two_sided),
                                std::abs(mann_whitney_u(a, b, Alternative::less).p_value - want.less),
                                std::abs(mann_whitney_u(a, b, Alternative::greater).p_value - want.greater)});
    }
    double worst_normal = 0.0;
    constexpr int kLarge = 1'000;
    for (int trial = 0; trial < kLarge; ++trial) {
        const auto a = sample(8 + rng.below(200), 1 + rng.below(50));
        const auto b = sample(8 + rng.below(200), 1 + rng.below(50));
        const auto r = mann_whitney_u(a, b);
        u_bad += r.u_statistic != oracle::pairwise_u(a, b) || r.exact;
        worst_normal = std::max(worst_normal, std::abs(r.p_value - oracle::normal_p(a, b).two_sided));
    }
    const bool ok = u_bad == 0 && worst_exact <= 1e-3 && worst_normal <= 1e-3;
    return {ok, printf_str("%d exact cases max |dp| %.2g; %d large cases max |dp| %.2g; %zu U/method mismatches",
                           kSmall, worst_exact, kLarge, worst_normal, u_bad)};
}

// ---- 5: antigen conservation -----------------------------------------------

Outcome conservation() {
    constexpr int kReplays = 100;
    std::size_t violations = 0;
    std::uint64_t total = 0;
    for (int i = 0; i < kReplays; ++i) {
        const auto seed = static_cast<std::uint64_t>(i);
        const auto cfg = i % 2 == 0 ? ScenarioConfig::active_normal(500, seed) : ScenarioConfig::passive_normal(500, seed);
        const auto s = generate_session(cfg);
        const auto frames = normalize_session(s.samples);
        auto p = DcaParams::seven_signal();
        p.rng_seed = seed;
        const auto r = run_session(frames, s.antigen, p, WeightMatrix{});
        std::map<Pid, std::uint64_t> presented;
        for (const auto& rec : r.records) {
            ++presented[rec.antigen_type];
        }
        std::map<Pid, std::uint64_t> streamed;
        for (const auto& e : s.antigen) {
            ++streamed[e.pid];
        }
        for (const auto& [pid, n] : streamed) {
            const auto in = r.ingested.count(pid) ? r.ingested.at(pid) : 0;
            const auto ev = r.evicted.count(pid) ? r.evicted.at(pid) : 0;
            const auto pr = presented.count(pid) ? presented.at(pid) : 0;
            violations += in != n || in != pr + ev;
            total += n;
        }
        violations += presented.size() > streamed.size();
    }
    return {violations == 0,
            printf_str("%d replays, %llu antigen, %zu type-level violations", kReplays,
                       static_cast<unsigned long long>(total), violations)};
}

// ---- shared: DCA run on a scenario -----------------------------------------

struct ScenarioRun {
    ScenarioConfig cfg;
    GeneratedSession session;
    std::vector<NormalizedSignalFrame> frames;
    DcaSessionResult dca;
};

ScenarioRun run_scenario(const ScenarioConfig& cfg) {
    ScenarioRun r{cfg, generate_session(cfg), {}, {}};
    r.frames = normalize_session(r.session.samples);
    auto p = DcaParams::seven_signal();
    p.rng_seed = cfg.rng_seed;
    r.dca = run_session(r.frames, r.session.antigen, p, WeightMatrix{});
    return r;
}

Pid scan_pid(const ScenarioRun& r) {
    for (const auto& l : r.session.labels) {
        if (l.name == ProcessName::nmap) {
            return l.pid;
        }
    }
    throw std::runtime_error("scenario has no scan process");
}

struct Separation {
    double scan_mean = 0.0;        // scan process, z=100 segments inside the scan window
    std::size_t scan_segments = 0;
    double normal_mean = 0.0;      // normal processes, whole-run MCAV
    double pre_scan_max = 0.0;     // any process, segments ending before the scan
    std::size_t pre_scan_segments = 0;
};

Separation separation(const ScenarioRun& r) {
    Separation s;
    const Pid nmap = scan_pid(r);
    const auto seg = segment_stream(r.dca.records, 100);
    std::size_t offset = 0;
    double sum = 0.0;
    for (const auto& sg : seg.segments) {
        const auto first = static_cast<Timestamp>(r.dca.records[offset].cycle);
        const auto last = static_cast<Timestamp>(r.dca.records[offset + sg.size - 1].cycle);
        offset += sg.size;
        if (r.cfg.in_scan(first) && r.cfg.in_scan(last)) {
            if (const auto it = sg.scores.find(nmap); it != sg.scores.end()) {
                sum += it->second.score;
                ++s.scan_segments;
            }
        }
        if (last < r.cfg.scan_start) {
            ++s.pre_scan_segments;
            for (const auto& [pid, sc] : sg.scores) {
                s.pre_scan_max = std::max(s.pre_scan_max, sc.score);
            }
        }
    }
    s.scan_mean = s.scan_segments ? sum / static_cast<double>(s.scan_segments) : 0.0;
    const auto whole = compute_mcav_all(r.dca.records);
    double normal_sum = 0.0;
    std::size_t normal_n = 0;
    for (const auto& l : r.session.labels) {
        if (!l.anomalous && whole.count(l.pid)) {
            normal_sum += whole.at(l.pid);
            ++normal_n;
        }
    }
    s.normal_mean = normal_n ? normal_sum / static_cast<double>(normal_n) : 0.0;
    return s;
}

bool separates(const Separation& s) { return s.scan_segments > 0 && s.scan_mean >= 2.0 * s.normal_mean; }

// ---- 6: anomaly separation -------------------------------------------------

Outcome separation_both() {
    const auto pn = separation(run_scenario(ScenarioConfig::passive_normal(700, 1)));
    const auto an = separation(run_scenario(ScenarioConfig::active_normal(700, 1)));
    const bool pre_ok = an.pre_scan_segments > 0 && an.pre_scan_max < 0.3;
    const bool ok = separates(pn) && separates(an) && pre_ok;
    return {ok, printf_str("PN scan %.3f vs normal %.3f; AN scan %.3f vs normal %.3f, pre-scan max %.3f over %zu segments",
                           pn.scan_mean, pn.normal_mean, an.scan_mean, an.normal_mean, an.pre_scan_max,
                           an.pre_scan_segments)};
}

// ---- 7: segment size matters -----------------------------------------------

Outcome segment_size() {
    const auto r = run_scenario(ScenarioConfig::active_normal(700, 1));
    const Pid nmap = scan_pid(r);
    const auto base = segment_stream(r.dca.records, 100).scores_for(nmap);
    double best = 1.0;
    std::string line;
    for (std::size_t z : {1'000, 10'000, 100'000}) {
        const auto other = segment_stream(r.dca.records, z).scores_for(nmap);
        const auto t = mann_whitney_u(base, other);
        best = std::min(best, t.p_value);
        line += printf_str("z=%zu p=%.3g; ", z, t.p_value);
    }
    line.resize(line.size() - 2);
    return {best < 0.05, "z=100 vs " + line};
}

// ---- 8: SOM training reduces quantization error ----------------------------

Outcome som_training() {
    std::size_t good = 0;
    std::string ratios;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::vector<SignalVector> data;
        for (const auto& session : training_corpus(2, seed * 100)) {
            for (const auto& f : session) {
                data.push_back(f.as_vector());
            }
        }
        SomParams p;
        p.epoch_limit = 50'000;
        p.rng_seed = seed;
        auto map = init_map(p, kSignalDim);
        const std::span<const SignalVector> view(data);
        const double before = quantization_error(map, view);
        train(map, view, p);
        const double ratio = quantization_error(map, view) / before;
        good += ratio < 0.25;
        ratios += printf_str("%.3f ", ratio);
    }
    ratios.pop_back();
    return {good >= 9, printf_str("%zu/10 maps below 0.25 of untrained error (%s)", good, ratios.c_str())};
}

// ---- 9: baseline clustering ------------------------------------------------

Outcome baseline() {
    const auto r = run_scenario(ScenarioConfig::active_normal(700, 1));
    std::vector<SignalVector> vecs;
    for (const auto& f : r.frames) {
        vecs.push_back(f.as_vector());
    }
    const auto km = kmeans<SignalVector>(vecs, 2, 1);
    const double small = std::min(km.fractions[0], km.fractions[1]);
    const auto sep = separation(r);
    const bool ok = small >= 0.40 && small <= 0.60 && separates(sep) && sep.pre_scan_max < 0.3;
    return {ok, printf_str("k-means split %.3f/%.3f; DCA scan %.3f vs normal %.3f, pre-scan max %.3f", km.fractions[0],
                           km.fractions[1], sep.scan_mean, sep.normal_mean, sep.pre_scan_max)};
}

// ---- 10: reproducible CLI outputs ------------------------------------------

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) {
            continue;
        }
        const auto rel = fs::relative(e.path(), root).string();
        if (e.path().filename() == "manifest.json") {
            std::ifstream in(e.path());
            auto m = nlohmann::json::parse(in);
            m.erase("created_utc");
            out[rel] = m.dump();
        } else {
            out[rel] = cli::file_hash(e.path());
        }
    }
    return out;
}

void run_all_commands(const fs::path& root) {
    fs::remove_all(root);
    fs::create_directories(root);
    const auto session = root / "session";
    cli::cmd_generate({"an", 11, 400, session.string()});

    cli::RunDcaOptions dca;
    dca.session = session.string();
    dca.runs = 2;
    dca.seed = 11;
    dca.z = {100, 1'000};
    dca.out = (root / "dca").string();
    cli::cmd_run_dca(dca);

    cli::TrainSomOptions train;
    train.sessions = 2;
    train.duration = 600;
    train.maps = 2;
    train.seed = 11;
    train.out = (root / "maps").string();
    cli::cmd_train_som(train);

    cli::RunSomOptions som;
    som.session = session.string();
    som.maps = {train.out};
    som.match_dca = dca.out;
    som.dca_z = dca.z;
    som.seed = 11;
    som.out = (root / "som").string();
    cli::cmd_run_som(som);

    const auto a = (root / "dca" / "mcav_z100.csv").string();
    const auto b = (root / "dca" / "mcav_z1000.csv").string();
    cli::cmd_compare({a, b, {}, 0.99, (root / "compare").string()});
    cli::cmd_baseline({session.string(), 2, 11, (root / "baseline").string()});
}

Outcome reproducible(const fs::path& work) {
    const auto root = work / "cli";
    run_all_commands(root);
    const auto first = tree_hashes(root);
    run_all_commands(root);
    const auto second = tree_hashes(root);
    std::size_t differ = 0;
    for (const auto& [name, h] : first) {
        differ += !second.count(name) || second.at(name) != h;
    }
    differ += second.size() != first.size();
    return {differ == 0 && !first.empty(), printf_str("%zu files compared, %zu differ", first.size(), differ)};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "immunesom_acceptance";
    fs::create_directories(work);

    struct Criterion {
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"weight table", 1, weights},
        {"signal normalizers", 1, normalizers},
        {"BMU search", 10, bmu},
        {"rank test", 30, rank_test},
        {"antigen conservation", 60, conservation},
        {"anomaly separation", 120, separation_both},
        {"segment size effect", 120, segment_size},
        {"SOM training", 120, som_training},
        {"k-means baseline", 60, baseline},
        {"CLI reproducibility", 60, [&work] { return reproducible(work); }},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, limit, fn] : criteria) {
        ++n;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= limit) {
            o.pass = false;
            o.detail += printf_str(" (over the %.0fs limit)", limit);
        }
        std::printf("%s %2d %-22s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", n, name, secs, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
