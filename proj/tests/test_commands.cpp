#include <gtest/gtest.h>

#include <fstream>

#include "commands.hpp"

using namespace immunesom;
using namespace immunesom::cli;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("immunesom_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path make_session(const std::string& name, const std::string& scenario = "an", Timestamp duration = 200) {
    const auto dir = scratch(name);
    cmd_generate({scenario, 3, duration, dir.string()});
    return dir;
}

} // namespace

TEST(Commands, GenerateWritesThreeCsvsAndManifest) {
    const auto dir = make_session("gen");
    for (const char* f : {"raw.csv", "antigen.csv", "labels.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto again = scratch("gen2");
    cmd_generate({"an", 3, 200, again.string()});
    for (const char* f : {"raw.csv", "antigen.csv", "labels.csv"}) {
        EXPECT_EQ(file_hash(dir / f), file_hash(again / f)) << f;
    }
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["subcommand"], "generate");
    EXPECT_EQ(m["outputs"]["raw.csv"], file_hash(dir / "raw.csv"));
    EXPECT_TRUE(m.contains("created_utc"));
}

TEST(Commands, UnknownScenarioIsUsageError) {
    EXPECT_THROW(cmd_generate({"xyz", 1, 100, scratch("bad").string()}), UsageError);
}

TEST(Commands, RunDcaSingleRunMeanEqualsRun) {
    const auto session = make_session("dca_in");
    const auto out = scratch("dca_out");
    cmd_run_dca({session.string(), "", 1, 5, {100, 1000}, out.string()});
    auto records_in = io::open_in((out / "records_run0.csv").string());
    const auto records = io::read_records(records_in);
    auto seg_in = io::open_in((out / "mcav_z100.csv").string());
    const auto mean = io::read_segments(seg_in);
    const auto direct = segment_stream(records, 100);
    ASSERT_EQ(mean.segments.size(), direct.segments.size());
    for (std::size_t i = 0; i < direct.segments.size(); ++i) {
        for (const auto& [pid, sc] : direct.segments[i].scores) {
            ASSERT_EQ(mean.segments[i].scores.at(pid).score, sc.score);
        }
    }
    EXPECT_TRUE(fs::exists(out / "frames.csv"));
    EXPECT_TRUE(fs::exists(out / "summary.csv"));
}

TEST(Commands, RunDcaDefaultZListAndRunCount) {
    const auto session = make_session("dca_default", "an", 150);
    const auto out = scratch("dca_default_out");
    RunDcaOptions o;
    o.session = session.string();
    o.out = out.string();
    o.runs = 3;
    cmd_run_dca(o);
    std::size_t logs = 0;
    std::size_t segs = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        const auto n = e.path().filename().string();
        logs += n.rfind("records_run", 0) == 0;
        segs += n.rfind("mcav_z", 0) == 0;
    }
    EXPECT_EQ(logs, 3u);
    EXPECT_EQ(segs, 5u);
}

TEST(Commands, CorruptedCsvNamesLine) {
    const auto session = make_session("corrupt");
    {
        std::ofstream raw(session / "raw.csv", std::ios::app);
        raw << "999,1,2,oops,4,5,6,7,0\n";
    }
    try {
        cmd_run_dca({session.string(), "", 1, 0, {100}, scratch("corrupt_out").string()});
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 202u);
        EXPECT_NE(std::string(e.what()).find("raw.csv:202"), std::string::npos);
    }
}

TEST(Commands, TrainAndRunSom) {
    const auto maps = scratch("maps");
    const auto params = scratch("params_dir");
    fs::create_directories(params);
    {
        std::ofstream p(params / "p.txt");
        p << "epoch_limit=3000\n";
    }
    TrainSomOptions t;
    t.sessions = 2;
    t.duration = 200;
    t.maps = 2;
    t.params = (params / "p.txt").string();
    t.out = maps.string();
    cmd_train_som(t);
    EXPECT_TRUE(fs::exists(maps / "map_0.csv"));
    EXPECT_TRUE(fs::exists(maps / "map_1.csv"));
    EXPECT_TRUE(fs::exists(maps / "umatrix_1.csv"));

    const auto session = make_session("som_in");
    const auto dca = scratch("som_dca");
    cmd_run_dca({session.string(), "", 1, 0, {100, 1000}, dca.string()});
    RunSomOptions r;
    r.session = session.string();
    r.maps = {maps.string()};
    r.match_dca = dca.string();
    r.dca_z = {100, 1000};
    r.out = scratch("som_out").string();
    cmd_run_som(r);
    const auto manifest = nlohmann::json::parse(slurp(fs::path(r.out) / "manifest.json"));
    const auto som_z = manifest["details"]["dca_z_to_som_z"]["100"].get<std::size_t>();
    auto dca_in = io::open_in((dca / "mcav_z100.csv").string());
    auto som_in = io::open_in((fs::path(r.out) / ("mbmu_z" + std::to_string(som_z) + ".csv")).string());
    EXPECT_EQ(io::read_segments(dca_in).segments.size(), io::read_segments(som_in).segments.size());
}

TEST(Commands, RunSomErrors) {
    const auto session = make_session("som_err");
    RunSomOptions r;
    r.session = session.string();
    r.maps = {(session / "nope.csv").string()};
    r.out = scratch("som_err_out").string();
    EXPECT_THROW(cmd_run_som(r), std::runtime_error);

    const auto map_dir = scratch("bad_dim");
    fs::create_directories(map_dir);
    {
        std::ofstream m(map_dir / "map_0.csv");
        m << "row,col,w0,w1\n0,0,1,2\n";
    }
    r.maps = {map_dir.string()};
    EXPECT_THROW(cmd_run_som(r), DomainError);
}

TEST(Commands, CompareVerdicts) {
    const auto dir = scratch("cmp");
    fs::create_directories(dir);
    SegmentSeries low{0, ScoreKind::mcav, {}};
    SegmentSeries high{0, ScoreKind::mcav, {}};
    for (std::size_t i = 0; i < 12; ++i) {
        low.segments.push_back({i, 0, false, {{Pid{1}, {0.01 * static_cast<double>(i), 10}}}});
        high.segments.push_back({i, 0, false, {{Pid{1}, {0.5 + 0.01 * static_cast<double>(i), 10}}}});
    }
    for (auto [name, s] : {std::pair{"low.csv", &low}, std::pair{"high.csv", &high}}) {
        std::ofstream out(dir / name);
        io::write_segments(out, *s);
    }
    const auto same = cmd_compare({(dir / "low.csv").string(), (dir / "low.csv").string(), {}, 0.99, ""});
    EXPECT_NE(same.find("not significant"), std::string::npos);
    EXPECT_EQ(same.find(": significant"), std::string::npos);

    const auto apart = cmd_compare({(dir / "high.csv").string(), (dir / "low.csv").string(), {1}, 0.99,
                                    (dir / "report").string()});
    EXPECT_NE(apart.find("[one-sided"), std::string::npos);
    EXPECT_NE(apart.find("[two-sided]"), std::string::npos);
    EXPECT_EQ(apart.find("not significant"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "report" / "report.txt"));

    EXPECT_THROW(cmd_compare({(dir / "high.csv").string(), (dir / "low.csv").string(), {7}, 0.99, ""}),
                 std::runtime_error);
    EXPECT_THROW(cmd_compare({(dir / "high.csv").string(), (dir / "low.csv").string(), {}, 1.5, ""}), UsageError);
}

TEST(Commands, BaselineWritesClusters) {
    const auto session = make_session("km");
    const auto out = scratch("km_out");
    const auto r = cmd_baseline({session.string(), 2, 1, out.string()});
    EXPECT_EQ(r.fractions.size(), 2u);
    EXPECT_TRUE(fs::exists(out / "assignments.csv"));
    EXPECT_TRUE(fs::exists(out / "clusters.csv"));
}
