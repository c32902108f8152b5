// immunesom: generate synthetic sessions, replay them through the DCA and
// SOM detectors, segment the output and compare detectors.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace immunesom::cli;

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "Base RNG seed (overrides IMMUNESOM_SEED)")->envname("IMMUNESOM_SEED");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dendritic cell algorithm and self-organizing map detectors for SYN-scan sessions"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic session (raw.csv, antigen.csv, labels.csv)");
    g->add_option("--scenario", gen.scenario, "pn, an or normal")->required();
    add_seed(g, gen.seed);
    g->add_option("--duration", gen.duration, "Session length in seconds")->check(CLI::PositiveNumber);
    g->add_option("--out", gen.out, "Output directory")->required();

    RunDcaOptions dca;
    auto* d = app.add_subcommand("run-dca", "Replay a session through the DCA and segment MCAV");
    d->add_option("--session", dca.session, "Session directory")->required()->check(CLI::ExistingDirectory);
    d->add_option("--params", dca.params, "key=value params file")->check(CLI::ExistingFile);
    d->add_option("--runs", dca.runs, "Number of seeded replays");
    add_seed(d, dca.seed);
    d->add_option("--z", dca.z, "Segment sizes")->delimiter(',')->check(CLI::PositiveNumber);
    d->add_option("--out", dca.out, "Output directory")->required();

    TrainSomOptions tr;
    auto* t = app.add_subcommand("train-som", "Train SOM maps on normal-only sessions");
    t->add_option("--input", tr.inputs, "Session directories to train on (default: generated corpus)")
        ->check(CLI::ExistingDirectory);
    t->add_option("--sessions", tr.sessions, "Generated corpus size when no --input is given");
    t->add_option("--duration", tr.duration, "Generated session length in seconds")->check(CLI::PositiveNumber);
    t->add_option("--maps", tr.maps, "Number of maps (seeds seed..seed+maps-1)");
    t->add_option("--params", tr.params, "key=value params file")->check(CLI::ExistingFile);
    add_seed(t, tr.seed);
    t->add_option("--out", tr.out, "Output directory")->required();

    RunSomOptions som;
    auto* s = app.add_subcommand("run-som", "Classify a session with trained maps and segment MBMU");
    s->add_option("--session", som.session, "Session directory")->required()->check(CLI::ExistingDirectory);
    s->add_option("--maps", som.maps, "Map files or directories of map_*.csv")->required();
    s->add_option("--params", som.params, "key=value params file")->check(CLI::ExistingFile);
    s->add_option("--z", som.z, "Segment sizes")->delimiter(',')->check(CLI::PositiveNumber);
    s->add_option("--match-dca", som.match_dca, "run-dca output to match segment counts against")
        ->check(CLI::ExistingDirectory);
    s->add_option("--dca-z", som.dca_z, "DCA segment sizes to match")->delimiter(',')->check(CLI::PositiveNumber);
    add_seed(s, som.seed);
    s->add_option("--out", som.out, "Output directory")->required();

    CompareOptions cmp;
    auto* c = app.add_subcommand("compare", "Mann-Whitney comparison of two segment series");
    c->add_option("--a", cmp.a, "First segment CSV")->required()->check(CLI::ExistingFile);
    c->add_option("--b", cmp.b, "Second segment CSV")->required()->check(CLI::ExistingFile);
    c->add_option("--pid", cmp.pids, "Antigen types to test (default: all shared)");
    c->add_option("--confidence", cmp.confidence, "Confidence level");
    c->add_option("--out", cmp.out, "Optional output directory for report.txt");

    BaselineOptions base;
    auto* b = app.add_subcommand("baseline", "k-means on the session's signals alone");
    b->add_option("--session", base.session, "Session directory")->required()->check(CLI::ExistingDirectory);
    b->add_option("--k", base.k, "Number of clusters")->check(CLI::PositiveNumber);
    add_seed(b, base.seed);
    b->add_option("--out", base.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*g) {
            cmd_generate(gen);
        } else if (*d) {
            cmd_run_dca(dca);
        } else if (*t) {
            cmd_train_som(tr);
        } else if (*s) {
            cmd_run_som(som);
        } else if (*c) {
            std::cout << cmd_compare(cmp);
        } else if (*b) {
            const auto r = cmd_baseline(base);
            for (std::size_t k = 0; k < r.fractions.size(); ++k) {
                std::cout << "cluster " << k << ": " << r.fractions[k] << '\n';
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
