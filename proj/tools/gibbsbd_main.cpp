#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "sbd/experiment.hpp"

namespace {

using nlohmann::json;

// Merge two single-chain model files into one coupling config: shared blocks
// must agree exactly, per-chain blocks get a 1/2 suffix.
json merge_coupled_specs(const json& a, const json& b) {
    std::vector<std::string> clashes;
    json out = json::object();
    for (const char* key : {"potential", "region", "lambda"}) {
        const bool ina = a.contains(key), inb = b.contains(key);
        if (ina && inb && a.at(key) != b.at(key))
            clashes.push_back(std::string(key) + ": the two chain specs disagree");
        if (ina) out[key] = a.at(key);
        else if (inb) out[key] = b.at(key);
    }
    for (const char* key : {"seed", "t_end", "replicas", "sample_times", "format"}) {
        const bool ina = a.contains(key), inb = b.contains(key);
        if (ina && inb && a.at(key) != b.at(key))
            clashes.push_back(std::string(key) + ": the two chain specs disagree");
        if (ina) out[key] = a.at(key);
        else if (inb) out[key] = b.at(key);
    }
    if (a.contains("boundary")) out["boundary1"] = a.at("boundary");
    if (b.contains("boundary")) out["boundary2"] = b.at("boundary");
    if (a.contains("start")) out["start1"] = a.at("start");
    if (b.contains("start")) out["start2"] = b.at("start");
    for (const json* part : {&a, &b})
        if (part->contains("kind") && part->at("kind") != json("couple"))
            clashes.push_back("kind: chain specs for coupling must omit kind or say couple");
    if (!clashes.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& cl : clashes) msg += "\n  - " + cl;
        throw sbd::ConfigError(msg);
    }
    out["kind"] = "couple";
    return out;
}

struct Cli {
    std::string spec, spec1, spec2;
    long long seed = -1;
    bool seed_set = false;
    int jobs = 1;
    std::string out_dir = "out";
    std::string format;
    double t_end = 0.0;
    bool t_end_set = false;
    long replicas = 0;
    bool replicas_set = false;
    int cells = 0;
    bool cells_set = false;
};

int run(const std::string& kind, const Cli& cli) {
    sbd::ExperimentConfig cfg;
    if (kind == "couple" && !cli.spec1.empty()) {
        const json a = sbd::ExperimentConfig::from_file(cli.spec1).doc;
        const json b = sbd::ExperimentConfig::from_file(cli.spec2).doc;
        cfg.doc = merge_coupled_specs(a, b);
    } else {
        cfg = sbd::ExperimentConfig::from_file(cli.spec);
    }
    if (!cfg.doc.contains("kind"))
        cfg.doc["kind"] = kind;
    else if (cfg.kind() != kind)
        throw sbd::ConfigError("invalid experiment config:\n  - kind: spec file says '" +
                               cfg.kind() + "' but the subcommand is '" + kind + "'");
    if (cli.seed_set) cfg.doc["seed"] = cli.seed;
    if (!cli.format.empty()) cfg.doc["format"] = cli.format;
    if (cli.t_end_set) cfg.doc["t_end"] = cli.t_end;
    if (cli.replicas_set) cfg.doc["replicas"] = cli.replicas;
    if (cli.cells_set) cfg.doc["cells"] = cli.cells;

    const sbd::RunResult res = sbd::run_experiment(cfg, cli.out_dir, cli.jobs);
    std::printf("%s: %s\n", kind.c_str(), res.verdict.c_str());
    for (const auto& f : res.files) std::printf("  wrote %s/%s\n", cli.out_dir.c_str(), f.c_str());
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial birth-death simulator for Gibbs point processes"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--seed", cli.seed, "RNG seed; overrides the spec file")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--jobs", cli.jobs, "worker threads for replica fan-out")
        ->check(CLI::PositiveNumber);
    app.add_option("--out-dir", cli.out_dir, "directory for artifacts (default: out)");
    app.add_option("--format", cli.format, "report encoding")
        ->check(CLI::IsMember({"json", "compact"}));

    struct SubDef {
        const char* name;
        const char* blurb;
        bool time_overrides;
    };
    const SubDef defs[] = {
        {"simulate", "run replicated birth-death trajectories and tabulate counts", true},
        {"couple", "run the identity coupling of two chains and track disagreement", true},
        {"percolate", "disagreement spread across a grid of boxes vs the locality ceiling", false},
        {"spatial-mixing", "boundary influence on an inner window as the region grows", false},
        {"gnz-check", "stationarity balance identity on accepted equilibrium samples", false},
        {"threshold", "temperedness constant and activity thresholds for a potential", false},
        {"oracle", "exact stationary law of the discretized chain", false},
        {"partition", "partition function estimate (series or Monte Carlo)", false},
    };
    for (const SubDef& d : defs) {
        CLI::App* sub = app.add_subcommand(d.name, d.blurb);
        sub->fallthrough();
        CLI::Option* spec = sub->add_option("--spec", cli.spec, "experiment spec file")
                                ->check(CLI::ExistingFile);
        if (std::string(d.name) == "couple") {
            CLI::Option* s1 = sub->add_option("--spec1", cli.spec1, "spec file for chain 1")
                                  ->check(CLI::ExistingFile);
            CLI::Option* s2 = sub->add_option("--spec2", cli.spec2, "spec file for chain 2")
                                  ->check(CLI::ExistingFile);
            s1->needs(s2);
            s2->needs(s1);
            s1->excludes(spec);
        } else {
            spec->required();
        }
        if (d.time_overrides) {
            sub->add_option("--t-end", cli.t_end, "time horizon; overrides the spec file")
                ->each([&cli](const std::string&) { cli.t_end_set = true; });
            sub->add_option("--replicas", cli.replicas, "replica count; overrides the spec file")
                ->each([&cli](const std::string&) { cli.replicas_set = true; });
        }
        if (std::string(d.name) == "oracle")
            sub->add_option("--cells", cli.cells, "cells per axis; overrides the spec file")
                ->each([&cli](const std::string&) { cli.cells_set = true; });
    }
    app.get_option("--seed")->each([&cli](const std::string&) { cli.seed_set = true; });

    CLI11_PARSE(app, argc, argv);

    const CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "couple" && cli.spec.empty() && cli.spec1.empty()) {
        std::fprintf(stderr, "couple: need --spec or --spec1/--spec2\n");
        return 2;
    }
    try {
        return run(sub->get_name(), cli);
    } catch (const sbd::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 3;
    }
}
