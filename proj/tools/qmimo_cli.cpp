// SPDX-License-Identifier: Apache-2.0
//
// qmimo: uplink SE experiments for massive MIMO with low-resolution ADCs.
//
//   qmimo fig1 [--trials N] [--seed S] [--out FILE] [--workers W] [--sweep a,b,c]
//   qmimo fig2 [...]
//   qmimo run <config.json> [--trials N] [--seed S] [--out FILE] [--workers W]

#include <qmimo/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

struct Overrides {
    std::optional<long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::vector<double> sweep;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--trials", o.trials, "Monte Carlo trials per point")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "master seed (also the fixed-drop seed)");
    cmd->add_option("--out", o.out, "output CSV path");
    cmd->add_option("--workers", o.workers, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
}

void apply(qmimo::ExperimentSpec& spec, const Overrides& o) {
    if (o.trials) spec.trials = *o.trials;
    if (o.seed) spec.seed = *o.seed;
    if (o.out) spec.output = *o.out;
    if (o.workers) spec.workers = *o.workers;
    if (!o.sweep.empty()) spec.sweep_values = o.sweep;
    spec.validate();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uplink spectral efficiency of massive MIMO with low-resolution ADCs"};
    app.require_subcommand(1);

    Overrides fig1_o, fig2_o, run_o;
    std::string config_path;

    auto* fig1 = app.add_subcommand("fig1", "SE vs p_u: M in {60,120}, K=8, random 1-3 bit ADCs");
    add_common_flags(fig1, fig1_o);
    fig1->add_option("--sweep", fig1_o.sweep, "p_u values in dB")->delimiter(',');

    auto* fig2 = app.add_subcommand("fig2", "SE vs M: uniform 1, 2, ideal bits; fixed and E_u/M power");
    add_common_flags(fig2, fig2_o);
    fig2->add_option("--sweep", fig2_o.sweep, "antenna counts M")->delimiter(',');

    auto* run = app.add_subcommand("run", "run an experiment described by a JSON config file");
    run->add_option("config", config_path, "config file")->required();
    add_common_flags(run, run_o);

    CLI11_PARSE(app, argc, argv);

    try {
        qmimo::ExperimentSpec spec;
        if (*fig1) {
            spec = qmimo::fig1_spec();
            spec.output = "fig1.csv";
            apply(spec, fig1_o);
        } else if (*fig2) {
            spec = qmimo::fig2_spec();
            spec.output = "fig2.csv";
            apply(spec, fig2_o);
        } else {
            spec = qmimo::load_experiment_spec(config_path);
            apply(spec, run_o);
        }
        qmimo::run_experiment(spec, std::cout);
    } catch (const qmimo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
