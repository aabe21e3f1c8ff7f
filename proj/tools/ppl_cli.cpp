// Command line front end: dataset generation/validation, training, w sweeps,
// evaluation, plotting and oracle self-checks.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppl/experiment.hpp"
#include "ppl/oracle.hpp"

namespace {

ppl::ExperimentSpec make_spec(const std::string& config_path, std::uint64_t seed,
                              const std::string& out) {
    ppl::ExperimentSpec spec;
    if (!config_path.empty()) ppl::apply_config(spec, ppl::parse_config_file(config_path));
    spec.seeds = {seed};
    if (!out.empty()) spec.output_dir = out;
    return spec;
}

int cmd_dataset_gen(const std::string& generator, std::uint64_t seed,
                    const std::string& out) {
    ppl::OfflineDataset ds;
    if (generator == "toy") {
        ds = ppl::generate_toy_path_dataset(ppl::ToyDatasetConfig{}, seed);
    } else if (generator == "tabular") {
        std::mt19937_64 rng(seed);
        auto [mdp, support] = ppl::random_tabular_instance(8, 4, 0.95, rng);
        ds = ppl::generate_tabular_dataset(mdp, support, 32, seed);
    } else {
        std::fprintf(stderr, "unknown generator: %s\n", generator.c_str());
        return 1;
    }
    ppl::save_dataset(ds, out);
    std::printf("wrote %zu transitions to %s\n", ds.size(), out.c_str());
    return 0;
}

int cmd_dataset_validate(const std::string& path) {
    try {
        ppl::OfflineDataset ds = ppl::load_dataset(path);
        ds.validate();
        std::printf("ok: %zu transitions, state_dim=%zu action_dim=%zu\n", ds.size(),
                    ds.state_dim, ds.action_dim);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "invalid dataset: %s\n", e.what());
        return 1;
    }
}

int cmd_oracle_check(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto [mdp, support] = ppl::random_tabular_instance(6, 3, 0.9, rng);
        const ppl::TabularPolicy beta =
            ppl::TabularPolicy::uniform_over_support(support, mdp.n_actions);
        const ppl::ValueTable vb = ppl::policy_evaluation(mdp, beta);
        const ppl::TabularPolicy pi =
            ppl::supported_argmax_policy(mdp, vb, support);
        const ppl::ValueTable vp = ppl::policy_evaluation(mdp, pi);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            if (vp.V[s] < vb.V[s] - 1e-10) {
                std::printf("FAIL trial %d state %zu: improvement violated (%.12f < %.12f)\n",
                            trial, s, vp.V[s], vb.V[s]);
                ++failures;
            }
            // performance_gap cross-checks the difference lemma internally
            (void)ppl::performance_gap(mdp, pi, beta, s);
        }
    }
    std::printf(failures == 0 ? "oracle check passed (20 random instances)\n"
                              : "oracle check FAILED (%d violations)\n",
                failures);
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partial policy learning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out;
    std::string config;
    app.add_option("--seed", seed, "global RNG seed");
    app.add_option("--out", out, "output path or directory");
    app.add_option("--config", config, "key = value config file");

    // dataset gen | validate
    auto* dataset = app.add_subcommand("dataset", "offline dataset operations");
    dataset->require_subcommand(1);
    auto* gen = dataset->add_subcommand("gen", "generate a dataset");
    std::string generator = "toy";
    gen->add_option("--generator", generator, "toy | tabular");
    auto* validate = dataset->add_subcommand("validate", "validate a dataset file");
    std::string dataset_path;
    validate->add_option("path", dataset_path, "dataset .jsonl")->required();

    auto* train_cmd = app.add_subcommand("train", "train on an offline dataset");
    std::string algo = "ppl";
    train_cmd->add_option("--algorithm", algo, "ppl | bc | qbc");
    std::string train_dataset;
    train_cmd->add_option("--dataset", train_dataset, "dataset .jsonl (default: built-in toy)");

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep over w values");
    std::vector<double> w_values = {3, 5, 8, 12};
    sweep_cmd->add_option("--w", w_values, "w values to sweep");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved policy checkpoint");
    std::string policy_path;
    eval_cmd->add_option("policy", policy_path, "policy checkpoint")->required();
    std::string eval_dataset;
    eval_cmd->add_option("--dataset", eval_dataset, "dataset defining the task")->required();

    auto* plot_cmd = app.add_subcommand("plot", "plot dataset trajectories");
    std::string plot_dataset;
    plot_cmd->add_option("--dataset", plot_dataset, "toy dataset .jsonl")->required();

    auto* oracle_cmd = app.add_subcommand("oracle", "oracle self checks");
    oracle_cmd->require_subcommand(1);
    auto* check = oracle_cmd->add_subcommand("check", "run tabular oracle consistency checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_dataset_gen(generator, seed, out.empty() ? "dataset.jsonl" : out);
        if (validate->parsed()) return cmd_dataset_validate(dataset_path);
        if (check->parsed()) return cmd_oracle_check(seed);

        if (train_cmd->parsed()) {
            ppl::ExperimentSpec spec = make_spec(config, seed, out.empty() ? "out" : out);
            if (!train_dataset.empty()) spec.dataset_path = train_dataset;
            if (config.empty() || !algo.empty()) spec.algorithm = ppl::algorithm_from_name(algo);
            ppl::MetricsReport rep = ppl::run_experiment(spec);
            std::printf("mean discounted return %.6f (std %.6f), report in %s\n",
                        rep.mean_discounted, rep.std_discounted, spec.output_dir.c_str());
            return rep.any_failed() ? 1 : 0;
        }
        if (sweep_cmd->parsed()) {
            ppl::ExperimentSpec spec = make_spec(config, seed, out.empty() ? "sweep_out" : out);
            const auto reports = ppl::w_sweep(spec, w_values);
            for (std::size_t i = 0; i < reports.size(); ++i)
                std::printf("w=%g: mean discounted return %.6f\n", w_values[i],
                            reports[i].mean_discounted);
            return 0;
        }
        if (eval_cmd->parsed()) {
            ppl::OfflineDataset ds = ppl::load_dataset(eval_dataset);
            ppl::Network policy = ppl::load_network(policy_path);
            if (ds.metadata.value("generator", "") == "toy-path") {
                ppl::ToyPathEnv env = ppl::ToyPathEnv::make(
                    ds.metadata.value("n_grid", std::size_t{50}),
                    ds.metadata.value("x_start", -1.3), ds.metadata.value("x_end", 0.0),
                    0.99);
                const auto r = ppl::rollout(env, ppl::net_toy_policy(policy), env.n_grid());
                std::printf("discounted %.6f undiscounted %.6f reached=%d steps=%zu\n",
                            r.discounted_return, r.undiscounted_return,
                            r.reached_target ? 1 : 0, r.steps);
            } else if (ds.metadata.value("generator", "") == "tabular") {
                auto [mdp, support] = ppl::tabular_from_metadata(ds.metadata);
                const auto actions =
                    ppl::dataset_actions_per_state(ds, mdp.n_states, mdp.n_actions);
                const auto tp = ppl::nearest_action_policy(policy, actions, mdp.n_states,
                                                           mdp.n_actions);
                const auto r = ppl::rollout(mdp, tp, 0);
                std::printf("discounted %.6f from state 0\n", r.discounted_return);
            } else {
                std::fprintf(stderr, "dataset has no recognized environment metadata\n");
                return 1;
            }
            return 0;
        }
        if (plot_cmd->parsed()) {
            ppl::OfflineDataset ds = ppl::load_dataset(plot_dataset);
            if (ds.metadata.value("generator", "") != "toy-path") {
                std::fprintf(stderr, "plot: only toy-path datasets are plottable\n");
                return 1;
            }
            ppl::ToyPathEnv env = ppl::ToyPathEnv::make(
                ds.metadata.value("n_grid", std::size_t{50}),
                ds.metadata.value("x_start", -1.3), ds.metadata.value("x_end", 0.0), 0.99);
            std::vector<ppl::PlotCurve> curves;
            for (const auto& tr : ppl::toy_trajectories(ds))
                curves.push_back({tr, "black", 1.0, ""});
            const std::string svg = out.empty() ? "trajectories.svg" : out;
            ppl::render_trajectories_svg(env, curves, svg);
            std::printf("wrote %s\n", svg.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
