#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppl/checkpoint.hpp"
#include "ppl/envs.hpp"
#include "ppl/eval.hpp"
#include "ppl/plot.hpp"
#include "ppl/train.hpp"

namespace ppl {

enum class Algorithm { Ppl, Bc, Qbc };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Ppl: return "ppl";
        case Algorithm::Bc: return "bc";
        case Algorithm::Qbc: return "qbc";
    }
    return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
    if (s == "ppl") return Algorithm::Ppl;
    if (s == "bc") return Algorithm::Bc;
    if (s == "qbc") return Algorithm::Qbc;
    throw dataset_error("unknown algorithm: " + s);
}

struct ExperimentSpec {
    std::string name = "experiment";
    std::string dataset_path;             // path to a .jsonl dataset, or
    std::string generator = "toy";        // built-in generator when path empty
    std::uint64_t dataset_seed = 0;
    Algorithm algorithm = Algorithm::Ppl;
    TrainConfig train;
    double qbc_weight = 1.0;
    std::size_t eval_episodes = 1;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = "out";

    void validate() const {
        if (seeds.empty()) throw dataset_error("experiment spec: seeds must be nonempty");
        train.validate();
    }
};

struct SeedResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<double> discounted_returns;
    std::vector<double> undiscounted_returns;
    std::size_t steps = 0;
    bool reached_target = false;
    double mean_abs_y = 0.0;  // toy-task deviation metric
    std::vector<std::pair<double, double>> score_series;
    RolloutResult rollout;
};

struct MetricsReport {
    ExperimentSpec spec;
    std::vector<SeedResult> seeds;
    double mean_discounted = 0.0;
    double std_discounted = 0.0;
    double wall_clock_seconds = 0.0;

    bool any_failed() const {
        for (const auto& s : seeds)
            if (s.failed) return true;
        return false;
    }

    void finalize() {
        std::vector<double> vals;
        for (const auto& s : seeds)
            if (!s.failed)
                for (double v : s.discounted_returns) vals.push_back(v);
        if (vals.empty()) return;
        double m = 0.0;
        for (double v : vals) m += v;
        m /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        var /= static_cast<double>(vals.size());
        mean_discounted = m;
        std_discounted = std::sqrt(var);
    }
};

inline OfflineDataset resolve_dataset(const ExperimentSpec& spec) {
    if (!spec.dataset_path.empty()) return load_dataset(spec.dataset_path);
    if (spec.generator == "toy")
        return generate_toy_path_dataset(ToyDatasetConfig{}, spec.dataset_seed);
    throw dataset_error("unknown dataset generator: " + spec.generator);
}

/// Train + evaluate for one seed; throws on training failure.
inline SeedResult run_seed(const ExperimentSpec& spec, const OfflineDataset& ds,
                           std::uint64_t seed, const std::string& seed_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(seed_dir);

    SeedResult out;
    out.seed = seed;
    TrainConfig cfg = spec.train;
    cfg.seed = seed;

    const bool toy = ds.metadata.value("generator", "") == "toy-path";
    ToyPathEnv env;
    if (toy)
        env = ToyPathEnv::make(ds.metadata.value("n_grid", std::size_t{50}),
                               ds.metadata.value("x_start", -1.3),
                               ds.metadata.value("x_end", 0.0), cfg.gamma);

    Network policy;
    TrainLog log;
    ScoreProbe probe;
    if (toy) {
        probe.score = [&env](const Network& p) {
            return rollout(env, net_toy_policy(p), env.n_grid()).discounted_return;
        };
    }

    switch (spec.algorithm) {
        case Algorithm::Ppl: {
            TrainResult r = train(ds, cfg, toy ? &probe : nullptr);
            policy = r.policy;
            log = r.log;
            save_network(r.critic, seed_dir + "/critic.ckpt");
            save_network(r.potential, seed_dir + "/potential.ckpt");
            break;
        }
        case Algorithm::Bc: {
            std::mt19937_64 rng(cfg.seed);
            policy = bc_pretrain(ds, cfg.hidden, cfg.steps_bc, cfg.lr_policy,
                                 cfg.batch_size, rng, &log, cfg.log_every);
            break;
        }
        case Algorithm::Qbc: {
            TrainConfig pre = cfg;
            pre.steps_ppl = 0;
            TrainResult r = train(ds, pre);  // beta + conservative Q^beta
            std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull);
            policy = qbc_baseline(ds, r.critic, cfg.hidden, cfg.steps_ppl, cfg.lr_policy,
                                  spec.qbc_weight, cfg.batch_size, rng, &log,
                                  cfg.log_every);
            save_network(r.critic, seed_dir + "/critic.ckpt");
            break;
        }
    }
    save_network(policy, seed_dir + "/policy.ckpt");
    log.to_csv(seed_dir + "/trainlog.csv");
    out.score_series = probe.series;

    for (std::size_t e = 0; e < spec.eval_episodes; ++e) {
        if (toy) {
            RolloutResult r = rollout(env, net_toy_policy(policy), env.n_grid());
            out.discounted_returns.push_back(r.discounted_return);
            out.undiscounted_returns.push_back(r.undiscounted_return);
            out.steps = r.steps;
            out.reached_target = r.reached_target;
            out.mean_abs_y = toy_mean_abs_y(r);
            out.rollout = r;
        } else if (ds.metadata.value("generator", "") == "tabular") {
            auto [mdp, support] = tabular_from_metadata(ds.metadata);
            const auto actions = dataset_actions_per_state(ds, mdp.n_states, mdp.n_actions);
            const TabularPolicy tp =
                nearest_action_policy(policy, actions, mdp.n_states, mdp.n_actions);
            RolloutResult r = rollout(mdp, tp, 0);
            out.discounted_returns.push_back(r.discounted_return);
            out.undiscounted_returns.push_back(r.undiscounted_return);
            out.steps = r.steps;
            out.reached_target = r.reached_target;
            out.rollout = r;
        } else {
            throw dataset_error("evaluation: unknown environment for dataset");
        }
    }
    return out;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    const TrainConfig& t = spec.train;
    return {{"name", spec.name},
            {"dataset_path", spec.dataset_path},
            {"generator", spec.generator},
            {"dataset_seed", spec.dataset_seed},
            {"algorithm", algorithm_name(spec.algorithm)},
            {"qbc_weight", spec.qbc_weight},
            {"eval_episodes", spec.eval_episodes},
            {"seeds", spec.seeds},
            {"output_dir", spec.output_dir},
            {"train",
             {{"w", t.w},
              {"gamma", t.gamma},
              {"lr_policy", t.lr_policy},
              {"lr_critic", t.lr_critic},
              {"lr_potential", t.lr_potential},
              {"batch_size", t.batch_size},
              {"steps_bc", t.steps_bc},
              {"steps_critic", t.steps_critic},
              {"steps_ppl", t.steps_ppl},
              {"mode", t.mode == TrainConfig::Mode::OneStep ? "one-step" : "joint"},
              {"conservative_coef", t.conservative_coef},
              {"polyak_tau", t.polyak_tau},
              {"hidden", t.hidden}}}};
}

inline void write_metrics_csv(const MetricsReport& rep, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw dataset_error("cannot open metrics csv: " + path);
    os << "seed,status,discounted_return,undiscounted_return,steps,reached_target,"
          "mean_abs_y\n";
    char buf[512];
    for (const auto& s : rep.seeds) {
        const double d = s.discounted_returns.empty() ? 0.0 : s.discounted_returns[0];
        const double u = s.undiscounted_returns.empty() ? 0.0 : s.undiscounted_returns[0];
        std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.17g,%zu,%d,%.17g\n",
                      static_cast<unsigned long long>(s.seed),
                      s.failed ? "failed" : "ok", d, u, s.steps,
                      s.reached_target ? 1 : 0, s.mean_abs_y);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "aggregate,mean_std,%.17g,%.17g,0,0,0\n",
                  rep.mean_discounted, rep.std_discounted);
    os << buf;
}

/// Train/evaluate every seed, write report.json, metrics.csv, checkpoints and
/// trajectory plots under the spec's output directory. A failing seed is
/// marked in the report and the run continues.
inline MetricsReport run_experiment(const ExperimentSpec& spec) {
    namespace fs = std::filesystem;
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();

    OfflineDataset ds = resolve_dataset(spec);
    fs::create_directories(spec.output_dir);

    MetricsReport rep;
    rep.spec = spec;
    for (auto seed : spec.seeds) {
        const std::string seed_dir =
            spec.output_dir + "/seed_" + std::to_string(seed);
        try {
            rep.seeds.push_back(run_seed(spec, ds, seed, seed_dir));
        } catch (const std::exception& e) {
            SeedResult fail;
            fail.seed = seed;
            fail.failed = true;
            fail.error = e.what();
            rep.seeds.push_back(std::move(fail));
        }
    }
    rep.finalize();
    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json j;
    j["spec"] = spec_to_json(spec);
    j["mean_discounted"] = rep.mean_discounted;
    j["std_discounted"] = rep.std_discounted;
    j["wall_clock_seconds"] = rep.wall_clock_seconds;
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : rep.seeds) {
        nlohmann::json sj;
        sj["seed"] = s.seed;
        sj["status"] = s.failed ? "failed" : "ok";
        if (s.failed) sj["error"] = s.error;
        sj["discounted_returns"] = s.discounted_returns;
        sj["undiscounted_returns"] = s.undiscounted_returns;
        sj["steps"] = s.steps;
        sj["reached_target"] = s.reached_target;
        sj["mean_abs_y"] = s.mean_abs_y;
        nlohmann::json traj = nlohmann::json::array();
        for (const auto& [st, ac] : s.rollout.trajectory)
            traj.push_back({{"s", st}, {"a", ac}});
        sj["trajectory"] = traj;
        seeds.push_back(std::move(sj));
    }
    j["seeds"] = seeds;
    std::ofstream os(spec.output_dir + "/report.json");
    os << j.dump(2) << "\n";

    write_metrics_csv(rep, spec.output_dir + "/metrics.csv");

    // trajectory plot for toy runs
    if (ds.metadata.value("generator", "") == "toy-path") {
        ToyPathEnv env = ToyPathEnv::make(ds.metadata.value("n_grid", std::size_t{50}),
                                          ds.metadata.value("x_start", -1.3),
                                          ds.metadata.value("x_end", 0.0),
                                          spec.train.gamma);
        std::vector<PlotCurve> curves;
        for (const auto& tr : toy_trajectories(ds))
            curves.push_back({tr, "black", 1.0, ""});
        for (const auto& s : rep.seeds) {
            if (s.failed || s.rollout.trajectory.empty()) continue;
            PlotCurve c;
            for (const auto& [st, ac] : s.rollout.trajectory)
                c.points.push_back({st[0], st[1]});
            // arrival point
            c.points.push_back({env.x_target(), s.rollout.trajectory.back().second[0]});
            c.color = spec.algorithm == Algorithm::Ppl ? "blue" : "orange";
            c.width = 2.0;
            c.label = std::string(algorithm_name(spec.algorithm)) + " seed " +
                      std::to_string(s.seed);
            curves.push_back(std::move(c));
        }
        render_trajectories_svg(env, curves, spec.output_dir + "/trajectories.svg");
    }
    return rep;
}

/// One run_experiment per w value, plus a merged report with per-w score
/// curves smoothed by an exponential moving average (coefficient 0.3).
inline std::vector<MetricsReport> w_sweep(const ExperimentSpec& base,
                                          const std::vector<double>& w_values) {
    if (w_values.empty()) throw dataset_error("w_sweep: no w values");
    for (double w : w_values)
        if (w < 1.0) throw dataset_error("w_sweep: w must be >= 1, got " + std::to_string(w));

    std::vector<MetricsReport> reports;
    std::vector<ScoreSeries> curves;
    const std::vector<std::string> palette = {"orange", "purple", "blue", "red", "green"};
    nlohmann::json merged = nlohmann::json::array();
    for (std::size_t i = 0; i < w_values.size(); ++i) {
        ExperimentSpec spec = base;
        spec.train.w = w_values[i];
        spec.name = base.name + "_w" + std::to_string(w_values[i]);
        spec.output_dir = base.output_dir + "/w_" + std::to_string(w_values[i]);
        reports.push_back(run_experiment(spec));
        const auto& rep = reports.back();
        merged.push_back({{"w", w_values[i]},
                          {"mean_discounted", rep.mean_discounted},
                          {"std_discounted", rep.std_discounted},
                          {"any_failed", rep.any_failed()}});
        // EMA score curve of the first non-failed seed
        for (const auto& s : rep.seeds) {
            if (s.failed || s.score_series.empty()) continue;
            ScoreSeries ss;
            ss.points = ema_series(s.score_series, 0.3);
            ss.color = palette[i % palette.size()];
            ss.label = "w=" + std::to_string(w_values[i]);
            curves.push_back(std::move(ss));
            break;
        }
    }
    std::filesystem::create_directories(base.output_dir);
    std::ofstream os(base.output_dir + "/sweep.json");
    os << merged.dump(2) << "\n";
    if (!curves.empty())
        render_scores_svg(curves, base.output_dir + "/score_curves.svg");
    return reports;
}

// ---------------------------------------------------------------------------
// flat key = value config files

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw dataset_error("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto h = line.find('#');
        if (h != std::string::npos) line = line.substr(0, h);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw dataset_error("config line " + std::to_string(lineno) +
                                ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoull(tok));
    return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoull(tok));
    return out;
}

inline void apply_config(ExperimentSpec& spec, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "name") spec.name = v;
        else if (k == "dataset") spec.dataset_path = v;
        else if (k == "generator") spec.generator = v;
        else if (k == "dataset_seed") spec.dataset_seed = std::stoull(v);
        else if (k == "algorithm") spec.algorithm = algorithm_from_name(v);
        else if (k == "qbc_weight") spec.qbc_weight = std::stod(v);
        else if (k == "eval_episodes") spec.eval_episodes = std::stoull(v);
        else if (k == "seeds") spec.seeds = parse_seed_list(v);
        else if (k == "out") spec.output_dir = v;
        else if (k == "w") spec.train.w = std::stod(v);
        else if (k == "gamma") spec.train.gamma = std::stod(v);
        else if (k == "lr_policy") spec.train.lr_policy = std::stod(v);
        else if (k == "lr_critic") spec.train.lr_critic = std::stod(v);
        else if (k == "lr_potential") spec.train.lr_potential = std::stod(v);
        else if (k == "batch_size") spec.train.batch_size = std::stoull(v);
        else if (k == "steps_bc") spec.train.steps_bc = std::stoull(v);
        else if (k == "steps_critic") spec.train.steps_critic = std::stoull(v);
        else if (k == "steps_ppl") spec.train.steps_ppl = std::stoull(v);
        else if (k == "mode")
            spec.train.mode = v == "joint" ? TrainConfig::Mode::Joint
                                           : TrainConfig::Mode::OneStep;
        else if (k == "conservative_coef") spec.train.conservative_coef = std::stod(v);
        else if (k == "polyak_tau") spec.train.polyak_tau = std::stod(v);
        else if (k == "hidden") spec.train.hidden = parse_size_list(v);
        else if (k == "log_every") spec.train.log_every = std::stoull(v);
        else throw dataset_error("unknown config key: " + k);
    }
}

}  // namespace ppl
