#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "popsan/checkpoint.hpp"
#include "popsan/config.hpp"
#include "popsan/csv.hpp"
#include "popsan/energy.hpp"
#include "popsan/env.hpp"
#include "popsan/gradcheck.hpp"
#include "popsan/policy.hpp"
#include "popsan/ppo.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitArtifactMismatch = 3;

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Unconsumed "--section.key value" / "--section.key=value" pairs become
// config overrides.
Overrides parse_extras(const std::vector<std::string>& extras) {
    Overrides overrides;
    for (size_t k = 0; k < extras.size(); ++k) {
        std::string token = extras[k];
        if (token.rfind("--", 0) != 0 || token.find('.') == std::string::npos)
            throw std::invalid_argument("unrecognized argument: " + token);
        token = token.substr(2);
        const size_t eq = token.find('=');
        if (eq != std::string::npos) {
            overrides.emplace_back(token.substr(0, eq), token.substr(eq + 1));
        } else {
            if (k + 1 >= extras.size())
                throw std::invalid_argument("override --" + token + " is missing a value");
            overrides.emplace_back(token, extras[++k]);
        }
    }
    return overrides;
}

std::unique_ptr<popsan::PolicyModel> build_policy(const popsan::RunConfig& cfg) {
    if (cfg.actor_type == "mlp")
        return std::make_unique<popsan::MlpPolicy>(cfg.mlp, cfg.ppo.lr_actor);
    return std::make_unique<popsan::SnnPolicy>(cfg.network, cfg.ppo.lr_actor);
}

popsan::TrackingOptions tracking_options(const popsan::RunConfig& cfg,
                                         std::vector<double> sigmas) {
    popsan::TrackingOptions opt;
    opt.sigmas = std::move(sigmas);
    opt.episodes = cfg.eval.episodes;
    opt.settle_steps = cfg.eval.settle_steps;
    opt.seed = cfg.seed;
    opt.env = cfg.env;
    return opt;
}

int cmd_train(const popsan::RunConfig& cfg) {
    auto policy = build_policy(cfg);
    popsan::TrainOptions opt;
    opt.ppo = cfg.ppo;
    opt.env = cfg.env;
    opt.train_noise_sigma = cfg.train_noise_sigma;
    opt.critic_hidden = cfg.critic_hidden;
    opt.seed = cfg.seed;
    opt.out_dir = cfg.out_dir;
    opt.verbose = true;
    popsan::TrainResult result = popsan::train(*policy, opt);
    std::cout << "trained " << result.iterations_run << " iterations\n"
              << "metrics: " << result.metrics_path << "\n"
              << "checkpoint: " << result.final_checkpoint << "\n";
    return kExitOk;
}

int cmd_eval(const popsan::RunConfig& cfg, const std::string& checkpoint) {
    auto policy = popsan::load_policy(checkpoint);
    popsan::TrackingOptions opt = tracking_options(cfg, {0.0});
    popsan::PolicyFn fn =
        popsan::make_mean_policy(*policy, cfg.seed, popsan::stream_id::kEvalBase + 77);
    popsan::TrackingReport report = popsan::evaluate_tracking(fn, opt);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/tracking.csv";
    report.write_csv(path);
    const popsan::TrackingRow& row = report.rows.front();
    std::cout << "sigma 0: mean |err| x " << popsan::format_double(row.mean_abs_err_x)
              << ", y " << popsan::format_double(row.mean_abs_err_y) << ", episodes "
              << row.episodes << ", diverged " << row.diverged << "\n"
              << "mean command magnitude " << popsan::format_double(report.mean_command_norm)
              << ", mean ||v - cmd|| " << popsan::format_double(report.mean_err_norm_sigma0)
              << "\nreport: " << path << "\n";
    return kExitOk;
}

int cmd_noise_sweep(const popsan::RunConfig& cfg, const std::string& checkpoint,
                    const std::string& baseline) {
    auto policy = popsan::load_policy(checkpoint);
    popsan::TrackingOptions opt = tracking_options(cfg, cfg.eval.sigmas);
    std::filesystem::create_directories(cfg.out_dir);

    popsan::PolicyFn fn =
        popsan::make_mean_policy(*policy, cfg.seed, popsan::stream_id::kEvalBase + 78);
    popsan::TrackingReport report = popsan::evaluate_tracking(fn, opt);

    if (baseline.empty()) {
        const std::string path = cfg.out_dir + "/tracking.csv";
        report.write_csv(path);
        std::cout << "rows: " << report.rows.size() << "\nreport: " << path << "\n";
        return kExitOk;
    }

    auto base_policy = popsan::load_policy(baseline);
    popsan::PolicyFn base_fn =
        popsan::make_mean_policy(*base_policy, cfg.seed, popsan::stream_id::kEvalBase + 79);
    popsan::TrackingReport base_report = popsan::evaluate_tracking(base_fn, opt);

    const std::string path = cfg.out_dir + "/noise_compare.csv";
    popsan::CsvWriter csv(path, {"model", "sigma", "mean_abs_err_x", "mean_abs_err_y",
                                 "std_err", "episodes", "diverged"});
    auto emit = [&](const std::string& model, const popsan::TrackingReport& rep) {
        for (const popsan::TrackingRow& r : rep.rows)
            csv.row_mixed({model, popsan::format_double(r.sigma),
                           popsan::format_double(r.mean_abs_err_x),
                           popsan::format_double(r.mean_abs_err_y),
                           popsan::format_double(r.std_err), std::to_string(r.episodes),
                           std::to_string(r.diverged)});
    };
    emit("snn", report);
    emit("baseline", base_report);
    std::cout << "paired rows: " << 2 * report.rows.size() << "\nreport: " << path << "\n";
    return kExitOk;
}

int cmd_energy(const popsan::RunConfig& cfg, const std::string& checkpoint, int inferences) {
    if (popsan::checkpoint_kind(checkpoint) != "snn")
        throw std::runtime_error("energy profiling requires an snn checkpoint");
    popsan::PopSanActor actor = popsan::load_checkpoint(checkpoint);
    popsan::SnnPolicy policy(std::move(actor), cfg.ppo.lr_actor);

    // Observations come from on-policy evaluation episodes.
    popsan::PointMassEnv env(cfg.env);
    popsan::RngStream reset_rng(cfg.seed, popsan::stream_id::kEvalBase + 500);
    popsan::PolicyFn fn =
        popsan::make_mean_policy(policy, cfg.seed, popsan::stream_id::kEvalBase + 501);
    std::vector<popsan::Vec> observations;
    popsan::PointMassState state;
    popsan::Vec obs = env.reset(state, reset_rng);
    while (static_cast<int>(observations.size()) < inferences) {
        observations.push_back(obs);
        popsan::StepResult sr = env.step(state, fn(obs));
        obs = sr.done ? env.reset(state, reset_rng) : sr.observation;
    }

    popsan::RngStream count_rng(cfg.seed, popsan::stream_id::kEvalBase + 502);
    popsan::OpCount counts =
        popsan::count_ops(policy.actor, observations, count_rng, popsan::Mode::Eval);

    popsan::SavingsReport report =
        popsan::compare_with_ann(policy.actor.spec, counts.rates, {1, 2, 3});
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/energy.csv";
    report.write_csv(path);

    double mean = 0, var = 0;
    for (double v : counts.per_inference_ops) mean += v;
    mean /= counts.inferences;
    for (double v : counts.per_inference_ops) var += (v - mean) * (v - mean);
    var /= counts.inferences;
    std::cout << "measured " << counts.inferences << " inferences, ops/inference mean "
              << popsan::format_double(mean) << " std " << popsan::format_double(std::sqrt(var))
              << "\nshrink AC share "
              << popsan::format_double(counts.shrink_ac / std::max(1.0, counts.ac_ops)) << "\n";
    for (const popsan::SavingsRow& r : report.rows)
        std::cout << "t_final " << r.t_final << ": ANN "
                  << popsan::format_double(r.ann_pj) << " pJ, SNN "
                  << popsan::format_double(r.snn_pj) << " pJ, savings "
                  << popsan::format_double(r.savings_pct) << "%\n";
    std::cout << "report: " << path << "\n";
    return kExitOk;
}

int cmd_gradcheck(const popsan::RunConfig& cfg) {
    const size_t params = cfg.gradcheck.spec.param_count();
    if (params > 500) {
        std::cerr << "gradcheck spec has " << params
                  << " parameters; element-wise finite differences are capped at 500\n";
        return kExitConfigError;
    }
    popsan::GradCheckSummary summary =
        popsan::run_all_gradchecks(cfg.gradcheck.spec, cfg.seed == 0 ? 7 : cfg.seed);
    for (const auto& [name, res] : summary.suites)
        std::cout << name << ": " << res.checks << " checks, worst rel err "
                  << popsan::format_double(res.worst_rel_err) << " (" << res.worst_name
                  << ")\n";
    std::cout << "worst overall: " << popsan::format_double(summary.worst_rel_err) << " at "
              << summary.worst_name << " (tolerance "
              << popsan::format_double(cfg.gradcheck.tolerance) << ")\n";
    return summary.pass(cfg.gradcheck.tolerance) ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"population-coded spiking actor: train / eval / noise-sweep / energy / "
                 "gradcheck"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, baseline, sigmas_arg;
    int64_t seed = -1;
    int iterations = -1, episodes = -1, inferences = 128;
    double tolerance = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "run seed (rekeys every random stream)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->allow_extras();
    };

    CLI::App* train_cmd = app.add_subcommand("train", "run PPO training");
    add_common(train_cmd);
    train_cmd->add_option("--iterations", iterations, "iteration budget");

    CLI::App* eval_cmd = app.add_subcommand("eval", "sigma-0 tracking evaluation");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "actor checkpoint")->required();
    eval_cmd->add_option("--episodes", episodes, "episodes per evaluation");

    CLI::App* sweep_cmd = app.add_subcommand("noise-sweep", "tracking under command noise");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--checkpoint", checkpoint, "actor checkpoint")->required();
    sweep_cmd->add_option("--baseline", baseline, "dense baseline checkpoint for a paired report");
    sweep_cmd->add_option("--sigmas", sigmas_arg, "comma-separated noise levels");
    sweep_cmd->add_option("--episodes", episodes, "episodes per sigma");

    CLI::App* energy_cmd = app.add_subcommand("energy", "MAC/AC energy model report");
    add_common(energy_cmd);
    energy_cmd->add_option("--checkpoint", checkpoint, "snn actor checkpoint")->required();
    energy_cmd->add_option("--inferences", inferences, "inferences to measure (>= 100)");

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    add_common(grad_cmd);
    grad_cmd->add_option("--tolerance", tolerance, "max relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfigError;
    }

    popsan::RunConfig cfg;
    try {
        CLI::App* active = app.get_subcommands().front();
        Overrides overrides = parse_extras(active->remaining());
        if (seed >= 0) overrides.emplace_back("seed", std::to_string(seed));
        if (!out_dir.empty()) overrides.emplace_back("out_dir", out_dir);
        if (iterations >= 0) overrides.emplace_back("ppo.iterations", std::to_string(iterations));
        if (episodes >= 0) overrides.emplace_back("eval.episodes", std::to_string(episodes));
        if (tolerance >= 0)
            overrides.emplace_back("gradcheck.tolerance", popsan::format_double(tolerance));
        if (!sigmas_arg.empty()) {
            std::string list = "[";
            for (char c : sigmas_arg) list += (c == ',' ? ',' : c);
            list += "]";
            overrides.emplace_back("eval.sigmas", list);
        }
        cfg = popsan::load_config(config_path, overrides);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        if (app.got_subcommand("train")) return cmd_train(cfg);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(cfg);

        // Subcommands below consume checkpoints; their load failures are
        // artifact mismatches, not config problems.
        try {
            if (app.got_subcommand("eval")) return cmd_eval(cfg, checkpoint);
            if (app.got_subcommand("noise-sweep"))
                return cmd_noise_sweep(cfg, checkpoint, baseline);
            if (app.got_subcommand("energy")) return cmd_energy(cfg, checkpoint, inferences);
        } catch (const std::runtime_error& e) {
            std::cerr << "artifact error: " << e.what() << "\n";
            return kExitArtifactMismatch;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
    return kExitConfigError;
}
