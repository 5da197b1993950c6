#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rubricrl/bench.hpp"
#include "rubricrl/driver.hpp"
#include "rubricrl/errors.hpp"

using namespace rubricrl;

namespace {

int dispatch(const std::function<int()>& body) {
    try {
        return body();
    } catch (const InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rubric-based RL orchestration: training, evaluation, grader benchmarking"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Run rubric-reward training on a dataset");
    std::string train_config_path;
    std::string strategy_override, control_override, out_override;
    std::int64_t seed_override = -1;
    int pairs_override = -1;
    train->add_option("--config", train_config_path, "Run config JSON")->required();
    train->add_option("--seed", seed_override, "Override the config seed");
    train->add_option("--strategy", strategy_override, "Override the reward strategy");
    train->add_option("--control", control_override, "Control variant: reference|previous_step");
    train->add_option("--pairs", pairs_override, "Override pairwise comparison count M");
    train->add_option("--out", out_override, "Override the output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Score and judge a trained policy snapshot");
    std::string eval_config_path, snapshot_path, baseline_path;
    bool score_only = false;
    eval->add_option("--config", eval_config_path, "Run config JSON")->required();
    eval->add_option("--snapshot", snapshot_path, "Policy snapshot to evaluate")->required();
    eval->add_option("--baseline", baseline_path, "Baseline snapshot for win rate");
    eval->add_flag("--score-only", score_only, "Skip judge calls, report rubric score only");

    // bench-graders
    auto* bench = app.add_subcommand("bench-graders", "AUC/cost Pareto report for graders");
    std::string records_path, registry_path;
    bench->add_option("--records", records_path, "Grader eval records (JSON lines)")->required();
    bench->add_option("--registry", registry_path, "Backend registry JSON")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "Dataset statistics table");
    std::string dataset_path;
    stats->add_option("--dataset", dataset_path, "Dataset JSON lines")->required();

    // verify-bound
    auto* verify = app.add_subcommand("verify-bound", "Check the gradient-gap bound numerically");
    int instance_count = 100;
    std::uint64_t verify_seed = 0;
    verify->add_option("--instances", instance_count, "Randomized instance count");
    verify->add_option("--seed", verify_seed, "Instance generator seed");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        return dispatch([&] {
            RunConfig config = load_run_config(train_config_path);
            if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
            if (!strategy_override.empty()) {
                config.strategy = reward_strategy_from_string(strategy_override);
            }
            if (!control_override.empty()) {
                if (control_override == "reference") {
                    config.elicitation.control = ControlVariant::reference;
                } else if (control_override == "previous_step") {
                    config.elicitation.control = ControlVariant::previous_step;
                } else {
                    throw ConfigError("unknown control variant: " + control_override);
                }
            }
            if (pairs_override >= 0) config.elicitation.pair_count = pairs_override;
            if (!out_override.empty()) config.out_dir = out_override;

            const TrainingLog log = run_train(config);
            std::cout << "trained " << log.steps.size() << " steps; logs in " << config.out_dir
                      << "\n";
            if (!log.evals.empty()) {
                std::cout << "final true expected reward: "
                          << log.evals.back().true_expected_reward << "\n";
            }
            return 0;
        });
    }
    if (eval->parsed()) {
        return dispatch([&] {
            if (!score_only && baseline_path.empty()) {
                throw ConfigError("--baseline is required unless --score-only is set");
            }
            const RunConfig config = load_run_config(eval_config_path);
            const nlohmann::json report =
                run_eval(config, snapshot_path, baseline_path, score_only);
            std::cout << report.dump(2) << "\n";
            return 0;
        });
    }
    if (bench->parsed()) {
        return dispatch([&] {
            const nlohmann::json report = run_bench_graders(records_path, registry_path);
            std::cout << report.dump(2) << "\n" << render_benchmark_table(report);
            return 0;
        });
    }
    if (stats->parsed()) {
        return dispatch([&] {
            std::cout << render_stats_table(run_stats(dataset_path));
            return 0;
        });
    }
    if (verify->parsed()) {
        return dispatch([&] {
            const nlohmann::json report = run_verify_bound(instance_count, verify_seed);
            std::cout << report.dump(2) << "\n";
            return report.at("all_hold").get<bool>() ? 0 : 3;
        });
    }
    return 1;
}
