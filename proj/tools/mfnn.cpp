#include "mfnn/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

mfnn::ExperimentConfig load_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
    mfnn::ExperimentConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw mfnn::IoError("cannot open config file '" + config_path + "'");
        cfg = mfnn::parse_config(in);
    }
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw mfnn::ConfigError("--set expects key=value, got '" + kv + "'");
        mfnn::apply_config_entry(cfg, mfnn::trim(kv.substr(0, eq)), mfnn::trim(kv.substr(eq + 1)));
    }
    return cfg;
}

void cmd_generate_data(const mfnn::ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    auto field = mfnn::make_field(cfg);
    mfnn::DataBundle data = mfnn::obtain_data(cfg, *field, true);
    std::cout << "wrote " << data.obs.size() << " observations (noise sigma "
              << mfnn::str17(data.obs.noise_sigma[0]) << ", " << data.evals_data
              << " data-grid solves)\n";
}

void cmd_train_offline(const mfnn::ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    auto field = mfnn::make_field(cfg);
    mfnn::Prior prior(cfg.dim());
    mfnn::ForwardProblem problem(mfnn::Grid(cfg.grid_inversion), *field,
                                 mfnn::default_sensor_grid());
    mfnn::OfflineBuild build = mfnn::build_low_fidelity(
        problem, prior, cfg.n_offline, cfg.lf_arch, cfg.lf_train(), cfg.seed_offline);
    {
        std::ofstream out(out_dir / "surrogate_offline.txt");
        if (!out) throw mfnn::IoError("cannot write surrogate_offline.txt");
        mfnn::write_surrogate(out, build.model);
    }
    {
        std::ofstream out(out_dir / "lf_loss.csv");
        if (!out) throw mfnn::IoError("cannot write lf_loss.csv");
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < build.epoch_losses.size(); ++e)
            out << (e + 1) << ',' << mfnn::str17(build.epoch_losses[e]) << '\n';
    }
    std::cout << "trained low-fidelity surrogate on " << cfg.n_offline << " samples ("
              << problem.evals() << " solves); final loss "
              << mfnn::str17(build.epoch_losses.back()) << '\n';
}

void cmd_run(const mfnn::ExperimentConfig& cfg) {
    mfnn::ExperimentResult result = mfnn::run_experiment(cfg);
    std::cout << "method = " << cfg.method << '\n'
              << "chain_samples = " << result.store.size() << '\n'
              << "acceptance_rate = " << result.store.acceptance_rate() << '\n'
              << "evals_offline = " << result.evals_offline << '\n'
              << "evals_online = " << result.evals_online << '\n'
              << "refinements_triggered = " << result.refinements << '\n'
              << "rel_error = " << result.rel_err << '\n'
              << "artifacts in " << result.out_dir.string() << '\n';
}

void cmd_summarize(const mfnn::ExperimentConfig& cfg) {
    mfnn::ExperimentResult result = mfnn::summarize_samples(cfg);
    std::cout << "retained_samples = " << result.summary.retained << '\n';
    if (std::isfinite(result.rel_err)) std::cout << "rel_error = " << result.rel_err << '\n';
    std::cout << "fields in " << result.out_dir.string() << '\n';
}

void cmd_kl_cache(mfnn::ExperimentConfig cfg) {
    if (cfg.kl_cache_file.empty())
        cfg.kl_cache_file = (std::filesystem::path(cfg.output_dir) / "kl_basis.txt").string();
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    mfnn::KlBasis basis = mfnn::kl_build(cfg.grid_inversion, cfg.kl_modes, cfg.kl_corr_length,
                                         cfg.kl_sigma2);
    std::ofstream out(cfg.kl_cache_file);
    if (!out) throw mfnn::IoError("cannot write kl cache '" + cfg.kl_cache_file + "'");
    mfnn::write_kl_cache(out, basis);
    double trace = basis.all_eigenvalues.sum();
    std::cout << "cached " << cfg.kl_modes << " modes at M=" << cfg.grid_inversion << " (trace "
              << mfnn::str17(trace) << ", retained "
              << mfnn::str17(basis.lambda.sum() / trace * 100.0) << "% of variance) to "
              << cfg.kl_cache_file << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive multifidelity surrogate MCMC for elliptic Bayesian inversion"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string method;
    std::string verb;
    const std::pair<const char*, const char*> verbs[] = {
        {"generate-data", "synthesize noisy observations from a stored truth"},
        {"train-offline", "fit the prior-sample surrogate and save it"},
        {"run", "run a full inversion experiment and write artifacts"},
        {"summarize", "posterior field statistics from a stored chain"},
        {"kl-cache", "precompute and cache the log-permeability eigenbasis"},
    };
    for (const auto& [name, help] : verbs) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config file");
        sub->add_option("--set", overrides, "override a config key (key=value, repeatable)");
        if (std::string(name) == "run")
            sub->add_option("--method", method, "direct | dnn | adnn");
        sub->callback([&verb, name = name]() { verb = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        mfnn::ExperimentConfig cfg = load_config(config_path, overrides);
        if (!method.empty()) cfg.method = method;
        if (verb == "generate-data") cmd_generate_data(cfg);
        else if (verb == "train-offline") cmd_train_offline(cfg);
        else if (verb == "run") cmd_run(cfg);
        else if (verb == "summarize") cmd_summarize(cfg);
        else cmd_kl_cache(cfg);
    } catch (const mfnn::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const mfnn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mfnn::ShapeError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mfnn::IoError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
