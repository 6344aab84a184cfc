#pragma once

#include "mfnn/config.hpp"
#include "mfnn/optimize.hpp"
#include "mfnn/summary.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

namespace mfnn {

inline std::unique_ptr<FieldParam> make_field(const ExperimentConfig& cfg) {
    if (cfg.example == "kl_field") {
        KlBasis basis = kl_build_cached(cfg.kl_cache_file, cfg.grid_inversion, cfg.kl_modes,
                                        cfg.kl_corr_length, cfg.kl_sigma2);
        return std::make_unique<KlFieldParam>(std::move(basis));
    }
    return std::make_unique<RbfFieldParam>();
}

inline Vec read_truth_stream(std::istream& is, int dim) {
    std::vector<double> vals;
    std::string line;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        for (const auto& tok : split(trim(line), ' '))
            if (!trim(tok).empty()) vals.push_back(parse_double(trim(tok)));
    }
    if (static_cast<int>(vals.size()) != dim)
        throw IoError("truth file holds " + std::to_string(vals.size()) + " values, expected " +
                      std::to_string(dim));
    return Eigen::Map<Vec>(vals.data(), vals.size());
}

inline Vec read_truth_file(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open truth file '" + path + "'");
    return read_truth_stream(in, dim);
}

struct DataBundle {
    Observation obs;
    DataMeta meta;
    long evals_data = 0;  // fine-grid solves spent generating (0 when loaded)
    bool generated = false;
};

namespace detail {

inline std::filesystem::path data_path(const ExperimentConfig& cfg) {
    if (!cfg.data_file.empty()) return cfg.data_file;
    return std::filesystem::path(cfg.output_dir) / "data.csv";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
}

}  // namespace detail

// Loads the observation named by the config, or synthesizes it from the
// truth file on the finer data grid and persists both the CSV and its
// metadata sidecar.
inline DataBundle obtain_data(const ExperimentConfig& cfg, const FieldParam& field,
                              bool regenerate = false) {
    namespace fs = std::filesystem;
    fs::path path = detail::data_path(cfg);
    fs::path meta_path = path.string() + ".meta";
    DataBundle bundle;
    if (!regenerate && fs::exists(path)) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open data file '" + path.string() + "'");
        bundle.obs = read_observation_csv(in);
        std::ifstream min(meta_path);
        if (!min)
            throw IoError("data file '" + path.string() + "' has no metadata sidecar '" +
                          meta_path.string() + "'");
        bundle.meta = read_data_meta(min);
        require(bundle.meta.grid_inversion == cfg.grid_inversion,
                "data was generated for inversion grid M=" +
                    std::to_string(bundle.meta.grid_inversion) + ", config asks for M=" +
                    std::to_string(cfg.grid_inversion));
        bundle.obs.noise_sigma = Vec::Constant(bundle.obs.data.size(), bundle.meta.realized_sigma);
        bundle.obs.noise_level = bundle.meta.noise_mode == "relative" ? bundle.meta.delta : 0.0;
        return bundle;
    }

    require(!cfg.truth_file.empty(),
            "no data at '" + path.string() + "' and no truth_file to generate from");
    Vec z_true = read_truth_file(cfg.truth_file, cfg.dim());
    ForwardProblem fine(Grid(cfg.grid_data), field, default_sensor_grid());
    bundle.obs = generate_data(fine, cfg.grid_inversion, z_true, cfg.noise(), cfg.seed_noise);
    bundle.evals_data = fine.evals();
    bundle.generated = true;

    bundle.meta.seed = cfg.seed_noise;
    bundle.meta.noise_mode = cfg.noise_mode;
    bundle.meta.delta = cfg.noise_delta;
    bundle.meta.sigma_abs = cfg.noise_sigma_abs;
    bundle.meta.realized_sigma = bundle.obs.noise_sigma[0];
    bundle.meta.grid_data = cfg.grid_data;
    bundle.meta.grid_inversion = cfg.grid_inversion;
    bundle.meta.z_true = z_true;

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write data file '" + path.string() + "'");
    write_observation_csv(out, bundle.obs);
    std::ofstream mout(meta_path);
    if (!mout) throw IoError("cannot write metadata '" + meta_path.string() + "'");
    write_data_meta(mout, bundle.meta);
    return bundle;
}

// Picks the chain start: the origin, an explicit point, or the maximizer of
// the surrogate posterior seeded from the best offline training sample
// (costs no extra solver calls; the offline outputs are already in hand).
inline Vec choose_start(const ExperimentConfig& cfg, const Prior& prior, const Observation& obs,
                        const SurrogateModel& model, const OfflineBuild& offline) {
    if (cfg.z0_mode == "explicit") return cfg.z0;
    if (cfg.z0_mode == "zero") return Vec::Zero(prior.n);
    Eigen::Index best = 0;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < offline.inputs.rows(); ++i) {
        double lp = log_likelihood(obs, offline.outputs.row(i).transpose()) +
                    log_prior(prior, offline.inputs.row(i).transpose());
        if (lp > best_lp) {
            best_lp = lp;
            best = i;
        }
    }
    auto objective = [&](const Vec& z) {
        double lp = log_likelihood(obs, model.predict(z)) + log_prior(prior, z);
        return std::isfinite(lp) ? -lp : std::numeric_limits<double>::infinity();
    };
    return nelder_mead(objective, offline.inputs.row(best).transpose());
}

struct ExperimentResult {
    ChainStore store;
    SummaryFields summary;
    double rel_err = std::numeric_limits<double>::quiet_NaN();
    long evals_data = 0;
    long evals_offline = 0;
    long evals_online = 0;
    long refinements = 0;
    int final_depth = 0;
    std::uint64_t hash = 0;
    std::filesystem::path out_dir;
};

namespace detail {

inline std::string artifact_header(const ExperimentConfig& cfg, std::uint64_t hash) {
    std::ostringstream os;
    os << "# config_hash = " << hash << '\n';
    os << "# seed_noise = " << cfg.seed_noise << ", seed_offline = " << cfg.seed_offline
       << ", seed_train = " << cfg.seed_train << ", seed_chain = " << cfg.seed_chain << '\n';
    return os.str();
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);

    ExperimentResult result;
    result.hash = config_hash(cfg);
    result.out_dir = out_dir;

    auto field = make_field(cfg);
    Prior prior(cfg.dim());
    DataBundle data = obtain_data(cfg, *field);
    result.evals_data = data.evals_data;

    ForwardProblem problem(Grid(cfg.grid_inversion), *field, default_sensor_grid());
    ProposalSpec proposal = ProposalSpec::isotropic(prior.n, cfg.step_sigma);

    SurrogateModel model;
    OfflineBuild offline;
    const bool surrogate_based = cfg.method != "direct";
    if (surrogate_based) {
        offline = build_low_fidelity(problem, prior, cfg.n_offline, cfg.lf_arch, cfg.lf_train(),
                                     cfg.seed_offline);
        model = offline.model;
        result.evals_offline = problem.evals();
    }

    Vec z0 = choose_start(cfg, prior, data.obs, model, offline);
    require_shape(all_finite(z0), "chain start is not finite");

    long evals_at_chain_start = problem.evals();
    if (cfg.method == "direct") {
        HighFidelityEvaluator hf(problem);
        LogPosterior lp{prior, data.obs, hf};
        result.store = run_chain(lp, z0, cfg.chain_length, proposal, cfg.seed_chain);
    } else if (cfg.method == "dnn") {
        auto lp = [&](const Vec& z) {
            return log_likelihood(data.obs, model.predict(z)) + log_prior(prior, z);
        };
        result.store = run_chain(lp, z0, cfg.chain_length, proposal, cfg.seed_chain);
    } else {
        AdaptiveResult adaptive = adaptive_run(problem, data.obs, prior, std::move(model),
                                               proposal, cfg.adaptive(), z0);
        result.store = std::move(adaptive.store);
        model = std::move(adaptive.model);
        for (const auto& ev : result.store.events)
            if (ev.triggered) ++result.refinements;
    }
    result.evals_online = problem.evals() - evals_at_chain_start;
    result.final_depth = surrogate_based ? model.depth() : 0;

    Mat nodes = interior_nodes(cfg.grid_inversion);
    result.summary = summarize(result.store, cfg.burn_in, *field, nodes);

    Vec reference;
    if (cfg.reference == "stored") {
        std::ifstream rin(cfg.reference_file);
        if (!rin) throw IoError("cannot open reference field '" + cfg.reference_file + "'");
        reference = read_field_csv(rin);
        require_shape(reference.size() == nodes.rows(),
                      "stored reference field does not match the inversion grid");
    } else {
        Vec z_true;
        if (data.meta.z_true.size() > 0) z_true = data.meta.z_true;
        else if (!cfg.truth_file.empty()) z_true = read_truth_file(cfg.truth_file, cfg.dim());
        else throw ConfigError("reference=truth needs data metadata or truth_file");
        require_shape(z_true.size() == prior.n, "truth dimension mismatch");
        reference = field->kappa_at(z_true, nodes);
    }
    result.rel_err = rel_error(result.summary.kappa_mean, reference);

    // artifacts
    const std::string header = detail::artifact_header(cfg, result.hash);
    detail::write_file(out_dir / "config.txt", serialize_config(cfg));
    {
        std::ostringstream os;
        os << header;
        write_samples_csv(os, result.store);
        detail::write_file(out_dir / "samples.csv", os.str());
    }
    if (cfg.method == "adnn") {
        std::ostringstream os;
        os << header;
        write_refinements_csv(os, result.store);
        detail::write_file(out_dir / "refinements.csv", os.str());
    }
    if (surrogate_based) {
        std::ostringstream os;
        write_surrogate(os, model);
        detail::write_file(out_dir / "surrogate.txt", os.str());
    }
    auto write_field = [&](const std::string& name, const Vec& values) {
        std::ostringstream os;
        os << header;
        write_field_csv(os, values, cfg.grid_inversion);
        detail::write_file(out_dir / name, os.str());
    };
    write_field("kappa_mean.csv", result.summary.kappa_mean);
    write_field("kappa_std.csv", result.summary.kappa_std);
    if (cfg.example == "kl_field") {
        write_field("p_mean.csv", result.summary.p_mean);
        write_field("p_std.csv", result.summary.p_std);
    }
    {
        std::ostringstream os;
        os << "config_hash = " << result.hash << '\n';
        os << "example = " << cfg.example << '\n';
        os << "method = " << cfg.method << '\n';
        os << "seed_noise = " << cfg.seed_noise << '\n';
        os << "seed_offline = " << cfg.seed_offline << '\n';
        os << "seed_train = " << cfg.seed_train << '\n';
        os << "seed_chain = " << cfg.seed_chain << '\n';
        os << "evals_data = " << result.evals_data << '\n';
        os << "evals_offline = " << result.evals_offline << '\n';
        os << "evals_online = " << result.evals_online << '\n';
        os << "evals_total = " << (result.evals_offline + result.evals_online) << '\n';
        os << "refinements_triggered = " << result.refinements << '\n';
        os << "surrogate_depth_final = " << result.final_depth << '\n';
        os << "chain_samples = " << result.store.size() << '\n';
        os << "retained_samples = " << result.summary.retained << '\n';
        os << "acceptance_rate = " << str17(result.store.acceptance_rate()) << '\n';
        os << "rel_error = " << str17(result.rel_err) << '\n';
        detail::write_file(out_dir / "metrics.txt", os.str());
    }
    return result;
}

// The summarize verb: recompute posterior fields and the error metric from a
// previously written samples CSV.
inline ExperimentResult summarize_samples(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.samples_file.empty(), "summarize needs samples_file");
    namespace fs = std::filesystem;
    fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);

    ExperimentResult result;
    result.hash = config_hash(cfg);
    result.out_dir = out_dir;

    auto field = make_field(cfg);
    std::ifstream in(cfg.samples_file);
    if (!in) throw IoError("cannot open samples file '" + cfg.samples_file + "'");
    result.store = read_samples_csv(in);
    require_shape(result.store.samples.cols() == cfg.dim(),
                  "samples have " + std::to_string(result.store.samples.cols()) +
                      " coordinates, example needs " + std::to_string(cfg.dim()));

    Mat nodes = interior_nodes(cfg.grid_inversion);
    result.summary = summarize(result.store, cfg.burn_in, *field, nodes);

    Vec reference;
    bool have_reference = true;
    if (cfg.reference == "stored") {
        std::ifstream rin(cfg.reference_file);
        if (!rin) throw IoError("cannot open reference field '" + cfg.reference_file + "'");
        reference = read_field_csv(rin);
    } else if (!cfg.truth_file.empty()) {
        Vec z_true = read_truth_file(cfg.truth_file, cfg.dim());
        reference = field->kappa_at(z_true, nodes);
    } else {
        have_reference = false;
    }
    if (have_reference) result.rel_err = rel_error(result.summary.kappa_mean, reference);

    const std::string header = detail::artifact_header(cfg, result.hash);
    auto write_field = [&](const std::string& name, const Vec& values) {
        std::ostringstream os;
        os << header;
        write_field_csv(os, values, cfg.grid_inversion);
        detail::write_file(out_dir / name, os.str());
    };
    write_field("kappa_mean.csv", result.summary.kappa_mean);
    write_field("kappa_std.csv", result.summary.kappa_std);
    if (cfg.example == "kl_field") {
        write_field("p_mean.csv", result.summary.p_mean);
        write_field("p_std.csv", result.summary.p_std);
    }
    std::ostringstream os;
    os << "config_hash = " << result.hash << '\n';
    os << "retained_samples = " << result.summary.retained << '\n';
    os << "acceptance_rate = " << str17(result.store.acceptance_rate()) << '\n';
    if (have_reference) os << "rel_error = " << str17(result.rel_err) << '\n';
    detail::write_file(out_dir / "summary_metrics.txt", os.str());
    return result;
}

}  // namespace mfnn
