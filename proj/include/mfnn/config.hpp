#pragma once

#include "mfnn/mcmc.hpp"

#include <map>
#include <sstream>

namespace mfnn {

// Flat experiment description: one key = value per line, # comments,
// comma-separated lists. Serialization is canonical so equal configs
// serialize to identical bytes and hash identically.
struct ExperimentConfig {
    std::string example = "rbf9";  // rbf9 | rbf9_prior_truth | kl_field
    std::string method = "adnn";   // direct | dnn | adnn

    int grid_data = 63;
    int grid_inversion = 31;

    std::string noise_mode = "relative";  // relative | absolute
    double noise_delta = 0.05;
    double noise_sigma_abs = 0.05;

    int n_offline = 50;
    std::vector<int> lf_arch = {40, 40, 40, 40};
    int lf_epochs = 5000;
    std::vector<int> head_arch = {50};
    int head_epochs = 2000;
    double learning_rate = 1e-3;
    double regularization = 0.0;
    int batch_size = 32;

    int subchain_length = 1000;
    int max_corrections = 50;
    double tol = 0.1;
    double radius = 0.2;
    int q_local = 10;

    double step_sigma = 0.1;
    long chain_length = 50000;  // direct and dnn total steps
    double burn_in = 0.4;

    std::string z0_mode = "zero";  // zero | map | explicit
    Vec z0;

    int kl_modes = 20;
    double kl_corr_length = 0.1;
    double kl_sigma2 = 1.0;
    std::string kl_cache_file;

    std::uint64_t seed_noise = 1;
    std::uint64_t seed_offline = 2;
    std::uint64_t seed_train = 3;
    std::uint64_t seed_chain = 4;

    std::string truth_file;
    std::string data_file;
    std::string samples_file;
    std::string output_dir = "out";

    std::string reference = "truth";  // truth | stored
    std::string reference_file;

    bool refit_head_only = false;
    bool pool_local_data = false;
    bool indicator_ratio_flipped = false;

    int dim() const { return example == "kl_field" ? kl_modes : 9; }

    void validate() const {
        require(example == "rbf9" || example == "rbf9_prior_truth" || example == "kl_field",
                "example must be rbf9, rbf9_prior_truth, or kl_field; got '" + example + "'");
        require(method == "direct" || method == "dnn" || method == "adnn",
                "method must be direct, dnn, or adnn; got '" + method + "'");
        require(grid_data >= 3, "grid_data must be >= 3");
        require(grid_inversion >= 3, "grid_inversion must be >= 3");
        require(grid_data != grid_inversion,
                "grid_data must differ from grid_inversion (inverse crime)");
        require(noise_mode == "relative" || noise_mode == "absolute",
                "noise_mode must be relative or absolute; got '" + noise_mode + "'");
        require(noise_delta >= 0, "noise_delta must be nonnegative");
        require(noise_sigma_abs > 0, "noise_sigma_abs must be positive");
        require(n_offline >= 2, "n_offline must be >= 2");
        require(!lf_arch.empty(), "lf_arch must list at least one hidden width");
        for (int w : lf_arch) require(w >= 1, "lf_arch widths must be positive");
        require(!head_arch.empty(), "head_arch must list at least one hidden width");
        for (int w : head_arch) require(w >= 1, "head_arch widths must be positive");
        require(lf_epochs >= 1, "lf_epochs must be >= 1");
        require(head_epochs >= 1, "head_epochs must be >= 1");
        require(learning_rate > 0, "learning_rate must be positive");
        require(regularization >= 0, "regularization must be nonnegative");
        require(batch_size >= 1, "batch_size must be >= 1");
        require(subchain_length >= 2, "subchain_length must be >= 2");
        require(max_corrections >= 1, "max_corrections must be >= 1");
        require(tol > 0, "tol must be positive");
        require(radius > 0, "radius must be positive");
        require(q_local >= 2, "q_local must be >= 2");
        require(step_sigma > 0, "step_sigma must be positive");
        require(chain_length >= 1, "chain_length must be >= 1");
        require(burn_in >= 0 && burn_in < 1, "burn_in must lie in [0,1)");
        require(z0_mode == "zero" || z0_mode == "map" || z0_mode == "explicit",
                "z0_mode must be zero, map, or explicit; got '" + z0_mode + "'");
        if (z0_mode == "explicit")
            require(z0.size() == dim(), "z0 needs " + std::to_string(dim()) +
                                            " components for this example; got " +
                                            std::to_string(z0.size()));
        if (z0_mode == "map")
            require(method != "direct", "z0_mode=map needs a surrogate; use method dnn or adnn");
        require(kl_modes >= 1 && kl_modes <= grid_inversion * grid_inversion,
                "kl_modes must lie in [1, grid_inversion^2]");
        require(kl_corr_length > 0, "kl_corr_length must be positive");
        require(kl_sigma2 > 0, "kl_sigma2 must be positive");
        require(reference == "truth" || reference == "stored",
                "reference must be truth or stored; got '" + reference + "'");
        if (reference == "stored")
            require(!reference_file.empty(), "reference=stored needs reference_file");
    }

    AdaptiveConfig adaptive() const {
        AdaptiveConfig cfg;
        cfg.subchain_length = subchain_length;
        cfg.max_corrections = max_corrections;
        cfg.tol = tol;
        cfg.radius = radius;
        cfg.q_local = q_local;
        cfg.head_arch = head_arch;
        cfg.train = head_train();
        cfg.rng_seed = seed_chain;
        cfg.refine_opts.refit_head_only = refit_head_only;
        cfg.refine_opts.pool_local_data = pool_local_data;
        cfg.indicator_ratio_flipped = indicator_ratio_flipped;
        return cfg;
    }

    TrainConfig lf_train() const {
        TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.regularization = regularization;
        cfg.batch_size = batch_size;
        cfg.epochs = lf_epochs;
        cfg.rng_seed = seed_train;
        return cfg;
    }

    TrainConfig head_train() const {
        TrainConfig cfg = lf_train();
        cfg.epochs = head_epochs;
        return cfg;
    }

    NoiseSpec noise() const {
        NoiseSpec spec;
        spec.mode = noise_mode == "absolute" ? NoiseSpec::Mode::Absolute : NoiseSpec::Mode::Relative;
        spec.delta = noise_delta;
        spec.sigma_abs = noise_sigma_abs;
        return spec;
    }
};

// Per-example presets; everything else keeps the struct defaults.
inline ExperimentConfig defaults_for(const std::string& example) {
    ExperimentConfig cfg;
    cfg.example = example;
    if (example == "rbf9" || example == "rbf9_prior_truth") return cfg;
    if (example == "kl_field") {
        cfg.lf_arch = {150, 150, 150};
        cfg.head_arch = {150};
        cfg.regularization = 1e-6;
        cfg.n_offline = 100;
        cfg.q_local = 50;
        cfg.noise_mode = "absolute";
        return cfg;
    }
    throw ConfigError("unknown example '" + example + "'");
}

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

inline std::string join_doubles(const Vec& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += str17(v[i]);
    }
    return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    for (const auto& tok : split(s, ',')) {
        auto t = trim(tok);
        if (t.empty()) continue;
        long v = parse_long(t);
        if (v < 1 || v > 1000000) throw ConfigError(key + " entry out of range: " + t);
        out.push_back(static_cast<int>(v));
    }
    return out;
}

inline Vec parse_double_list(const std::string& s) {
    std::vector<double> vals;
    for (const auto& tok : split(s, ',')) {
        auto t = trim(tok);
        if (!t.empty()) vals.push_back(parse_double(t));
    }
    Vec out(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) out[static_cast<Eigen::Index>(i)] = vals[i];
    return out;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key + " must be true or false; got '" + s + "'");
}

inline std::uint64_t parse_seed(const std::string& s, const std::string& key) {
    // stoull accepts a leading minus and wraps, so screen for it first
    if (s.empty() || s.find('-') != std::string::npos)
        throw ConfigError(key + " must be a nonnegative integer; got '" + s + "'");
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + " must be a nonnegative integer; got '" + s + "'");
    }
}

}  // namespace detail

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double_list;
    using detail::parse_int_list;
    using detail::parse_seed;
    if (key == "example") cfg.example = value;
    else if (key == "method") cfg.method = value;
    else if (key == "grid_data") cfg.grid_data = static_cast<int>(parse_long(value));
    else if (key == "grid_inversion") cfg.grid_inversion = static_cast<int>(parse_long(value));
    else if (key == "noise_mode") cfg.noise_mode = value;
    else if (key == "noise_delta") cfg.noise_delta = parse_double(value);
    else if (key == "noise_sigma_abs") cfg.noise_sigma_abs = parse_double(value);
    else if (key == "n_offline") cfg.n_offline = static_cast<int>(parse_long(value));
    else if (key == "lf_arch") cfg.lf_arch = parse_int_list(value, key);
    else if (key == "lf_epochs") cfg.lf_epochs = static_cast<int>(parse_long(value));
    else if (key == "head_arch") cfg.head_arch = parse_int_list(value, key);
    else if (key == "head_epochs") cfg.head_epochs = static_cast<int>(parse_long(value));
    else if (key == "learning_rate") cfg.learning_rate = parse_double(value);
    else if (key == "regularization") cfg.regularization = parse_double(value);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_long(value));
    else if (key == "subchain_length") cfg.subchain_length = static_cast<int>(parse_long(value));
    else if (key == "max_corrections") cfg.max_corrections = static_cast<int>(parse_long(value));
    else if (key == "tol") cfg.tol = parse_double(value);
    else if (key == "radius") cfg.radius = parse_double(value);
    else if (key == "q_local") cfg.q_local = static_cast<int>(parse_long(value));
    else if (key == "step_sigma") cfg.step_sigma = parse_double(value);
    else if (key == "chain_length") cfg.chain_length = parse_long(value);
    else if (key == "burn_in") cfg.burn_in = parse_double(value);
    else if (key == "z0_mode") cfg.z0_mode = value;
    else if (key == "z0") cfg.z0 = parse_double_list(value);
    else if (key == "kl_modes") cfg.kl_modes = static_cast<int>(parse_long(value));
    else if (key == "kl_corr_length") cfg.kl_corr_length = parse_double(value);
    else if (key == "kl_sigma2") cfg.kl_sigma2 = parse_double(value);
    else if (key == "kl_cache_file") cfg.kl_cache_file = value;
    else if (key == "seed_noise") cfg.seed_noise = parse_seed(value, key);
    else if (key == "seed_offline") cfg.seed_offline = parse_seed(value, key);
    else if (key == "seed_train") cfg.seed_train = parse_seed(value, key);
    else if (key == "seed_chain") cfg.seed_chain = parse_seed(value, key);
    else if (key == "truth_file") cfg.truth_file = value;
    else if (key == "data_file") cfg.data_file = value;
    else if (key == "samples_file") cfg.samples_file = value;
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "reference") cfg.reference = value;
    else if (key == "reference_file") cfg.reference_file = value;
    else if (key == "refit_head_only") cfg.refit_head_only = parse_bool(value, key);
    else if (key == "pool_local_data") cfg.pool_local_data = parse_bool(value, key);
    else if (key == "indicator_ratio_flipped") cfg.indicator_ratio_flipped = parse_bool(value, key);
    else throw ConfigError("unknown config key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& is) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not key = value: '" + line + "'");
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    std::string example = "rbf9";
    for (const auto& [k, v] : entries)
        if (k == "example") example = v;
    ExperimentConfig cfg = defaults_for(example);
    for (const auto& [k, v] : entries) apply_config_entry(cfg, k, v);
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "example = " << cfg.example << '\n';
    os << "method = " << cfg.method << '\n';
    os << "grid_data = " << cfg.grid_data << '\n';
    os << "grid_inversion = " << cfg.grid_inversion << '\n';
    os << "noise_mode = " << cfg.noise_mode << '\n';
    os << "noise_delta = " << str17(cfg.noise_delta) << '\n';
    os << "noise_sigma_abs = " << str17(cfg.noise_sigma_abs) << '\n';
    os << "n_offline = " << cfg.n_offline << '\n';
    os << "lf_arch = " << detail::join_ints(cfg.lf_arch) << '\n';
    os << "lf_epochs = " << cfg.lf_epochs << '\n';
    os << "head_arch = " << detail::join_ints(cfg.head_arch) << '\n';
    os << "head_epochs = " << cfg.head_epochs << '\n';
    os << "learning_rate = " << str17(cfg.learning_rate) << '\n';
    os << "regularization = " << str17(cfg.regularization) << '\n';
    os << "batch_size = " << cfg.batch_size << '\n';
    os << "subchain_length = " << cfg.subchain_length << '\n';
    os << "max_corrections = " << cfg.max_corrections << '\n';
    os << "tol = " << str17(cfg.tol) << '\n';
    os << "radius = " << str17(cfg.radius) << '\n';
    os << "q_local = " << cfg.q_local << '\n';
    os << "step_sigma = " << str17(cfg.step_sigma) << '\n';
    os << "chain_length = " << cfg.chain_length << '\n';
    os << "burn_in = " << str17(cfg.burn_in) << '\n';
    os << "z0_mode = " << cfg.z0_mode << '\n';
    os << "z0 = " << detail::join_doubles(cfg.z0) << '\n';
    os << "kl_modes = " << cfg.kl_modes << '\n';
    os << "kl_corr_length = " << str17(cfg.kl_corr_length) << '\n';
    os << "kl_sigma2 = " << str17(cfg.kl_sigma2) << '\n';
    os << "kl_cache_file = " << cfg.kl_cache_file << '\n';
    os << "seed_noise = " << cfg.seed_noise << '\n';
    os << "seed_offline = " << cfg.seed_offline << '\n';
    os << "seed_train = " << cfg.seed_train << '\n';
    os << "seed_chain = " << cfg.seed_chain << '\n';
    os << "truth_file = " << cfg.truth_file << '\n';
    os << "data_file = " << cfg.data_file << '\n';
    os << "samples_file = " << cfg.samples_file << '\n';
    os << "output_dir = " << cfg.output_dir << '\n';
    os << "reference = " << cfg.reference << '\n';
    os << "reference_file = " << cfg.reference_file << '\n';
    os << "refit_head_only = " << (cfg.refit_head_only ? "true" : "false") << '\n';
    os << "pool_local_data = " << (cfg.pool_local_data ? "true" : "false") << '\n';
    os << "indicator_ratio_flipped = " << (cfg.indicator_ratio_flipped ? "true" : "false") << '\n';
    return os.str();
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a64(serialize_config(cfg));
}

}  // namespace mfnn
