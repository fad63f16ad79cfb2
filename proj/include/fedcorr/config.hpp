#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcorr/common.hpp"
#include "fedcorr/rng.hpp"

namespace fedcorr {

struct DatasetSpec {
    std::string type = "blobs"; // blobs | csv
    // blobs
    std::size_t n_samples = 4000;
    std::size_t n_test = 2000;
    int n_classes = 5;
    std::size_t dim = 20;
    double cluster_std = 1.0;
    double center_scale = 10.0;
    // csv
    std::string csv_path;
    double test_fraction = 0.2;
};

struct FederationSpec {
    std::size_t n_clients = 20;
    double fraction = 0.1; // gamma
    std::string partition = "iid"; // iid | noniid
    double bernoulli_p = 0.7;
    double dirichlet_alpha = 10.0;
};

struct NoiseSpec {
    double rho = 0.0;
    double tau = 0.0;
};

struct ModelSpec {
    std::string type = "mlp"; // softmax | mlp
    std::size_t hidden = 64;
};

struct TrainingSpec {
    double learning_rate = 0.025;
    int epochs = 5;
    int batch_size = 10;
    double momentum = 0.5;
};

struct FedCorrSpec {
    int t1 = 5;
    int t2 = 50;
    int t3 = 50;
    double theta = 0.5;
    double pi = 0.5;
    double kappa = 0.1;
    double beta = 5.0;
    double mixup_alpha = 1.0;
    std::size_t lid_k = 20;
};

struct AblationFlags {
    bool no_correction = false;
    bool no_fraction_scheduling = false;
    bool no_proximal = false;
    bool no_finetuning = false;
    bool no_usual_training = false;
    bool no_mixup = false;
};

struct ExperimentConfig {
    std::string mode = "fedcorr"; // fedcorr | fedavg
    std::uint64_t seed = 1;
    std::string output_dir = "fedcorr_out";
    DatasetSpec dataset;
    FederationSpec federation;
    NoiseSpec noise;
    ModelSpec model;
    TrainingSpec training;
    FedCorrSpec fedcorr;
    long long fedavg_rounds = 0; // 0 = match the fedcorr communication cost
    AblationFlags ablation;
    bool stage1_parallel_aggregation = false; // experimental, no acceptance guarantees

    void validate() const;
    nlohmann::json to_json() const;
    std::string config_hash() const;
};

namespace detail {

class StrictReader {
public:
    StrictReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("config: " + (path_.empty() ? std::string("<root>") : path_) +
                              " must be an object");
    }

    ~StrictReader() = default;

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: bad value type for \"" + join(key) + "\"");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json* child(const char* key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void reject_unknown() const
    {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                throw ConfigError("config: unknown key \"" + join(item.key()) + "\"");
    }

    std::string join(const std::string& key) const
    {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok)
        throw ConfigError("config: \"" + key + "\" " + what);
}

} // namespace detail

inline void ExperimentConfig::validate() const
{
    using detail::require;
    require(mode == "fedcorr" || mode == "fedavg", "mode", "must be \"fedcorr\" or \"fedavg\"");
    require(dataset.type == "blobs" || dataset.type == "csv", "dataset.type",
            "must be \"blobs\" or \"csv\"");
    if (dataset.type == "blobs") {
        require(dataset.n_classes >= 2, "dataset.n_classes", "must be >= 2");
        require(dataset.n_samples >= static_cast<std::size_t>(dataset.n_classes),
                "dataset.n_samples", "must be >= n_classes");
        require(dataset.n_test >= 1, "dataset.n_test", "must be >= 1");
        require(dataset.dim >= 1, "dataset.dim", "must be >= 1");
        require(dataset.cluster_std >= 0.0, "dataset.cluster_std", "must be >= 0");
        require(dataset.center_scale > 0.0, "dataset.center_scale", "must be > 0");
    } else {
        require(!dataset.csv_path.empty(), "dataset.csv_path", "required for csv datasets");
        require(dataset.n_classes >= 2, "dataset.n_classes", "must be >= 2");
        require(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0,
                "dataset.test_fraction", "must be in (0, 1)");
    }
    require(federation.n_clients >= 1, "federation.n_clients", "must be >= 1");
    require(federation.fraction > 0.0 && federation.fraction <= 1.0, "federation.fraction",
            "must be in (0, 1]");
    require(federation.partition == "iid" || federation.partition == "noniid",
            "federation.partition", "must be \"iid\" or \"noniid\"");
    require(federation.bernoulli_p > 0.0 && federation.bernoulli_p <= 1.0,
            "federation.bernoulli_p", "must be in (0, 1]");
    require(federation.dirichlet_alpha > 0.0, "federation.dirichlet_alpha", "must be > 0");
    require(noise.rho >= 0.0 && noise.rho <= 1.0, "noise.rho", "must be in [0, 1]");
    require(noise.tau >= 0.0 && noise.tau < 1.0, "noise.tau", "must be in [0, 1)");
    require(model.type == "softmax" || model.type == "mlp", "model.type",
            "must be \"softmax\" or \"mlp\"");
    require(model.hidden >= 1, "model.hidden", "must be >= 1");
    require(training.learning_rate > 0.0, "training.learning_rate", "must be > 0");
    require(training.epochs >= 0, "training.epochs", "must be >= 0");
    require(training.batch_size >= 1, "training.batch_size", "must be >= 1");
    require(training.momentum >= 0.0 && training.momentum < 1.0, "training.momentum",
            "must be in [0, 1)");
    require(fedcorr.t1 >= 0, "fedcorr.t1", "must be >= 0");
    require(fedcorr.t2 >= 0, "fedcorr.t2", "must be >= 0");
    require(fedcorr.t3 >= 0, "fedcorr.t3", "must be >= 0");
    require(fedcorr.theta >= 0.0 && fedcorr.theta <= 1.0, "fedcorr.theta", "must be in [0, 1]");
    require(fedcorr.pi >= 0.0 && fedcorr.pi <= 1.0, "fedcorr.pi", "must be in [0, 1]");
    require(fedcorr.kappa >= 0.0 && fedcorr.kappa <= 1.0, "fedcorr.kappa", "must be in [0, 1]");
    require(fedcorr.beta >= 0.0, "fedcorr.beta", "must be >= 0");
    require(fedcorr.mixup_alpha >= 0.0, "fedcorr.mixup_alpha", "must be >= 0");
    require(fedcorr.lid_k >= 1, "fedcorr.lid_k", "must be >= 1");
    require(fedavg_rounds >= 0, "fedavg.rounds", "must be >= 0");
}

inline nlohmann::json ExperimentConfig::to_json() const
{
    nlohmann::json j;
    j["mode"] = mode;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["dataset"] = {
        {"type", dataset.type},
        {"n_samples", dataset.n_samples},
        {"n_test", dataset.n_test},
        {"n_classes", dataset.n_classes},
        {"dim", dataset.dim},
        {"cluster_std", dataset.cluster_std},
        {"center_scale", dataset.center_scale},
        {"csv_path", dataset.csv_path},
        {"test_fraction", dataset.test_fraction},
    };
    j["federation"] = {
        {"n_clients", federation.n_clients},
        {"fraction", federation.fraction},
        {"partition", federation.partition},
        {"bernoulli_p", federation.bernoulli_p},
        {"dirichlet_alpha", federation.dirichlet_alpha},
    };
    j["noise"] = {{"rho", noise.rho}, {"tau", noise.tau}};
    j["model"] = {{"type", model.type}, {"hidden", model.hidden}};
    j["training"] = {
        {"learning_rate", training.learning_rate},
        {"epochs", training.epochs},
        {"batch_size", training.batch_size},
        {"momentum", training.momentum},
    };
    j["fedcorr"] = {
        {"t1", fedcorr.t1},       {"t2", fedcorr.t2},
        {"t3", fedcorr.t3},       {"theta", fedcorr.theta},
        {"pi", fedcorr.pi},       {"kappa", fedcorr.kappa},
        {"beta", fedcorr.beta},   {"mixup_alpha", fedcorr.mixup_alpha},
        {"lid_k", fedcorr.lid_k},
    };
    j["fedavg"] = {{"rounds", fedavg_rounds}};
    j["ablation"] = {
        {"no_correction", ablation.no_correction},
        {"no_fraction_scheduling", ablation.no_fraction_scheduling},
        {"no_proximal", ablation.no_proximal},
        {"no_finetuning", ablation.no_finetuning},
        {"no_usual_training", ablation.no_usual_training},
        {"no_mixup", ablation.no_mixup},
    };
    j["experimental"] = {{"stage1_parallel_aggregation", stage1_parallel_aggregation}};
    return j;
}

// Hash of the semantic configuration. output_dir is excluded so the same
// experiment written to two places is recognizably the same run.
inline std::string ExperimentConfig::config_hash() const
{
    nlohmann::json j = to_json();
    j.erase("output_dir");
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

inline ExperimentConfig config_from_json(const nlohmann::json& root)
{
    ExperimentConfig cfg;
    detail::StrictReader r(root, "");
    r.get("mode", cfg.mode);
    r.get("seed", cfg.seed);
    r.get("output_dir", cfg.output_dir);
    std::string ignored_hash; // emitted resolved configs carry their own hash
    r.get("config_hash", ignored_hash);
    if (const auto* d = r.child("dataset")) {
        detail::StrictReader rd(*d, "dataset");
        rd.get("type", cfg.dataset.type);
        rd.get("n_samples", cfg.dataset.n_samples);
        rd.get("n_test", cfg.dataset.n_test);
        rd.get("n_classes", cfg.dataset.n_classes);
        rd.get("dim", cfg.dataset.dim);
        rd.get("cluster_std", cfg.dataset.cluster_std);
        rd.get("center_scale", cfg.dataset.center_scale);
        rd.get("csv_path", cfg.dataset.csv_path);
        rd.get("test_fraction", cfg.dataset.test_fraction);
        rd.reject_unknown();
    }
    if (const auto* f = r.child("federation")) {
        detail::StrictReader rf(*f, "federation");
        rf.get("n_clients", cfg.federation.n_clients);
        rf.get("fraction", cfg.federation.fraction);
        rf.get("partition", cfg.federation.partition);
        rf.get("bernoulli_p", cfg.federation.bernoulli_p);
        rf.get("dirichlet_alpha", cfg.federation.dirichlet_alpha);
        rf.reject_unknown();
    }
    if (const auto* n = r.child("noise")) {
        detail::StrictReader rn(*n, "noise");
        rn.get("rho", cfg.noise.rho);
        rn.get("tau", cfg.noise.tau);
        rn.reject_unknown();
    }
    if (const auto* m = r.child("model")) {
        detail::StrictReader rm(*m, "model");
        rm.get("type", cfg.model.type);
        rm.get("hidden", cfg.model.hidden);
        rm.reject_unknown();
    }
    if (const auto* t = r.child("training")) {
        detail::StrictReader rt(*t, "training");
        rt.get("learning_rate", cfg.training.learning_rate);
        rt.get("epochs", cfg.training.epochs);
        rt.get("batch_size", cfg.training.batch_size);
        rt.get("momentum", cfg.training.momentum);
        rt.reject_unknown();
    }
    if (const auto* fc = r.child("fedcorr")) {
        detail::StrictReader rc(*fc, "fedcorr");
        rc.get("t1", cfg.fedcorr.t1);
        rc.get("t2", cfg.fedcorr.t2);
        rc.get("t3", cfg.fedcorr.t3);
        rc.get("theta", cfg.fedcorr.theta);
        rc.get("pi", cfg.fedcorr.pi);
        rc.get("kappa", cfg.fedcorr.kappa);
        rc.get("beta", cfg.fedcorr.beta);
        rc.get("mixup_alpha", cfg.fedcorr.mixup_alpha);
        rc.get("lid_k", cfg.fedcorr.lid_k);
        rc.reject_unknown();
    }
    if (const auto* fa = r.child("fedavg")) {
        detail::StrictReader ra(*fa, "fedavg");
        ra.get("rounds", cfg.fedavg_rounds);
        ra.reject_unknown();
    }
    if (const auto* ab = r.child("ablation")) {
        detail::StrictReader rb(*ab, "ablation");
        rb.get("no_correction", cfg.ablation.no_correction);
        rb.get("no_fraction_scheduling", cfg.ablation.no_fraction_scheduling);
        rb.get("no_proximal", cfg.ablation.no_proximal);
        rb.get("no_finetuning", cfg.ablation.no_finetuning);
        rb.get("no_usual_training", cfg.ablation.no_usual_training);
        rb.get("no_mixup", cfg.ablation.no_mixup);
        rb.reject_unknown();
    }
    if (const auto* ex = r.child("experimental")) {
        detail::StrictReader re(*ex, "experimental");
        re.get("stage1_parallel_aggregation", cfg.stage1_parallel_aggregation);
        re.reject_unknown();
    }
    r.reject_unknown();
    cfg.validate();
    return cfg;
}

// Loads a JSON config file. A file containing only whitespace yields the full
// default configuration.
inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(root);
}

} // namespace fedcorr
