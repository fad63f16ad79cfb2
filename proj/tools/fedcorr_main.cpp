// Command-line entry point: run experiments, validate configs, export
// generated datasets.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedcorr/config.hpp"
#include "fedcorr/csv.hpp"
#include "fedcorr/datagen.hpp"
#include "fedcorr/experiment.hpp"

namespace {

struct Overrides {
    CLI::App* cmd = nullptr;

    std::string mode, output_dir, partition, model_type, dataset_type, csv_path;
    std::uint64_t seed = 0;
    std::size_t n_clients = 0, hidden = 0, n_samples = 0, n_test = 0, dim = 0, lid_k = 0;
    int n_classes = 0, t1 = 0, t2 = 0, t3 = 0, epochs = 0, batch_size = 0;
    long long fedavg_rounds = 0;
    double fraction = 0, bernoulli_p = 0, dirichlet_alpha = 0, rho = 0, tau = 0;
    double cluster_std = 0, center_scale = 0, test_fraction = 0;
    double learning_rate = 0, momentum = 0, theta = 0, pi = 0, kappa = 0, beta = 0, mixup_alpha = 0;
    bool no_correction = false, no_fraction_scheduling = false, no_proximal = false;
    bool no_finetuning = false, no_usual_training = false, no_mixup = false;
    bool stage1_parallel = false;

    void add_to(CLI::App& app)
    {
        cmd = &app;
        app.add_option("--mode", mode, "fedcorr | fedavg");
        app.add_option("--seed", seed, "master seed");
        app.add_option("--output-dir", output_dir, "result directory");
        app.add_option("--dataset-type", dataset_type, "blobs | csv");
        app.add_option("--n-samples", n_samples);
        app.add_option("--n-test", n_test);
        app.add_option("--n-classes", n_classes);
        app.add_option("--dim", dim);
        app.add_option("--cluster-std", cluster_std);
        app.add_option("--center-scale", center_scale);
        app.add_option("--csv-path", csv_path);
        app.add_option("--test-fraction", test_fraction);
        app.add_option("--n-clients", n_clients);
        app.add_option("--fraction", fraction, "per-round client fraction");
        app.add_option("--partition", partition, "iid | noniid");
        app.add_option("--bernoulli-p", bernoulli_p);
        app.add_option("--dirichlet-alpha", dirichlet_alpha);
        app.add_option("--rho", rho, "ratio of noisy clients");
        app.add_option("--tau", tau, "noise-level lower bound");
        app.add_option("--model", model_type, "softmax | mlp");
        app.add_option("--hidden", hidden, "mlp hidden width");
        app.add_option("--learning-rate", learning_rate);
        app.add_option("--epochs", epochs);
        app.add_option("--batch-size", batch_size);
        app.add_option("--momentum", momentum);
        app.add_option("--t1", t1);
        app.add_option("--t2", t2);
        app.add_option("--t3", t3);
        app.add_option("--theta", theta);
        app.add_option("--pi", pi);
        app.add_option("--kappa", kappa);
        app.add_option("--beta", beta);
        app.add_option("--mixup-alpha", mixup_alpha);
        app.add_option("--lid-k", lid_k);
        app.add_option("--rounds", fedavg_rounds, "fedavg rounds (0 = match fedcorr cost)");
        app.add_flag("--no-correction", no_correction);
        app.add_flag("--no-fraction-scheduling", no_fraction_scheduling);
        app.add_flag("--no-proximal", no_proximal);
        app.add_flag("--no-finetuning", no_finetuning);
        app.add_flag("--no-usual-training", no_usual_training);
        app.add_flag("--no-mixup", no_mixup);
        app.add_flag("--stage1-parallel-aggregation", stage1_parallel);
    }

    bool given(const std::string& name) const { return cmd->count(name) > 0; }

    void apply(fedcorr::ExperimentConfig& cfg) const
    {
        if (given("--mode")) cfg.mode = mode;
        if (given("--seed")) cfg.seed = seed;
        if (given("--output-dir")) cfg.output_dir = output_dir;
        if (given("--dataset-type")) cfg.dataset.type = dataset_type;
        if (given("--n-samples")) cfg.dataset.n_samples = n_samples;
        if (given("--n-test")) cfg.dataset.n_test = n_test;
        if (given("--n-classes")) cfg.dataset.n_classes = n_classes;
        if (given("--dim")) cfg.dataset.dim = dim;
        if (given("--cluster-std")) cfg.dataset.cluster_std = cluster_std;
        if (given("--center-scale")) cfg.dataset.center_scale = center_scale;
        if (given("--csv-path")) cfg.dataset.csv_path = csv_path;
        if (given("--test-fraction")) cfg.dataset.test_fraction = test_fraction;
        if (given("--n-clients")) cfg.federation.n_clients = n_clients;
        if (given("--fraction")) cfg.federation.fraction = fraction;
        if (given("--partition")) cfg.federation.partition = partition;
        if (given("--bernoulli-p")) cfg.federation.bernoulli_p = bernoulli_p;
        if (given("--dirichlet-alpha")) cfg.federation.dirichlet_alpha = dirichlet_alpha;
        if (given("--rho")) cfg.noise.rho = rho;
        if (given("--tau")) cfg.noise.tau = tau;
        if (given("--model")) cfg.model.type = model_type;
        if (given("--hidden")) cfg.model.hidden = hidden;
        if (given("--learning-rate")) cfg.training.learning_rate = learning_rate;
        if (given("--epochs")) cfg.training.epochs = epochs;
        if (given("--batch-size")) cfg.training.batch_size = batch_size;
        if (given("--momentum")) cfg.training.momentum = momentum;
        if (given("--t1")) cfg.fedcorr.t1 = t1;
        if (given("--t2")) cfg.fedcorr.t2 = t2;
        if (given("--t3")) cfg.fedcorr.t3 = t3;
        if (given("--theta")) cfg.fedcorr.theta = theta;
        if (given("--pi")) cfg.fedcorr.pi = pi;
        if (given("--kappa")) cfg.fedcorr.kappa = kappa;
        if (given("--beta")) cfg.fedcorr.beta = beta;
        if (given("--mixup-alpha")) cfg.fedcorr.mixup_alpha = mixup_alpha;
        if (given("--lid-k")) cfg.fedcorr.lid_k = lid_k;
        if (given("--rounds")) cfg.fedavg_rounds = fedavg_rounds;
        if (given("--no-correction")) cfg.ablation.no_correction = true;
        if (given("--no-fraction-scheduling")) cfg.ablation.no_fraction_scheduling = true;
        if (given("--no-proximal")) cfg.ablation.no_proximal = true;
        if (given("--no-finetuning")) cfg.ablation.no_finetuning = true;
        if (given("--no-usual-training")) cfg.ablation.no_usual_training = true;
        if (given("--no-mixup")) cfg.ablation.no_mixup = true;
        if (given("--stage1-parallel-aggregation")) cfg.stage1_parallel_aggregation = true;
    }
};

// precedence: config file < FEDCORR_OUTPUT_DIR < explicit flags
fedcorr::ExperimentConfig resolve_config(const std::string& config_path, const Overrides& ov)
{
    fedcorr::ExperimentConfig cfg;
    if (!config_path.empty())
        cfg = fedcorr::load_config(config_path);
    if (const char* env = std::getenv("FEDCORR_OUTPUT_DIR"); env && *env)
        cfg.output_dir = env;
    ov.apply(cfg);
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Federated-learning simulator with multi-stage label-noise correction"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides run_ov, validate_ov, export_ov;

    auto* run_cmd = app.add_subcommand("run", "execute an experiment and write result files");
    run_cmd->add_option("--config", config_path, "JSON config file (omit for defaults)");
    run_ov.add_to(*run_cmd);

    auto* validate_cmd = app.add_subcommand("validate-config", "load, validate and echo a config");
    validate_cmd->add_option("--config", config_path, "JSON config file")->required();
    validate_ov.add_to(*validate_cmd);

    std::string export_path;
    auto* export_cmd =
        app.add_subcommand("export-dataset", "write the configured dataset as CSV");
    export_cmd->add_option("--config", config_path, "JSON config file (omit for defaults)");
    export_cmd->add_option("--out", export_path, "destination CSV file")->required();
    export_ov.add_to(*export_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            auto cfg = resolve_config(config_path, run_ov);
            auto out = fedcorr::run_experiment(cfg);
            std::cout << "mode=" << cfg.mode
                      << " final_accuracy=" << fedcorr::format_double(out.result.final_accuracy)
                      << " best_accuracy=" << fedcorr::format_double(out.result.best_accuracy)
                      << " comm_cost=" << out.result.comm_cost << "\n";
            for (const auto& f : out.files)
                std::cout << "wrote " << f << "\n";
        } else if (validate_cmd->parsed()) {
            auto cfg = resolve_config(config_path, validate_ov);
            std::cout << cfg.to_json().dump(2) << "\n";
            std::cout << "config OK (hash " << cfg.config_hash() << ")\n";
        } else if (export_cmd->parsed()) {
            auto cfg = resolve_config(config_path, export_ov);
            fedcorr::Dataset ds;
            if (cfg.dataset.type == "csv") {
                ds = fedcorr::ingest_csv(cfg.dataset.csv_path, cfg.dataset.n_classes);
            } else {
                fedcorr::BlobParams bp{cfg.dataset.n_samples, cfg.dataset.n_classes,
                                       cfg.dataset.dim, cfg.dataset.cluster_std,
                                       cfg.dataset.center_scale};
                ds = fedcorr::generate_blobs(bp, cfg.seed);
            }
            fedcorr::export_dataset_csv(ds, export_path);
            std::cout << "wrote " << export_path << " (" << ds.size() << " rows)\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
