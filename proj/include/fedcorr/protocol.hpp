#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcorr/config.hpp"
#include "fedcorr/datagen.hpp"
#include "fedcorr/dataset.hpp"
#include "fedcorr/gmm.hpp"
#include "fedcorr/lid.hpp"
#include "fedcorr/metrics.hpp"
#include "fedcorr/model.hpp"
#include "fedcorr/train.hpp"

namespace fedcorr {

enum class Stage { PreProcessing, Finetuning, UsualTraining };

inline const char* stage_name(Stage s)
{
    switch (s) {
    case Stage::PreProcessing: return "preprocessing";
    case Stage::Finetuning: return "finetuning";
    case Stage::UsualTraining: return "usual_training";
    }
    return "?";
}

// Per-client protocol state.
struct ClientState {
    int client_id = 0;
    std::vector<std::size_t> sample_indices;
    std::vector<double> lid_history;
    double cumulative_lid = 0.0;
    double estimated_noise = 0.0; // 0 whenever is_noisy_flag is false
    bool is_noisy_flag = false;
};

struct ServerState {
    WeightVector global_weights;
    long long round_index = 0;
    Stage stage = Stage::PreProcessing;
    std::vector<ClientState> clients;
    long long comm_cost = 0; // cumulative client participations
};

struct WeightedUpdate {
    WeightVector weights;
    std::size_t n_samples = 0;
};

// Dataset-size-weighted mean of client weights, summed in input order
// (callers pass updates in ascending client id).
inline WeightVector aggregate(std::span<const WeightedUpdate> updates)
{
    if (updates.empty())
        throw ParameterError("aggregate: no updates");
    std::size_t total = 0;
    for (const auto& u : updates) {
        if (!u.weights.layout || !u.weights.layout->same_shape(*updates.front().weights.layout))
            throw ParameterError("aggregate: layout mismatch");
        total += u.n_samples;
    }
    if (total == 0)
        throw ParameterError("aggregate: zero total dataset size");
    WeightVector out{std::vector<double>(updates.front().weights.size(), 0.0),
                     updates.front().weights.layout};
    for (const auto& u : updates) {
        const double coeff = static_cast<double>(u.n_samples) / static_cast<double>(total);
        for (std::size_t i = 0; i < out.params.size(); ++i)
            out.params[i] += coeff * u.weights.params[i];
    }
    return out;
}

struct RelabelSelection {
    std::vector<std::size_t> positions; // local sample positions
    std::vector<int> new_labels;
};

// Candidate relabels: the floor(pi * |noisy_subset|) largest-loss members of
// the noisy subset (ties toward the smaller position), kept only where the
// global model's top probability reaches theta. New label = argmax of the
// global prediction.
inline RelabelSelection relabel_selection(std::span<const double> losses,
                                          std::span<const std::size_t> noisy_subset,
                                          const std::vector<std::vector<double>>& global_preds,
                                          double pi, double theta)
{
    if (noisy_subset.empty())
        throw ParameterError("relabel_selection: empty noisy subset");
    std::vector<std::size_t> order(noisy_subset.begin(), noisy_subset.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (losses[a] != losses[b])
            return losses[a] > losses[b];
        return a < b;
    });
    const std::size_t count = static_cast<std::size_t>(
        std::floor(pi * static_cast<double>(noisy_subset.size())));
    order.resize(std::min(count, order.size()));

    RelabelSelection sel;
    for (std::size_t pos : order) {
        const auto& p = global_preds[pos];
        std::size_t best = 0;
        for (std::size_t c = 1; c < p.size(); ++c)
            if (p[c] > p[best])
                best = c;
        if (p[best] >= theta) {
            sel.positions.push_back(pos);
            sel.new_labels.push_back(static_cast<int>(best));
        }
    }
    return sel;
}

inline long long planned_comm_cost(std::size_t n_clients, double fraction, int t1, int t2, int t3,
                                   std::size_t clean_set_size)
{
    const long long sel2 = std::max<long long>(
        1, std::llround(fraction * static_cast<double>(clean_set_size)));
    const long long sel3 =
        std::max<long long>(1, std::llround(fraction * static_cast<double>(n_clients)));
    return static_cast<long long>(n_clients) * t1 + sel2 * t2 + sel3 * t3;
}

struct RoundRecord {
    long long round = 0;
    Stage stage = Stage::PreProcessing;
    int selected = 0;
    long long comm_cost = 0;
    double test_accuracy = 0.0;
};

struct IterationClientRecord {
    int iteration = 0;
    int client_id = 0;
    double lid_score = 0.0;
    double cumulative_lid = 0.0;
    double estimated_noise = 0.0;
    bool is_noisy = false;
};

struct RelabelEvent {
    std::string stage;
    int iteration = 0; // stage-1 iteration, 0 for the stage-2 pass
    int client_id = 0;
    std::size_t candidates = 0;
    std::size_t changed = 0;
};

struct CheckpointSnapshot {
    std::string name;
    std::vector<int> given_labels;
};

struct ExperimentResult {
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
    std::vector<RoundRecord> rounds;
    std::vector<IterationClientRecord> client_log;
    std::vector<RelabelEvent> relabel_events;
    std::vector<CheckpointSnapshot> checkpoints;
    std::vector<double> estimated_noise;                     // final mu-hat per client
    std::vector<std::uint8_t> noisy_flags;                   // final GMM verdict per client
    std::vector<std::vector<std::size_t>> detected_noisy_rows; // last loss-GMM noisy subsets
    std::vector<std::vector<double>> gmm_ll_histories;       // every EM fit's trajectory
    std::vector<std::size_t> clean_set_history;              // |S_c| per finetuning use
    long long comm_cost = 0;
    double wall_clock_seconds = 0.0;
    // ground truth carried along for reporting
    int n_classes = 0;
    PartitionAssignment partition;
    NoiseAssignment noise_truth;
    std::vector<int> true_labels;

    const CheckpointSnapshot& checkpoint(const std::string& name) const
    {
        for (const auto& c : checkpoints)
            if (c.name == name)
                return c;
        throw ParameterError("no checkpoint named " + name);
    }
};

// In-process federation: the "server" and "clients" exchange value messages
// (weights, dataset sizes, LID scalars) through this class.
class Simulator {
public:
    explicit Simulator(const ExperimentConfig& cfg)
    {
        if (cfg.dataset.type != "blobs")
            throw ParameterError("Simulator: csv datasets must be supplied explicitly");
        BlobParams bp{cfg.dataset.n_samples, cfg.dataset.n_classes, cfg.dataset.dim,
                      cfg.dataset.cluster_std, cfg.dataset.center_scale};
        Dataset train = generate_blobs(bp, cfg.seed);
        Dataset test = generate_blobs_heldout(bp, cfg.dataset.n_test, cfg.seed);
        init(cfg, std::move(train), std::move(test));
    }

    Simulator(const ExperimentConfig& cfg, Dataset train, Dataset test)
    {
        init(cfg, std::move(train), std::move(test));
    }

    ServerState& server() { return server_; }
    Dataset& train_data() { return train_; }
    const Dataset& test_data() const { return test_; }
    const PartitionAssignment& partition() const { return partition_; }
    const NoiseAssignment& noise_truth() const { return noise_; }
    const Model& model() const { return *model_; }
    ExperimentResult& result() { return result_; }

    ExperimentResult run()
    {
        if (cfg_.mode == "fedavg")
            run_fedavg_mode();
        else
            run_fedcorr_mode();
        finalize_result();
        return result_;
    }

    // One pre-processing iteration: every client trains once, LID scores and
    // per-sample losses are refreshed, then noisy clients are identified,
    // noise levels estimated, and high-confidence samples relabeled.
    void preprocessing_iteration(int it)
    {
        server_.stage = Stage::PreProcessing;
        if (cfg_.ablation.no_fraction_scheduling)
            preprocessing_iteration_round_based(it);
        else if (cfg_.stage1_parallel_aggregation)
            preprocessing_iteration_parallel(it);
        else
            preprocessing_iteration_sequential(it);

        identify_and_estimate(it);
        if (!cfg_.ablation.no_correction)
            stage1_relabel(it);
        record_client_log(it);
    }

    // Finetuning: FedAvg restricted to clients below the kappa threshold,
    // then a full relabel of the remaining noisy clients.
    void finetuning_stage()
    {
        server_.stage = Stage::Finetuning;
        std::vector<std::size_t> clean, noisy;
        for (const auto& c : server_.clients) {
            if (c.estimated_noise < cfg_.fedcorr.kappa)
                clean.push_back(static_cast<std::size_t>(c.client_id));
            else
                noisy.push_back(static_cast<std::size_t>(c.client_id));
        }
        if (clean.empty())
            throw ConfigError("finetuning: no client has estimated noise below kappa=" +
                              format_double(cfg_.fedcorr.kappa) + "; raise fedcorr.kappa");
        result_.clean_set_history.push_back(clean.size());
        for (int t = 1; t <= cfg_.fedcorr.t2; ++t)
            fedavg_round(clean, "stage2", static_cast<std::uint64_t>(t));

        if (!cfg_.ablation.no_correction)
            for (std::size_t k : noisy)
                relabel_whole_client(k);
    }

    void usual_training_stage()
    {
        server_.stage = Stage::UsualTraining;
        std::vector<std::size_t> all(server_.clients.size());
        std::iota(all.begin(), all.end(), 0);
        for (int t = 1; t <= cfg_.fedcorr.t3; ++t)
            fedavg_round(all, "stage3", static_cast<std::uint64_t>(t));
    }

private:
    void init(const ExperimentConfig& cfg, Dataset train, Dataset test)
    {
        cfg_ = cfg;
        cfg_.validate();
        train_ = std::move(train);
        test_ = std::move(test);
        train_.validate();
        test_.validate();

        if (cfg_.federation.partition == "iid")
            partition_ = partition_iid(train_, cfg_.federation.n_clients,
                                       derive_seed(cfg_.seed, "partition"));
        else
            partition_ = partition_noniid(train_, cfg_.federation.n_clients,
                                          cfg_.federation.bernoulli_p,
                                          cfg_.federation.dirichlet_alpha,
                                          derive_seed(cfg_.seed, "partition"));
        noise_ = apply_noise_model(train_, partition_, cfg_.noise.rho, cfg_.noise.tau,
                                   derive_seed(cfg_.seed, "noise"));

        if (cfg_.model.type == "softmax")
            model_ = std::make_shared<SoftmaxRegression>(train_.dim(),
                                                         static_cast<std::size_t>(train_.n_classes));
        else
            model_ = std::make_shared<Mlp>(train_.dim(), cfg_.model.hidden,
                                           static_cast<std::size_t>(train_.n_classes));

        server_.global_weights = model_->init_weights(derive_seed(cfg_.seed, "model.init"));
        server_.clients.resize(cfg_.federation.n_clients);
        for (std::size_t k = 0; k < cfg_.federation.n_clients; ++k) {
            server_.clients[k].client_id = static_cast<int>(k);
            server_.clients[k].sample_indices = partition_.client_indices[k];
        }
        last_losses_.assign(cfg_.federation.n_clients, {});
        detected_local_.assign(cfg_.federation.n_clients, {});
        latest_lid_.assign(cfg_.federation.n_clients, 0.0);

        result_.n_classes = train_.n_classes;
        result_.partition = partition_;
        result_.noise_truth = noise_;
        result_.true_labels = train_.true_labels;
        result_.checkpoints.push_back({"initial", train_.given_labels});
    }

    void run_fedcorr_mode()
    {
        for (int it = 1; it <= cfg_.fedcorr.t1; ++it)
            preprocessing_iteration(it);
        result_.checkpoints.push_back({"post_stage1", train_.given_labels});

        if (!cfg_.ablation.no_finetuning)
            finetuning_stage();
        result_.checkpoints.push_back({"post_stage2", train_.given_labels});

        if (!cfg_.ablation.no_usual_training)
            usual_training_stage();
        result_.checkpoints.push_back({"final", train_.given_labels});
    }

    void run_fedavg_mode()
    {
        long long rounds = cfg_.fedavg_rounds;
        if (rounds == 0) {
            // match the fedcorr communication budget of the same config
            const long long target =
                planned_comm_cost(cfg_.federation.n_clients, cfg_.federation.fraction,
                                  cfg_.fedcorr.t1, cfg_.fedcorr.t2, cfg_.fedcorr.t3,
                                  cfg_.federation.n_clients);
            const long long sel = std::max<long long>(
                1, std::llround(cfg_.federation.fraction *
                                static_cast<double>(cfg_.federation.n_clients)));
            rounds = std::llround(static_cast<double>(target) / static_cast<double>(sel));
        }
        server_.stage = Stage::UsualTraining;
        std::vector<std::size_t> all(server_.clients.size());
        std::iota(all.begin(), all.end(), 0);
        for (long long t = 1; t <= rounds; ++t)
            fedavg_round(all, "fedavg", static_cast<std::uint64_t>(t));
        result_.checkpoints.push_back({"final", train_.given_labels});
    }

    LocalTrainConfig make_train_config(double mixup_alpha, double prox_beta, double prox_mu,
                                       const WeightVector& anchor, std::uint64_t seed) const
    {
        LocalTrainConfig ltc;
        ltc.epochs = cfg_.training.epochs;
        ltc.batch_size = cfg_.training.batch_size;
        ltc.learning_rate = cfg_.training.learning_rate;
        ltc.momentum = cfg_.training.momentum;
        ltc.mixup_alpha = mixup_alpha;
        ltc.prox_beta = prox_beta;
        ltc.prox_mu_hat = prox_mu;
        ltc.anchor_weights = anchor;
        ltc.seed = seed;
        return ltc;
    }

    WeightVector train_client(std::size_t k, const WeightVector& start,
                              const LocalTrainConfig& ltc) const
    {
        if (ltc.epochs == 0)
            return start;
        try {
            return local_train(*model_, start, train_, partition_.client_indices[k], ltc);
        } catch (const DivergenceError& e) {
            throw DivergenceError("client " + std::to_string(k) + ", round " +
                                  std::to_string(server_.round_index + 1) + ": " + e.what());
        }
    }

    double stage1_mixup_alpha() const
    {
        return cfg_.ablation.no_mixup ? 0.0 : cfg_.fedcorr.mixup_alpha;
    }
    double stage1_prox_beta() const
    {
        return cfg_.ablation.no_proximal ? 0.0 : cfg_.fedcorr.beta;
    }

    void client_measurements(std::size_t k, const WeightVector& w)
    {
        const auto& rows = partition_.client_indices[k];
        auto preds = predict_all(*model_, w, train_, rows);
        latest_lid_[k] = lid_score(preds, effective_lid_k(rows.size())).score;
        last_losses_[k] = per_sample_loss(*model_, w, train_, rows);
    }

    // k must leave room for k+1 prediction vectors on the smallest client
    std::size_t effective_lid_k(std::size_t n_points) const
    {
        return std::min<std::size_t>(cfg_.fedcorr.lid_k, n_points > 1 ? n_points - 1 : 1);
    }

    void log_round(int selected)
    {
        ++server_.round_index;
        server_.comm_cost += selected;
        const double acc = evaluate_all(*model_, server_.global_weights, test_);
        result_.rounds.push_back(
            {server_.round_index, server_.stage, selected, server_.comm_cost, acc});
    }

    // Fraction 1/N: one client per communication round, training from the
    // intermediary weights, which its result then replaces.
    void preprocessing_iteration_sequential(int it)
    {
        const std::size_t n = server_.clients.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(derive_seed(cfg_.seed, "stage1.shuffle", static_cast<std::uint64_t>(it)));
        std::shuffle(order.begin(), order.end(), rng);

        WeightVector inter = server_.global_weights;
        for (std::size_t k : order) {
            const auto ltc = make_train_config(
                stage1_mixup_alpha(), stage1_prox_beta(), server_.clients[k].estimated_noise,
                inter,
                derive_seed(cfg_.seed, "stage1.train",
                            static_cast<std::uint64_t>(it) * n + k));
            WeightVector wk = train_client(k, inter, ltc);
            client_measurements(k, wk);
            server_.clients[k].lid_history.push_back(latest_lid_[k]);
            server_.clients[k].cumulative_lid += latest_lid_[k];
            inter = std::move(wk); // singleton aggregation
            server_.global_weights = inter;
            log_round(1);
        }
    }

    // Experimental alternative: all clients train from the same iteration
    // weights and are aggregated once.
    void preprocessing_iteration_parallel(int it)
    {
        const std::size_t n = server_.clients.size();
        const WeightVector start = server_.global_weights;
        std::vector<WeightedUpdate> updates;
        updates.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto ltc = make_train_config(
                stage1_mixup_alpha(), stage1_prox_beta(), server_.clients[k].estimated_noise,
                start,
                derive_seed(cfg_.seed, "stage1.train",
                            static_cast<std::uint64_t>(it) * n + k));
            WeightVector wk = train_client(k, start, ltc);
            client_measurements(k, wk);
            server_.clients[k].lid_history.push_back(latest_lid_[k]);
            server_.clients[k].cumulative_lid += latest_lid_[k];
            updates.push_back({std::move(wk), partition_.client_indices[k].size()});
        }
        server_.global_weights = aggregate(updates);
        log_round(static_cast<int>(n));
    }

    // Ablated scheduling: fraction gamma with replacement across rounds;
    // every ceil(1/gamma) rounds count as one iteration and each client's
    // most recent LID score (0 if never selected) enters the accumulation.
    void preprocessing_iteration_round_based(int it)
    {
        const std::size_t n = server_.clients.size();
        const int rounds_per_iter = static_cast<int>(std::ceil(1.0 / cfg_.federation.fraction));
        const std::size_t sel_size = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg_.federation.fraction *
                                                     static_cast<double>(n))));
        std::vector<std::size_t> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        for (int r = 0; r < rounds_per_iter; ++r) {
            Rng rng = make_rng(derive_seed(cfg_.seed, "stage1.select",
                                           static_cast<std::uint64_t>(it) * rounds_per_iter + r));
            std::vector<std::size_t> selected = ids;
            std::shuffle(selected.begin(), selected.end(), rng);
            selected.resize(sel_size);
            std::sort(selected.begin(), selected.end());

            const WeightVector start = server_.global_weights;
            std::vector<WeightedUpdate> updates;
            updates.reserve(sel_size);
            for (std::size_t k : selected) {
                const auto ltc = make_train_config(
                    stage1_mixup_alpha(), stage1_prox_beta(), server_.clients[k].estimated_noise,
                    start,
                    derive_seed(cfg_.seed, "stage1.train",
                                (static_cast<std::uint64_t>(it) * rounds_per_iter + r) * n + k));
                WeightVector wk = train_client(k, start, ltc);
                client_measurements(k, wk);
                updates.push_back({std::move(wk), partition_.client_indices[k].size()});
            }
            server_.global_weights = aggregate(updates);
            log_round(static_cast<int>(sel_size));
        }
        for (std::size_t k = 0; k < n; ++k) {
            server_.clients[k].lid_history.push_back(latest_lid_[k]);
            server_.clients[k].cumulative_lid += latest_lid_[k];
        }
    }

    void identify_and_estimate(int it)
    {
        const std::size_t n = server_.clients.size();
        std::vector<double> cumulative(n);
        for (std::size_t k = 0; k < n; ++k)
            cumulative[k] = server_.clients[k].cumulative_lid;
        auto fit = fit_gmm2(cumulative, 500, 1e-6,
                            derive_seed(cfg_.seed, "stage1.gmm", static_cast<std::uint64_t>(it)));
        if (fit)
            result_.gmm_ll_histories.push_back(fit->ll_history);
        const GmmSplit split = split_by_gmm(cumulative, fit);

        for (auto& c : server_.clients) {
            c.is_noisy_flag = false;
            c.estimated_noise = 0.0;
        }
        for (std::size_t k : split.high)
            server_.clients[k].is_noisy_flag = true;

        for (std::size_t k = 0; k < n; ++k) {
            detected_local_[k].clear();
            auto& client = server_.clients[k];
            if (!client.is_noisy_flag || last_losses_[k].empty())
                continue;
            auto loss_fit = fit_gmm2(last_losses_[k], 500, 1e-6,
                                     derive_seed(cfg_.seed, "stage1.loss_gmm",
                                                 static_cast<std::uint64_t>(it) * n + k));
            if (loss_fit)
                result_.gmm_ll_histories.push_back(loss_fit->ll_history);
            const GmmSplit loss_split = split_by_gmm(last_losses_[k], loss_fit);
            detected_local_[k] = loss_split.high;
            client.estimated_noise = static_cast<double>(loss_split.high.size()) /
                                     static_cast<double>(last_losses_[k].size());
        }
    }

    void stage1_relabel(int it)
    {
        for (std::size_t k = 0; k < server_.clients.size(); ++k) {
            if (!server_.clients[k].is_noisy_flag || detected_local_[k].empty())
                continue;
            const auto& rows = partition_.client_indices[k];
            auto preds = predict_all(*model_, server_.global_weights, train_, rows);
            auto losses = per_sample_loss(*model_, server_.global_weights, train_, rows);
            const auto sel = relabel_selection(losses, detected_local_[k], preds,
                                               cfg_.fedcorr.pi, cfg_.fedcorr.theta);
            std::size_t changed = 0;
            for (std::size_t i = 0; i < sel.positions.size(); ++i) {
                int& given = train_.given_labels[rows[sel.positions[i]]];
                changed += given != sel.new_labels[i];
                given = sel.new_labels[i];
            }
            result_.relabel_events.push_back(
                {"stage1", it, static_cast<int>(k), sel.positions.size(), changed});
        }
    }

    void relabel_whole_client(std::size_t k)
    {
        const auto& rows = partition_.client_indices[k];
        auto preds = predict_all(*model_, server_.global_weights, train_, rows);
        std::size_t candidates = 0, changed = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& p = preds[i];
            std::size_t best = 0;
            for (std::size_t c = 1; c < p.size(); ++c)
                if (p[c] > p[best])
                    best = c;
            if (p[best] >= cfg_.fedcorr.theta) {
                ++candidates;
                int& given = train_.given_labels[rows[i]];
                changed += given != static_cast<int>(best);
                given = static_cast<int>(best);
            }
        }
        result_.relabel_events.push_back({"stage2", 0, static_cast<int>(k), candidates, changed});
    }

    void fedavg_round(std::span<const std::size_t> eligible, const std::string& tag,
                      std::uint64_t round_in_stage)
    {
        const std::size_t sel_size = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg_.federation.fraction *
                                                     static_cast<double>(eligible.size()))));
        std::vector<std::size_t> selected(eligible.begin(), eligible.end());
        Rng rng = make_rng(derive_seed(cfg_.seed, tag + ".select", round_in_stage));
        std::shuffle(selected.begin(), selected.end(), rng);
        selected.resize(std::min(sel_size, selected.size()));
        std::sort(selected.begin(), selected.end());

        const WeightVector start = server_.global_weights;
        std::vector<WeightedUpdate> updates;
        updates.reserve(selected.size());
        for (std::size_t k : selected) {
            const auto ltc = make_train_config(
                0.0, 0.0, 0.0, start,
                derive_seed(cfg_.seed, tag + ".train",
                            round_in_stage * server_.clients.size() + k));
            updates.push_back({train_client(k, start, ltc), partition_.client_indices[k].size()});
        }
        server_.global_weights = aggregate(updates);
        log_round(static_cast<int>(selected.size()));
    }

    void record_client_log(int it)
    {
        for (const auto& c : server_.clients)
            result_.client_log.push_back({it, c.client_id,
                                          c.lid_history.empty() ? 0.0 : c.lid_history.back(),
                                          c.cumulative_lid, c.estimated_noise, c.is_noisy_flag});
    }

    void finalize_result()
    {
        result_.comm_cost = server_.comm_cost;
        if (result_.rounds.empty()) {
            result_.final_accuracy = evaluate_all(*model_, server_.global_weights, test_);
            result_.best_accuracy = result_.final_accuracy;
        } else {
            result_.final_accuracy = result_.rounds.back().test_accuracy;
            result_.best_accuracy = 0.0;
            for (const auto& r : result_.rounds)
                result_.best_accuracy = std::max(result_.best_accuracy, r.test_accuracy);
        }
        result_.estimated_noise.clear();
        result_.noisy_flags.clear();
        result_.detected_noisy_rows.assign(server_.clients.size(), {});
        for (std::size_t k = 0; k < server_.clients.size(); ++k) {
            result_.estimated_noise.push_back(server_.clients[k].estimated_noise);
            result_.noisy_flags.push_back(server_.clients[k].is_noisy_flag ? 1 : 0);
            for (std::size_t pos : detected_local_[k])
                result_.detected_noisy_rows[k].push_back(partition_.client_indices[k][pos]);
        }
        if (result_.checkpoints.empty() || result_.checkpoints.back().name != "final")
            result_.checkpoints.push_back({"final", train_.given_labels});
    }

    ExperimentConfig cfg_;
    Dataset train_, test_;
    PartitionAssignment partition_;
    NoiseAssignment noise_;
    std::shared_ptr<const Model> model_;
    ServerState server_;
    ExperimentResult result_;
    std::vector<std::vector<double>> last_losses_;          // local-model CE per client
    std::vector<std::vector<std::size_t>> detected_local_;  // loss-GMM noisy positions
    std::vector<double> latest_lid_;
};

inline ExperimentResult run_fedcorr(const ExperimentConfig& cfg)
{
    ExperimentConfig c = cfg;
    c.mode = "fedcorr";
    Simulator sim(c);
    return sim.run();
}

inline ExperimentResult run_fedavg(const ExperimentConfig& cfg)
{
    ExperimentConfig c = cfg;
    c.mode = "fedavg";
    Simulator sim(c);
    return sim.run();
}

} // namespace fedcorr
