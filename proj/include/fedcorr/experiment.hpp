#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "fedcorr/csv.hpp"
#include "fedcorr/metrics.hpp"
#include "fedcorr/protocol.hpp"

namespace fedcorr {

// Seeded train/test split of an ingested dataset.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction,
                                                 std::uint64_t seed)
{
    const std::size_t n = ds.size();
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(derive_seed(seed, "csv.split"));
    std::shuffle(idx.begin(), idx.end(), rng);

    auto take = [&](std::size_t from, std::size_t to) {
        Dataset out;
        out.n_classes = ds.n_classes;
        for (std::size_t i = from; i < to; ++i) {
            out.features.push_back(ds.features[idx[i]]);
            out.true_labels.push_back(ds.true_labels[idx[i]]);
            out.given_labels.push_back(ds.given_labels[idx[i]]);
        }
        return out;
    };
    return {take(n_test, n), take(0, n_test)};
}

inline Simulator make_simulator(const ExperimentConfig& cfg)
{
    if (cfg.dataset.type == "csv") {
        Dataset full = ingest_csv(cfg.dataset.csv_path, cfg.dataset.n_classes);
        auto [train, test] = split_dataset(full, cfg.dataset.test_fraction, cfg.seed);
        return Simulator(cfg, std::move(train), std::move(test));
    }
    return Simulator(cfg);
}

struct RunOutput {
    ExperimentResult result;
    std::vector<std::string> files;
};

namespace detail {

class OutputWriter {
public:
    OutputWriter(std::filesystem::path dir, std::string stamp)
        : dir_(std::move(dir)), stamp_(std::move(stamp))
    {
        created_dir_ = !std::filesystem::exists(dir_);
        std::filesystem::create_directories(dir_);
    }

    std::ofstream open_csv(const std::string& name)
    {
        const auto path = dir_ / name;
        std::ofstream out(path);
        if (!out)
            throw IoError("run: cannot write " + path.string());
        files_.push_back(path.string());
        out << "# " << stamp_ << "\n";
        return out;
    }

    void write_json(const std::string& name, const nlohmann::json& j)
    {
        const auto path = dir_ / name;
        std::ofstream out(path);
        if (!out)
            throw IoError("run: cannot write " + path.string());
        files_.push_back(path.string());
        out << j.dump(2) << "\n";
        if (!out)
            throw IoError("run: write failed for " + path.string());
    }

    // On failure nothing half-written survives.
    void discard_all()
    {
        std::error_code ec;
        for (const auto& f : files_)
            std::filesystem::remove(f, ec);
        if (created_dir_ && std::filesystem::is_empty(dir_, ec))
            std::filesystem::remove(dir_, ec);
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::string stamp_;
    bool created_dir_ = false;
    std::vector<std::string> files_;
};

inline void write_outputs(OutputWriter& w, const ExperimentConfig& cfg,
                          const ExperimentResult& res)
{
    const std::string hash = cfg.config_hash();

    nlohmann::json resolved = cfg.to_json();
    resolved["config_hash"] = hash; // over the config minus this key and output_dir
    w.write_json("config.resolved.json", resolved);

    nlohmann::json summary;
    summary["master_seed"] = cfg.seed;
    summary["config_hash"] = hash;
    summary["mode"] = cfg.mode;
    summary["final_accuracy"] = res.final_accuracy;
    summary["best_accuracy"] = res.best_accuracy;
    summary["comm_cost"] = res.comm_cost;
    summary["n_rounds"] = res.rounds.size();
    summary["n_relabel_events"] = res.relabel_events.size();
    std::size_t changed = 0;
    for (const auto& e : res.relabel_events)
        changed += e.changed;
    summary["labels_changed_total"] = changed;
    summary["wall_clock_seconds"] = res.wall_clock_seconds;
    w.write_json("summary.json", summary);

    {
        auto out = w.open_csv("accuracy.csv");
        out << "round,stage,selected,comm_cost,test_accuracy\n";
        for (const auto& r : res.rounds)
            out << r.round << "," << stage_name(r.stage) << "," << r.selected << "," << r.comm_cost
                << "," << format_double(r.test_accuracy) << "\n";
    }

    if (cfg.mode != "fedcorr")
        return;

    {
        auto out = w.open_csv("client_states.csv");
        out << "iteration,client_id,lid_score,cumulative_lid,estimated_noise,is_noisy\n";
        for (const auto& c : res.client_log)
            out << c.iteration << "," << c.client_id << "," << format_double(c.lid_score) << ","
                << format_double(c.cumulative_lid) << "," << format_double(c.estimated_noise)
                << "," << (c.is_noisy ? 1 : 0) << "\n";
    }

    {
        auto out = w.open_csv("relabel_events.csv");
        out << "stage,iteration,client_id,candidates,labels_changed\n";
        for (const auto& e : res.relabel_events)
            out << e.stage << "," << e.iteration << "," << e.client_id << "," << e.candidates
                << "," << e.changed << "\n";
    }

    // noise trajectory + identification quality, per client and pooled
    {
        const auto& pa = res.partition;
        Dataset shadow;
        shadow.n_classes = res.n_classes;
        shadow.true_labels = res.true_labels;

        auto noise_at = [&](const std::string& name) {
            return ground_truth_noise_snapshot(shadow, pa, res.checkpoint(name).given_labels);
        };
        const auto noise_initial = noise_at("initial");
        const auto noise_s1 = noise_at("post_stage1");
        const auto noise_s2 = noise_at("post_stage2");
        const auto noise_final = noise_at("final");
        const auto ident =
            sample_identification_confusion(pa, res.noise_truth.flipped, res.detected_noisy_rows);

        std::vector<std::size_t> changed_s1(pa.n_clients(), 0), changed_s2(pa.n_clients(), 0);
        for (const auto& e : res.relabel_events) {
            auto& bucket = e.stage == "stage1" ? changed_s1 : changed_s2;
            bucket[static_cast<std::size_t>(e.client_id)] += e.changed;
        }

        auto out = w.open_csv("relabel_report.csv");
        out << "client,noise_initial,noise_post_stage1,noise_post_stage2,noise_final,"
               "tp,fp,tn,fn,precision,recall,precision_defined,recall_defined,"
               "labels_changed_stage1,labels_changed_stage2\n";
        for (std::size_t k = 0; k < pa.n_clients(); ++k) {
            const auto& c = ident.per_client[k];
            out << k << "," << format_double(noise_initial[k]) << "," << format_double(noise_s1[k])
                << "," << format_double(noise_s2[k]) << "," << format_double(noise_final[k]) << ","
                << c.tp << "," << c.fp << "," << c.tn << "," << c.fn << ","
                << format_double(c.precision) << "," << format_double(c.recall) << ","
                << (c.precision_defined ? 1 : 0) << "," << (c.recall_defined ? 1 : 0) << ","
                << changed_s1[k] << "," << changed_s2[k] << "\n";
        }
        const auto& p = ident.pooled;
        out << "pooled,,,,," << p.tp << "," << p.fp << "," << p.tn << "," << p.fn << ","
            << format_double(p.precision) << "," << format_double(p.recall) << ","
            << (p.precision_defined ? 1 : 0) << "," << (p.recall_defined ? 1 : 0) << ",,\n";
    }

    {
        const auto& pa = res.partition;
        Dataset shadow;
        shadow.n_classes = res.n_classes;
        shadow.true_labels = res.true_labels;
        std::vector<std::size_t> all;
        for (const auto& rows : pa.client_indices)
            all.insert(all.end(), rows.begin(), rows.end());
        std::sort(all.begin(), all.end());

        auto out = w.open_csv("confusion.csv");
        out << "checkpoint,true_class,observed_class,count\n";
        for (const auto& cp : res.checkpoints) {
            const auto counts = confusion_matrix(shadow, all, cp.given_labels);
            for (std::size_t t = 0; t < counts.size(); ++t)
                for (std::size_t o = 0; o < counts[t].size(); ++o)
                    out << cp.name << "," << t << "," << o << "," << counts[t][o] << "\n";
        }
    }
}

} // namespace detail

// Executes the configured experiment and writes all result files into
// cfg.output_dir. Throws on failure after removing partial outputs.
inline RunOutput run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    detail::OutputWriter writer(cfg.output_dir,
                                "master_seed=" + std::to_string(cfg.seed) +
                                    " config_hash=" + cfg.config_hash());
    try {
        Simulator sim = make_simulator(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        ExperimentResult res = sim.run();
        res.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        detail::write_outputs(writer, cfg, res);
        return {std::move(res), writer.files()};
    } catch (...) {
        writer.discard_all();
        throw;
    }
}

} // namespace fedcorr
