#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "CLI11.hpp"
#include "recp/config.hpp"
#include "recp/data.hpp"
#include "recp/errors.hpp"
#include "recp/eval.hpp"
#include "recp/grad_check.hpp"
#include "recp/meta.hpp"
#include "recp/model.hpp"
#include "recp/synth.hpp"
#include "recp/train.hpp"

namespace fs = std::filesystem;
using namespace recp;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

config::Config resolve_config(const std::string& explicit_path, const std::string& dir) {
    if (!explicit_path.empty()) return config::Config::parse_file(explicit_path);
    const fs::path candidate = fs::path(dir) / "config.toml";
    if (fs::exists(candidate)) return config::Config::parse_file(candidate.string());
    return config::Config{};
}

struct Dims {
    int n = 0, categories = 0, intervals = 0;
};

Dims resolve_dims(const config::Config& cfg, const std::string& data_dir) {
    meta::DataMeta dm;
    if (meta::read_data_meta(data_dir, dm)) return {dm.n, dm.categories, dm.intervals};
    Dims d;
    d.n = static_cast<int>(cfg.get_int("data.n", cfg.get_int("synth.n", 0)));
    d.categories =
        static_cast<int>(cfg.get_int("data.categories", cfg.get_int("synth.categories", 0)));
    d.intervals =
        static_cast<int>(cfg.get_int("data.intervals", cfg.get_int("synth.intervals", 24)));
    if (d.n <= 0 || d.categories <= 0)
        throw DataError("cannot determine region/category counts: no data_meta.json in " +
                        data_dir + " and no data.n/data.categories in the config");
    return d;
}

train::Features load_features(const std::string& data_dir, const Dims& d) {
    const fs::path dir(data_dir);
    train::Features f;
    f.attr = data::build_attributes_csv((dir / "pois.csv").string(), d.n, d.categories).values;
    auto [outflow, inflow] = data::build_flows_csv((dir / "trips.csv").string(), d.n, d.intervals);
    f.outflow = std::move(outflow.values);
    f.inflow = std::move(inflow.values);
    return f;
}

void write_workspace_config(const config::Config& cfg, const std::string& dir) {
    std::ofstream f(fs::path(dir) / "config.toml");
    if (!f) throw DataError("cannot write config.toml in " + dir);
    for (const auto& [k, v] : cfg.entries()) {
        const bool needs_quotes = v.find('#') != std::string::npos ||
                                  v.find(' ') != std::string::npos || v.empty();
        if (needs_quotes)
            f << k << " = \"" << v << "\"\n";
        else
            f << k << " = " << v << '\n';
    }
}

// --- subcommand payloads ------------------------------------------------------

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "run";
    std::string data_dir;
    uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_generate(const CommonOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    config::Config cfg =
        o.config_path.empty() ? config::Config{} : config::Config::parse_file(o.config_path);
    if (o.seed_set) cfg.set("synth.seed", std::to_string(o.seed));
    const synth::CitySpec spec = config::make_city_spec(cfg);
    const synth::City city = synth::generate_city(spec);
    synth::write_city_csvs(city, o.out_dir);
    meta::DataMeta dm{spec.n, spec.categories, spec.intervals,
                      static_cast<long>(city.trips.size()), spec.g};
    meta::write_data_meta(o.out_dir, dm);
    if (!cfg.has("eval.k")) cfg.set("eval.k", std::to_string(spec.g));
    write_workspace_config(cfg, o.out_dir);
    meta::write_run_meta(o.out_dir, "generate", cfg.hash(), spec.seed, seconds_since(t0));
    std::printf("generate: %d regions, %d functions, %zu pois, %zu trips -> %s\n", spec.n, spec.g,
                city.pois.size(), city.trips.size(), o.out_dir.c_str());
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& ablation) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string data_dir = o.data_dir.empty() ? o.out_dir : o.data_dir;
    config::Config cfg = resolve_config(o.config_path, data_dir);
    if (o.seed_set) cfg.set("train.seed", std::to_string(o.seed));
    if (!ablation.empty()) cfg.set("train.ablation", ablation);
    train::TrainConfig tc = config::make_train_config(cfg);
    if (tc.log_every == 0 && meta::should_log(meta::LogLevel::Info))
        tc.log_every = std::max(1, tc.epochs / 10);

    const Dims dims = resolve_dims(cfg, data_dir);
    const train::Features feats = load_features(data_dir, dims);
    train::TrainOutput out = train::train(tc, feats);

    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    train::export_embedding(out.z_attr, out.z_mob, (dir / "embedding.csv").string());
    train::write_loss_history(out.history, (dir / "loss_history.csv").string());
    model::save_checkpoint(*out.trained, cfg.hash(), (dir / "checkpoint.bin").string());
    meta::write_run_meta(o.out_dir, "train", cfg.hash(), tc.seed, seconds_since(t0));
    std::printf("train: %s, %d epochs, final loss %.6g -> %s\n",
                train::to_string(tc.ablation).c_str(), tc.epochs, out.history.back().total,
                o.out_dir.c_str());
    return 0;
}

int cmd_eval_cluster(const CommonOpts& o, std::string embedding_path, std::string labels_path,
                     int k_flag) {
    const auto t0 = std::chrono::steady_clock::now();
    if (embedding_path.empty()) embedding_path = (fs::path(o.out_dir) / "embedding.csv").string();
    if (labels_path.empty()) labels_path = (fs::path(o.out_dir) / "labels.csv").string();
    config::Config cfg = resolve_config(o.config_path, o.out_dir);
    const config::EvalConfig ec = config::make_eval_config(cfg);
    const int k = k_flag > 0 ? k_flag : ec.k;

    const DenseMatrix emb = train::load_embedding(embedding_path);
    const std::vector<int> truth = data::load_csv_labels(labels_path, emb.rows());
    const eval::ClusterReport report =
        eval::evaluate_clustering(emb, truth, k, ec.runs, o.seed);

    const fs::path sub = fs::path(o.out_dir) / "eval_cluster";
    fs::create_directories(sub);
    eval::write_cluster_report(report, "land_usage_clustering", (sub / "report.json").string());
    const eval::KMeansResult km = eval::kmeans(emb, k, 10, 100, derive_seed(o.seed, 0xC1u, 0));
    eval::write_cluster_labels(km.labels, (sub / "labels.csv").string());
    meta::write_run_meta(sub.string(), "eval-cluster", cfg.hash(), o.seed, seconds_since(t0));
    std::printf("eval-cluster: k=%d runs=%d  NMI %.3f +- %.3f  ARI %.3f +- %.3f  F %.3f +- %.3f\n",
                k, ec.runs, report.nmi.mean(), report.nmi.stddev(), report.ari.mean(),
                report.ari.stddev(), report.f.mean(), report.f.stddev());
    return 0;
}

int cmd_eval_popularity(const CommonOpts& o, std::string embedding_path,
                        std::string checkins_path) {
    const auto t0 = std::chrono::steady_clock::now();
    if (embedding_path.empty()) embedding_path = (fs::path(o.out_dir) / "embedding.csv").string();
    if (checkins_path.empty()) checkins_path = (fs::path(o.out_dir) / "checkins.csv").string();
    config::Config cfg = resolve_config(o.config_path, o.out_dir);
    const config::EvalConfig ec = config::make_eval_config(cfg);

    const DenseMatrix emb = train::load_embedding(embedding_path);
    const data::CheckinVector checkins = data::load_csv_checkins(checkins_path, emb.rows());
    const eval::RegressionReport report =
        eval::lasso_cv(emb, checkins.values, ec.folds, o.seed);

    const fs::path sub = fs::path(o.out_dir) / "eval_popularity";
    fs::create_directories(sub);
    eval::write_regression_report(report, "region_popularity_prediction",
                                  (sub / "report.json").string());
    meta::write_run_meta(sub.string(), "eval-popularity", cfg.hash(), o.seed, seconds_since(t0));
    std::printf("eval-popularity: folds=%d  MAE %.3f +- %.3f  RMSE %.3f +- %.3f  R2 %.3f +- %.3f\n",
                ec.folds, report.mae.mean(), report.mae.stddev(), report.rmse.mean(),
                report.rmse.stddev(), report.r2.mean(), report.r2.stddev());
    return 0;
}

struct AblateRow {
    std::string variant;
    uint64_t seed = 0;
    double nmi = 0, ari = 0, f = 0, mae = 0, rmse = 0, r2 = 0;
};

int cmd_ablate(const CommonOpts& o, int seeds, int jobs) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string data_dir = o.data_dir.empty() ? o.out_dir : o.data_dir;
    config::Config cfg = resolve_config(o.config_path, data_dir);
    const config::EvalConfig ec = config::make_eval_config(cfg);
    const Dims dims = resolve_dims(cfg, data_dir);
    const train::Features feats = load_features(data_dir, dims);
    const std::vector<int> truth =
        data::load_csv_labels((fs::path(data_dir) / "labels.csv").string(), dims.n);
    const data::CheckinVector checkins =
        data::load_csv_checkins((fs::path(data_dir) / "checkins.csv").string(), dims.n);
    const uint64_t base_seed = o.seed_set ? o.seed : 1;

    std::vector<AblateRow> rows;
    for (train::Ablation v : train::all_ablations())
        for (int s = 0; s < seeds; ++s)
            rows.push_back(AblateRow{train::to_string(v), base_seed + s});

    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            AblateRow& row = rows[i];
            train::TrainConfig tc = config::make_train_config(cfg);
            tc.seed = row.seed;
            tc.ablation = train::ablation_from_string(row.variant);
            tc.log_every = 0;
            const train::TrainOutput out = train::train(tc, feats);
            const eval::ClusterReport cr =
                eval::evaluate_clustering(out.embedding, truth, ec.k, ec.runs, row.seed);
            const eval::RegressionReport rr =
                eval::lasso_cv(out.embedding, checkins.values, ec.folds, row.seed);
            row.nmi = cr.nmi.mean();
            row.ari = cr.ari.mean();
            row.f = cr.f.mean();
            row.mae = rr.mae.mean();
            row.rmse = rr.rmse.mean();
            row.r2 = rr.r2.mean();
            if (meta::should_log(meta::LogLevel::Info))
                std::fprintf(stderr, "[recp] ablate %s seed %llu: NMI %.3f R2 %.3f\n",
                             row.variant.c_str(), static_cast<unsigned long long>(row.seed),
                             row.nmi, row.r2);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    const fs::path sub = fs::path(o.out_dir) / "ablation";
    fs::create_directories(sub);
    {
        std::FILE* f = std::fopen((sub / "ablation_runs.csv").string().c_str(), "w");
        if (!f) throw DataError("cannot write ablation_runs.csv");
        std::fprintf(f, "variant,seed,nmi,ari,f_measure,mae,rmse,r2\n");
        for (const AblateRow& r : rows)
            std::fprintf(f, "%s,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.variant.c_str(),
                         static_cast<unsigned long long>(r.seed), r.nmi, r.ari, r.f, r.mae, r.rmse,
                         r.r2);
        std::fclose(f);
    }
    {
        std::FILE* f = std::fopen((sub / "ablation.csv").string().c_str(), "w");
        if (!f) throw DataError("cannot write ablation.csv");
        std::fprintf(f, "variant,nmi_mean,nmi_std,ari_mean,ari_std,f_measure_mean,f_measure_std,"
                        "mae_mean,mae_std,rmse_mean,rmse_std,r2_mean,r2_std\n");
        for (train::Ablation v : train::all_ablations()) {
            const std::string name = train::to_string(v);
            eval::MetricSummary nmi, ari, fm, mae, rmse, r2;
            for (const AblateRow& r : rows)
                if (r.variant == name) {
                    nmi.runs.push_back(r.nmi);
                    ari.runs.push_back(r.ari);
                    fm.runs.push_back(r.f);
                    mae.runs.push_back(r.mae);
                    rmse.runs.push_back(r.rmse);
                    r2.runs.push_back(r.r2);
                }
            std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                            "%.17g,%.17g\n",
                         name.c_str(), nmi.mean(), nmi.stddev(), ari.mean(), ari.stddev(),
                         fm.mean(), fm.stddev(), mae.mean(), mae.stddev(), rmse.mean(),
                         rmse.stddev(), r2.mean(), r2.stddev());
            std::printf("%-7s NMI %.3f +- %.3f   R2 %.3f +- %.3f\n", name.c_str(), nmi.mean(),
                        nmi.stddev(), r2.mean(), r2.stddev());
        }
        std::fclose(f);
    }
    meta::write_run_meta(sub.string(), "ablate", cfg.hash(), base_seed, seconds_since(t0));
    return 0;
}

int cmd_gradcheck(const CommonOpts& o, bool /*toy*/) {
    const auto t0 = std::chrono::steady_clock::now();
    const uint64_t seed = o.seed_set ? o.seed : 7;

    synth::CitySpec spec;
    spec.n = 8;
    spec.g = 2;
    spec.categories = 6;
    spec.intervals = 2;
    spec.trips_total = 400;
    spec.seed = seed;
    const synth::City city = synth::generate_city(spec);

    train::Features feats;
    feats.attr = data::build_attributes(city.pois, spec.n, spec.categories).values;
    auto [outflow, inflow] = data::build_flows(city.trips, spec.n, spec.intervals);
    feats.outflow = std::move(outflow.values);
    feats.inflow = std::move(inflow.values);

    train::TrainConfig tc;
    tc.seed = seed;
    tc.d = 4;
    tc.enc_hidden = 16;
    tc.pred_hidden = 8;

    model::ModelConfig mc;
    mc.attr_dim = feats.attr.cols();
    mc.mob_dim = feats.outflow.cols();
    mc.d = tc.d;
    mc.enc_hidden = tc.enc_hidden;
    mc.pred_hidden = tc.pred_hidden;
    model::ReCPModel m(mc, seed);

    const train::Preprocessors pre = train::fit_preprocessors(feats);
    const train::AnchorInputs anchors = train::make_anchor_inputs(feats, pre);
    const train::EpochPositives positives = train::draw_epoch_positives(feats, pre, tc, 0);
    auto loss_fn = [&](bool with_grad) {
        Tape t;
        auto [loss_id, parts] = train::build_objective(t, m, anchors, positives, tc, true);
        if (with_grad) t.backward(loss_id);
        return parts.total;
    };
    const double err = grad_check(loss_fn, m.params(), 1e-5, 200, derive_seed(seed, 0x6Cu));
    meta::write_run_meta(o.out_dir, "gradcheck", 0, seed, seconds_since(t0));
    std::printf("gradcheck: full objective on n=%d, d=%d toy: max rel err %.3g (threshold 1e-4)\n",
                spec.n, tc.d, err);
    if (err >= 1e-4) {
        std::fprintf(stderr, "gradcheck FAILED\n");
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"recp: multi-view contrastive-prediction region embeddings"};
    app.require_subcommand(1);

    CommonOpts gen, tr, ec, ep, ab, gc;
    std::string tr_ablation;
    std::string ec_embedding, ec_labels;
    int ec_k = 0;
    std::string ep_embedding, ep_checkins;
    int ab_seeds = 5, ab_jobs = 1;
    bool gc_toy = true;

    auto add_common = [](CLI::App* cmd, CommonOpts& o, bool with_data) {
        cmd->add_option("--config", o.config_path, "config file (TOML-style)");
        cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        if (with_data) cmd->add_option("--data", o.data_dir, "input data directory (default: --out)");
        auto* s = cmd->add_option("--seed", o.seed, "seed override");
        cmd->callback([&o, s] { o.seed_set = s->count() > 0; });
    };

    CLI::App* c_gen = app.add_subcommand("generate", "generate a synthetic city");
    gen.out_dir = "data";
    add_common(c_gen, gen, false);

    CLI::App* c_tr = app.add_subcommand("train", "train embeddings on a workspace");
    add_common(c_tr, tr, true);
    c_tr->add_option("--ablation", tr_ablation, "full|no_cl|no_rec|no_iv|no_dp");

    CLI::App* c_ec = app.add_subcommand("eval-cluster", "k-means clustering vs ground truth");
    add_common(c_ec, ec, false);
    c_ec->add_option("--embedding", ec_embedding, "embedding.csv (default <out>/embedding.csv)");
    c_ec->add_option("--labels", ec_labels, "ground-truth labels csv (default <out>/labels.csv)");
    c_ec->add_option("--k", ec_k, "cluster count (default from config eval.k)");

    CLI::App* c_ep = app.add_subcommand("eval-popularity", "Lasso popularity regression");
    add_common(c_ep, ep, false);
    c_ep->add_option("--embedding", ep_embedding, "embedding.csv (default <out>/embedding.csv)");
    c_ep->add_option("--checkins", ep_checkins, "checkins csv (default <out>/checkins.csv)");

    CLI::App* c_ab = app.add_subcommand("ablate", "train + evaluate all ablation variants");
    add_common(c_ab, ab, true);
    c_ab->add_option("--seeds", ab_seeds, "number of seeds per variant")->capture_default_str();
    c_ab->add_option("--jobs", ab_jobs, "concurrent runs")->capture_default_str();

    CLI::App* c_gc = app.add_subcommand("gradcheck", "finite-difference check of the objective");
    add_common(c_gc, gc, false);
    c_gc->add_flag("--toy", gc_toy, "toy-scale check (default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_gen->parsed()) return cmd_generate(gen);
        if (c_tr->parsed()) return cmd_train(tr, tr_ablation);
        if (c_ec->parsed()) return cmd_eval_cluster(ec, ec_embedding, ec_labels, ec_k);
        if (c_ep->parsed()) return cmd_eval_popularity(ep, ep_embedding, ep_checkins);
        if (c_ab->parsed()) return cmd_ablate(ab, ab_seeds, ab_jobs);
        if (c_gc->parsed()) return cmd_gradcheck(gc, gc_toy);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "recp: numerical failure: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "recp: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "recp: %s\n", e.what());
        return 2;
    }
    return 1;
}
