#include "recp/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "recp/augment.hpp"
#include "recp/errors.hpp"

namespace recp::train {

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::Full;
    if (s == "no_cl") return Ablation::NoCl;
    if (s == "no_rec") return Ablation::NoRec;
    if (s == "no_iv") return Ablation::NoIv;
    if (s == "no_dp") return Ablation::NoDp;
    throw ConfigError("unknown ablation variant '" + s +
                      "' (expected full|no_cl|no_rec|no_iv|no_dp)");
}

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::Full: return "full";
        case Ablation::NoCl: return "no_cl";
        case Ablation::NoRec: return "no_rec";
        case Ablation::NoIv: return "no_iv";
        case Ablation::NoDp: return "no_dp";
    }
    return "full";
}

const std::vector<Ablation>& all_ablations() {
    static const std::vector<Ablation> v = {Ablation::Full, Ablation::NoCl, Ablation::NoRec,
                                            Ablation::NoIv, Ablation::NoDp};
    return v;
}

EnabledTerms ablation_mask(Ablation v) {
    EnabledTerms t;
    switch (v) {
        case Ablation::Full: break;
        case Ablation::NoCl: t.intra_cl = false; break;
        case Ablation::NoRec: t.intra_rec = false; break;
        case Ablation::NoIv:
            t.inter_cl = false;
            t.inter_dp = false;
            break;
        case Ablation::NoDp: t.inter_dp = false; break;
    }
    return t;
}

Preprocessors fit_preprocessors(const Features& raw) {
    Preprocessors p;
    p.attr.fit(raw.attr);
    p.outflow.fit(raw.outflow);
    p.inflow.fit(raw.inflow);
    return p;
}

namespace {

// rng stream tags for the per-epoch augmentation draws
enum : uint64_t { kAugAttr = 1, kAugOut = 2, kAugIn = 3 };

std::vector<DenseMatrix> draw_positives(const DenseMatrix& raw, const data::Preprocessor& pre,
                                        int k, double drop_rate, uint64_t seed, int epoch,
                                        uint64_t view_tag) {
    std::vector<DenseMatrix> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        Rng rng = make_rng(derive_seed(seed, view_tag, static_cast<uint64_t>(epoch),
                                       static_cast<uint64_t>(i)));
        DenseMatrix sample = augment::augment_matrix(raw, drop_rate, rng);
        pre.transform_inplace(sample);
        out.push_back(std::move(sample));
    }
    return out;
}

}  // namespace

AnchorInputs make_anchor_inputs(const Features& raw, const Preprocessors& pre) {
    AnchorInputs a;
    a.x_a = pre.attr.transform(raw.attr);
    a.x_s = pre.outflow.transform(raw.outflow);
    a.x_d = pre.inflow.transform(raw.inflow);
    return a;
}

EpochPositives draw_epoch_positives(const Features& raw, const Preprocessors& pre,
                                    const TrainConfig& cfg, int epoch) {
    EpochPositives b;
    if (ablation_mask(cfg.ablation).intra_cl) {
        b.pos_a = draw_positives(raw.attr, pre.attr, cfg.k_attr, cfg.drop_rate, cfg.seed, epoch,
                                 kAugAttr);
        b.pos_s = draw_positives(raw.outflow, pre.outflow, cfg.k_mob, cfg.drop_rate, cfg.seed,
                                 epoch, kAugOut);
        b.pos_d = draw_positives(raw.inflow, pre.inflow, cfg.k_mob, cfg.drop_rate, cfg.seed, epoch,
                                 kAugIn);
    }
    return b;
}

std::pair<Tape::Id, losses::LossBreakdown> build_objective(Tape& t, model::ReCPModel& m,
                                                           const AnchorInputs& anchors,
                                                           const EpochPositives& positives,
                                                           const TrainConfig& cfg,
                                                           bool train_mode) {
    const EnabledTerms mask = ablation_mask(cfg.ablation);
    losses::LossBreakdown parts;
    parts.mu = cfg.mu;
    parts.alpha = cfg.alpha;
    parts.lambda1 = cfg.lambda1;
    parts.lambda2 = cfg.lambda2;
    parts.tau = cfg.tau;

    const Tape::Id x_a = t.leaf(anchors.x_a);
    const Tape::Id x_s = t.leaf(anchors.x_s);
    const Tape::Id x_d = t.leaf(anchors.x_d);
    const Tape::Id z_a = m.encode(t, m.attr, x_a, train_mode);
    const Tape::Id z_s = m.encode(t, m.outflow, x_s, train_mode);
    const Tape::Id z_d = m.encode(t, m.inflow, x_d, train_mode);
    const Tape::Id z_m = model::fuse_mobility(t, z_s, z_d);

    Tape::Id total = -1;
    auto accumulate = [&t, &total](Tape::Id term, double weight) {
        const Tape::Id scaled = weight == 1.0 ? term : t.scale(term, weight);
        total = total < 0 ? scaled : t.add(total, scaled);
    };

    if (mask.inter_dp) {
        const Tape::Id l_dp = losses::dual_prediction(t, z_a, z_m, m.pred_a2m, m.pred_m2a,
                                                      train_mode);
        parts.l_dp = t.scalar(l_dp);
        accumulate(l_dp, 1.0);
    }
    if (mask.inter_cl) {
        const Tape::Id l_ic = losses::inter_contrastive(t, z_a, z_m, cfg.alpha);
        parts.l_cl_inter = t.scalar(l_ic);
        accumulate(l_ic, 1.0);
    }
    if (mask.intra_cl) {
        std::vector<Tape::Id> pos_a, pos_m;
        for (const DenseMatrix& p : positives.pos_a)
            pos_a.push_back(m.encode(t, m.attr, t.leaf(p), train_mode));
        for (size_t k = 0; k < positives.pos_s.size(); ++k) {
            const Tape::Id ps = m.encode(t, m.outflow, t.leaf(positives.pos_s[k]), train_mode);
            const Tape::Id pd = m.encode(t, m.inflow, t.leaf(positives.pos_d[k]), train_mode);
            pos_m.push_back(model::fuse_mobility(t, ps, pd));
        }
        const Tape::Id l_cl_a = losses::intra_contrastive(t, z_a, pos_a, cfg.tau);
        const Tape::Id l_cl_m = losses::intra_contrastive(t, z_m, pos_m, cfg.tau);
        parts.l_cl_a = t.scalar(l_cl_a);
        parts.l_cl_m = t.scalar(l_cl_m);
        accumulate(l_cl_a, cfg.lambda1 * cfg.mu);
        accumulate(l_cl_m, cfg.lambda1);
    }
    if (mask.intra_rec) {
        const Tape::Id l_rec_a = losses::reconstruction(t, x_a, m.decode(t, m.attr, z_a, train_mode));
        const Tape::Id l_rec_s =
            losses::reconstruction(t, x_s, m.decode(t, m.outflow, z_s, train_mode));
        const Tape::Id l_rec_d =
            losses::reconstruction(t, x_d, m.decode(t, m.inflow, z_d, train_mode));
        parts.l_rec_a = t.scalar(l_rec_a);
        parts.l_rec_s = t.scalar(l_rec_s);
        parts.l_rec_d = t.scalar(l_rec_d);
        accumulate(l_rec_a, cfg.lambda2 * cfg.mu);
        accumulate(l_rec_s, cfg.lambda2);
        accumulate(l_rec_d, cfg.lambda2);
    }
    if (total < 0)
        throw ConfigError("ablation '" + to_string(cfg.ablation) + "' leaves no loss terms");
    parts.total = t.scalar(total);
    return {total, parts};
}

TrainOutput train(const TrainConfig& cfg, const Features& raw) {
    const int n = raw.attr.rows();
    if (n < 2) throw DataError("train: need at least 2 regions, got " + std::to_string(n));
    if (raw.outflow.rows() != n || raw.inflow.rows() != n)
        throw DimensionError("train: view row counts differ: attr " + raw.attr.shape_str() +
                             ", outflow " + raw.outflow.shape_str() + ", inflow " +
                             raw.inflow.shape_str());
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.lr0 <= 0.0) throw ConfigError("train: lr0 must be positive");

    const Preprocessors pre = fit_preprocessors(raw);
    model::ModelConfig mc;
    mc.attr_dim = raw.attr.cols();
    mc.mob_dim = raw.outflow.cols();
    mc.d = cfg.d;
    mc.enc_hidden = cfg.enc_hidden;
    mc.pred_hidden = cfg.pred_hidden;

    TrainOutput out;
    out.trained = std::make_unique<model::ReCPModel>(mc, cfg.seed);
    model::ReCPModel& m = *out.trained;
    const std::vector<ParamTensor*> params = m.params();
    out.history.reserve(cfg.epochs);

    const AnchorInputs anchors = make_anchor_inputs(raw, pre);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr0 * (1.0 - static_cast<double>(epoch) / cfg.epochs);
        const EpochPositives positives = draw_epoch_positives(raw, pre, cfg, epoch);
        Tape t;
        auto [loss_id, parts] = build_objective(t, m, anchors, positives, cfg, true);
        if (!parts.all_finite()) {
            std::ostringstream msg;
            msg << "non-finite loss at epoch " << epoch << ":";
            auto put = [&msg](const char* name, const std::optional<double>& v) {
                if (v) msg << ' ' << name << '=' << *v;
            };
            put("l_cl_a", parts.l_cl_a);
            put("l_cl_m", parts.l_cl_m);
            put("l_rec_a", parts.l_rec_a);
            put("l_rec_s", parts.l_rec_s);
            put("l_rec_d", parts.l_rec_d);
            put("l_cl_inter", parts.l_cl_inter);
            put("l_dp", parts.l_dp);
            msg << " total=" << parts.total;
            throw NumericError(msg.str());
        }
        zero_grads(params);
        t.backward(loss_id);
        adam_step(params, lr);
        out.history.push_back(parts);
        if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch == cfg.epochs - 1))
            std::fprintf(stderr, "[recp] epoch %4d  lr %.5f  loss %.6g\n", epoch, lr, parts.total);
    }

    out.z_attr = m.attr.encoder.forward_eval(anchors.x_a);
    DenseMatrix z_s = m.outflow.encoder.forward_eval(anchors.x_s);
    DenseMatrix z_d = m.inflow.encoder.forward_eval(anchors.x_d);
    out.z_mob = model::fuse_mobility(z_s, z_d);
    out.embedding = concat_cols(out.z_attr, out.z_mob);
    if (!out.embedding.all_finite()) throw NumericError("final embedding contains non-finite values");
    return out;
}

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("concat_cols: row mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    DenseMatrix out(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

void export_embedding(const DenseMatrix& z_a, const DenseMatrix& z_m, const std::string& path) {
    const DenseMatrix e = concat_cols(z_a, z_m);
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    std::fprintf(f, "region");
    for (int j = 0; j < e.cols(); ++j) std::fprintf(f, ",e_%d", j);
    std::fprintf(f, "\n");
    for (int i = 0; i < e.rows(); ++i) {
        std::fprintf(f, "%d", i);
        for (int j = 0; j < e.cols(); ++j) std::fprintf(f, ",%.17g", e(i, j));
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

DenseMatrix load_embedding(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("region,e_0", 0) != 0)
        throw DataError(path + ": not an embedding file");
    std::vector<std::vector<double>> rows;
    long expected_region = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                if (std::stol(cell) != expected_region)
                    throw DataError(path + ": regions out of order at row " +
                                    std::to_string(expected_region));
                first = false;
            } else {
                vals.push_back(std::stod(cell));
            }
        }
        if (!rows.empty() && vals.size() != rows.front().size())
            throw DataError(path + ": ragged rows");
        rows.push_back(std::move(vals));
        ++expected_region;
    }
    if (rows.empty()) throw DataError(path + ": no embedding rows");
    DenseMatrix e(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < e.rows(); ++i)
        for (int j = 0; j < e.cols(); ++j) e(i, j) = rows[i][j];
    return e;
}

void write_loss_history(const std::vector<losses::LossBreakdown>& history,
                        const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write " + path);
    std::fprintf(f, "epoch,l_cl_a,l_cl_m,l_rec_a,l_rec_s,l_rec_d,l_cl_inter,l_dp,total\n");
    auto cell = [f](const std::optional<double>& v) {
        if (v)
            std::fprintf(f, ",%.17g", *v);
        else
            std::fprintf(f, ",");
    };
    for (size_t e = 0; e < history.size(); ++e) {
        const auto& h = history[e];
        std::fprintf(f, "%zu", e);
        cell(h.l_cl_a);
        cell(h.l_cl_m);
        cell(h.l_rec_a);
        cell(h.l_rec_s);
        cell(h.l_rec_d);
        cell(h.l_cl_inter);
        cell(h.l_dp);
        std::fprintf(f, ",%.17g\n", h.total);
    }
    std::fclose(f);
}

}  // namespace recp::train
