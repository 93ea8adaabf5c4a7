#pragma once

#include <memory>
#include <string>
#include <vector>

#include "recp/data.hpp"
#include "recp/losses.hpp"
#include "recp/model.hpp"

namespace recp::train {

enum class Ablation { Full, NoCl, NoRec, NoIv, NoDp };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);
const std::vector<Ablation>& all_ablations();

// Which loss term groups an ablation keeps.
struct EnabledTerms {
    bool intra_cl = true;
    bool intra_rec = true;
    bool inter_cl = true;
    bool inter_dp = true;

    bool operator==(const EnabledTerms&) const = default;
};

EnabledTerms ablation_mask(Ablation v);

struct TrainConfig {
    int epochs = 400;
    double lr0 = 0.01;
    uint64_t seed = 0;
    int d = 96;
    int enc_hidden = 128;
    int pred_hidden = 96;
    double tau = 0.5;
    double mu = 1e-4;
    double alpha = 9.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int k_attr = 3;
    int k_mob = 4;
    double drop_rate = 0.2;
    Ablation ablation = Ablation::Full;
    int log_every = 0;  // progress line every N epochs to stderr; 0 = silent
};

// Raw count matrices straight from the builders; preprocessing happens inside.
struct Features {
    DenseMatrix attr;     // n x F
    DenseMatrix outflow;  // n x (n * N_t)
    DenseMatrix inflow;   // n x (n * N_t)
};

struct Preprocessors {
    data::Preprocessor attr, outflow, inflow;
};

Preprocessors fit_preprocessors(const Features& raw);

// Preprocessed anchor matrices; fixed across epochs.
struct AnchorInputs {
    DenseMatrix x_a, x_s, x_d;
};

AnchorInputs make_anchor_inputs(const Features& raw, const Preprocessors& pre);

// One epoch's freshly-augmented, preprocessed positive sample matrices.
struct EpochPositives {
    std::vector<DenseMatrix> pos_a;
    std::vector<DenseMatrix> pos_s;
    std::vector<DenseMatrix> pos_d;
};

EpochPositives draw_epoch_positives(const Features& raw, const Preprocessors& pre,
                                    const TrainConfig& cfg, int epoch);

// Records the enabled losses on the tape; returns the total node and the
// per-term scalar values.
std::pair<Tape::Id, losses::LossBreakdown> build_objective(Tape& t, model::ReCPModel& m,
                                                           const AnchorInputs& anchors,
                                                           const EpochPositives& positives,
                                                           const TrainConfig& cfg, bool train_mode);

struct TrainOutput {
    DenseMatrix z_attr;     // n x d, eval mode, final epoch
    DenseMatrix z_mob;      // n x d
    DenseMatrix embedding;  // n x 2d, [z_attr | z_mob]
    std::vector<losses::LossBreakdown> history;
    std::unique_ptr<model::ReCPModel> trained;
};

// Full-batch training: per epoch re-augment, encode all views, apply the
// ablation's losses, backprop, Adam step at lr(t) = lr0 * (1 - t/epochs).
// Throws NumericError with per-term diagnostics if the loss goes non-finite.
TrainOutput train(const TrainConfig& cfg, const Features& raw);

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b);

// CSV `region,e_0..e_{2d-1}`; reloads to 1e-12 (written with 17 significant
// digits, so round-trips exactly).
void export_embedding(const DenseMatrix& z_a, const DenseMatrix& z_m, const std::string& path);
DenseMatrix load_embedding(const std::string& path);

void write_loss_history(const std::vector<losses::LossBreakdown>& history,
                        const std::string& path);

}  // namespace recp::train
