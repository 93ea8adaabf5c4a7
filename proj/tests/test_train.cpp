#include <set>

#include "doctest.h"
#include "recp/data.hpp"
#include "recp/synth.hpp"
#include "recp/train.hpp"
#include "test_helpers.hpp"

using namespace recp;
using namespace recp::train;
using recp::testing::read_file;
using recp::testing::TempDir;

namespace {

// small planted city so the 50-epoch runs in this file stay fast
Features tiny_city_features(uint64_t seed = 7) {
    synth::CitySpec spec;
    spec.n = 24;
    spec.g = 3;
    spec.categories = 12;
    spec.intervals = 6;
    spec.trips_total = 4000;
    spec.seed = seed;
    const synth::City city = synth::generate_city(spec);
    Features f;
    f.attr = data::build_attributes(city.pois, spec.n, spec.categories).values;
    auto [s, d] = data::build_flows(city.trips, spec.n, spec.intervals);
    f.outflow = std::move(s.values);
    f.inflow = std::move(d.values);
    return f;
}

TrainConfig tiny_config(uint64_t seed, int epochs) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.d = 8;
    cfg.enc_hidden = 16;
    cfg.pred_hidden = 8;
    return cfg;
}

}  // namespace

TEST_CASE("ablation masks cover the paper variants and are pairwise distinct") {
    CHECK(ablation_mask(Ablation::Full) == EnabledTerms{true, true, true, true});
    CHECK(ablation_mask(Ablation::NoCl) == EnabledTerms{false, true, true, true});
    CHECK(ablation_mask(Ablation::NoRec) == EnabledTerms{true, false, true, true});
    CHECK(ablation_mask(Ablation::NoIv) == EnabledTerms{true, true, false, false});
    CHECK(ablation_mask(Ablation::NoDp) == EnabledTerms{true, true, true, false});
    std::set<std::tuple<bool, bool, bool, bool>> seen;
    for (Ablation v : all_ablations()) {
        const EnabledTerms m = ablation_mask(v);
        seen.insert({m.intra_cl, m.intra_rec, m.inter_cl, m.inter_dp});
    }
    CHECK(seen.size() == 5);
    CHECK(ablation_from_string("no_iv") == Ablation::NoIv);
    CHECK_THROWS_AS(ablation_from_string("bogus"), ConfigError);
}

TEST_CASE("one epoch performs exactly one optimizer step") {
    const Features f = tiny_city_features();
    TrainOutput out = recp::train::train(tiny_config(1, 1), f);
    for (ParamTensor* p : out.trained->params()) CHECK(p->step_count == 1);
    CHECK(out.history.size() == 1);
    CHECK(out.embedding.rows() == 24);
    CHECK(out.embedding.cols() == 16);  // 2d
}

TEST_CASE("loss at epoch 50 is below epoch 1 for five seeds") {
    const Features f = tiny_city_features();
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        const TrainOutput out = recp::train::train(tiny_config(seed, 50), f);
        CHECK(out.history.back().total < out.history.front().total);
    }
}

TEST_CASE("each breakdown recombines to its recorded total") {
    const Features f = tiny_city_features();
    const TrainOutput out = recp::train::train(tiny_config(3, 10), f);
    for (const auto& h : out.history) CHECK(std::fabs(h.total - h.recombine()) < 1e-10);
}

TEST_CASE("no_iv histories exclude both inter-view terms") {
    const Features f = tiny_city_features();
    TrainConfig cfg = tiny_config(2, 3);
    cfg.ablation = Ablation::NoIv;
    const TrainOutput out = recp::train::train(cfg, f);
    for (const auto& h : out.history) {
        CHECK_FALSE(h.l_cl_inter.has_value());
        CHECK_FALSE(h.l_dp.has_value());
        CHECK(h.l_cl_a.has_value());
        CHECK(h.l_rec_s.has_value());
    }
}

TEST_CASE("reconstruction-only training strictly reduces round-trip error") {
    const Features f = tiny_city_features();
    TrainConfig cfg = tiny_config(4, 50);
    cfg.ablation = Ablation::NoIv;  // drops the inter-view terms
    cfg.lambda1 = 0.0;              // zeroes the contrastive contribution
    cfg.lr0 = 0.003;
    const TrainOutput out = recp::train::train(cfg, f);
    for (size_t e = 1; e < out.history.size(); ++e) {
        const double prev = *out.history[e - 1].l_rec_s + *out.history[e - 1].l_rec_d +
                            cfg.mu * *out.history[e - 1].l_rec_a;
        const double cur = *out.history[e].l_rec_s + *out.history[e].l_rec_d +
                           cfg.mu * *out.history[e].l_rec_a;
        CHECK(cur < prev);
    }
}

TEST_CASE("embedding exports round-trip and reruns are byte-identical") {
    const Features f = tiny_city_features();
    TempDir dir("emb");

    const TrainOutput a = recp::train::train(tiny_config(11, 5), f);
    export_embedding(a.z_attr, a.z_mob, dir.file("a.csv"));
    const DenseMatrix reloaded = load_embedding(dir.file("a.csv"));
    CHECK(reloaded == a.embedding);

    const TrainOutput b = recp::train::train(tiny_config(11, 5), f);
    export_embedding(b.z_attr, b.z_mob, dir.file("b.csv"));
    CHECK(read_file(dir.file("a.csv")) == read_file(dir.file("b.csv")));

    const TrainOutput c = recp::train::train(tiny_config(12, 5), f);
    export_embedding(c.z_attr, c.z_mob, dir.file("c.csv"));
    CHECK(read_file(dir.file("a.csv")) != read_file(dir.file("c.csv")));
}

TEST_CASE("loss history csv has one row per epoch and blank disabled terms") {
    const Features f = tiny_city_features();
    TrainConfig cfg = tiny_config(5, 4);
    cfg.ablation = Ablation::NoDp;
    const TrainOutput out = recp::train::train(cfg, f);
    TempDir dir("hist");
    write_loss_history(out.history, dir.file("loss_history.csv"));
    const std::string text = read_file(dir.file("loss_history.csv"));
    CHECK(text.rfind("epoch,l_cl_a,l_cl_m,l_rec_a,l_rec_s,l_rec_d,l_cl_inter,l_dp,total", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 epochs
    // the l_dp column is empty under no_dp: ",," before the total column
    CHECK(text.find(",,") != std::string::npos);
}

TEST_CASE("train validates inputs") {
    Features f = tiny_city_features();
    TrainConfig cfg = tiny_config(1, 0);
    CHECK_THROWS_AS(recp::train::train(cfg, f), ConfigError);
    cfg = tiny_config(1, 1);
    cfg.lr0 = 0.0;
    CHECK_THROWS_AS(recp::train::train(cfg, f), ConfigError);
    f.inflow = DenseMatrix(3, 4);
    CHECK_THROWS_AS(recp::train::train(tiny_config(1, 1), f), DimensionError);
}
