#include "recp/model.hpp"

#include <cstring>
#include <fstream>

#include "recp/errors.hpp"

namespace recp::model {

long param_count(const MLPSpec& spec) {
    const auto& s = spec.layer_sizes;
    if (s.size() < 2) throw ConfigError("MLPSpec needs at least one layer");
    long total = 0;
    for (size_t i = 1; i < s.size(); ++i) {
        total += static_cast<long>(s[i - 1]) * s[i] + s[i];
        const bool hidden = i + 1 < s.size();
        if (hidden && spec.use_batch_norm) total += 2L * s[i];  // gamma, beta
    }
    return total;
}

Mlp::Mlp(std::string name, MLPSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
    const auto& s = spec_.layer_sizes;
    if (s.size() < 2) throw ConfigError("MLPSpec needs at least one layer");
    for (size_t i = 1; i < s.size(); ++i) {
        const std::string li = std::to_string(i - 1);
        weights.emplace_back(name_ + ".W" + li, s[i - 1], s[i]);
        biases.emplace_back(name_ + ".b" + li, 1, s[i]);
        const bool hidden = i + 1 < s.size();
        if (hidden && spec_.use_batch_norm) {
            bn_gamma.emplace_back(name_ + ".bn_gamma" + li, 1, s[i]);
            bn_gamma.back().fill(1.0);
            bn_beta.emplace_back(name_ + ".bn_beta" + li, 1, s[i]);
            bn_state.emplace_back(s[i]);
        }
    }
    if (value_count() != param_count(spec_))
        throw NumericError(name_ + ": allocated parameter count " +
                           std::to_string(value_count()) + " != closed form " +
                           std::to_string(param_count(spec_)));
}

void Mlp::init(Rng& rng) {
    const auto& s = spec_.layer_sizes;
    for (size_t i = 0; i < weights.size(); ++i)
        weights[i].init_glorot(rng, s[i], s[i + 1]);
    // biases stay zero; bn gamma stays 1, beta 0
}

Tape::Id Mlp::forward(Tape& t, Tape::Id x, bool train) {
    Tape::Id h = x;
    const size_t nlayers = weights.size();
    for (size_t i = 0; i < nlayers; ++i) {
        Tape::Id w = t.param(weights[i]);
        Tape::Id b = t.param(biases[i]);
        h = t.add_rowvec(t.matmul(h, w), b);
        const bool hidden = i + 1 < nlayers;
        if (hidden) {
            if (spec_.use_batch_norm) {
                Tape::Id g = t.param(bn_gamma[i]);
                Tape::Id be = t.param(bn_beta[i]);
                h = t.batch_norm(h, g, be, bn_state[i], train);
            }
            h = t.relu(h);
        }
    }
    return h;
}

DenseMatrix Mlp::forward_eval(const DenseMatrix& x) const {
    DenseMatrix h = x, tmp;
    const size_t nlayers = weights.size();
    for (size_t i = 0; i < nlayers; ++i) {
        kern::gemm_nn(h, weights[i].value, tmp);
        kern::add_rowvec(tmp, biases[i].value, h);
        const bool hidden = i + 1 < nlayers;
        if (hidden) {
            if (spec_.use_batch_norm) {
                kern::batchnorm_eval_fw(h, bn_gamma[i].value, bn_beta[i].value,
                                        bn_state[i].running_mean, bn_state[i].running_var, 1e-5,
                                        tmp);
                h = tmp;
            }
            kern::relu_fw(h, tmp);
            h = tmp;
        }
    }
    return h;
}

void Mlp::collect_params(std::vector<ParamTensor*>& out) {
    for (auto& p : weights) out.push_back(&p);
    for (auto& p : biases) out.push_back(&p);
    for (auto& p : bn_gamma) out.push_back(&p);
    for (auto& p : bn_beta) out.push_back(&p);
}

long Mlp::value_count() const {
    long total = 0;
    for (const auto& p : weights) total += static_cast<long>(p.value.size());
    for (const auto& p : biases) total += static_cast<long>(p.value.size());
    for (const auto& p : bn_gamma) total += static_cast<long>(p.value.size());
    for (const auto& p : bn_beta) total += static_cast<long>(p.value.size());
    return total;
}

ViewNet::ViewNet(const std::string& name, int input_dim, int hidden, int d)
    : encoder(name + ".enc", MLPSpec{{input_dim, hidden, hidden, d}, false}),
      decoder(name + ".dec", MLPSpec{{d, hidden, hidden, input_dim}, false}) {}

DualPredictor::DualPredictor(const std::string& name, int d, int hidden)
    : net(name, MLPSpec{{d, hidden, hidden, d}, true}) {}

ReCPModel::ReCPModel(const ModelConfig& cfg, uint64_t seed)
    : attr("attr", cfg.attr_dim, cfg.enc_hidden, cfg.d),
      outflow("outflow", cfg.mob_dim, cfg.enc_hidden, cfg.d),
      inflow("inflow", cfg.mob_dim, cfg.enc_hidden, cfg.d),
      pred_a2m("pred_a2m", cfg.d, cfg.pred_hidden),
      pred_m2a("pred_m2a", cfg.d, cfg.pred_hidden),
      cfg_(cfg) {
    long actual = 0;
    for (ParamTensor* p : params()) actual += static_cast<long>(p->value.size());
    if (actual != expected_param_count())
        throw NumericError("model parameter count " + std::to_string(actual) +
                           " != expected " + std::to_string(expected_param_count()));
    Rng rng = make_rng(derive_seed(seed, 0x10D31u));
    attr.encoder.init(rng);
    attr.decoder.init(rng);
    outflow.encoder.init(rng);
    outflow.decoder.init(rng);
    inflow.encoder.init(rng);
    inflow.decoder.init(rng);
    pred_a2m.net.init(rng);
    pred_m2a.net.init(rng);
}

std::vector<ParamTensor*> ReCPModel::params() {
    std::vector<ParamTensor*> out;
    attr.encoder.collect_params(out);
    attr.decoder.collect_params(out);
    outflow.encoder.collect_params(out);
    outflow.decoder.collect_params(out);
    inflow.encoder.collect_params(out);
    inflow.decoder.collect_params(out);
    pred_a2m.net.collect_params(out);
    pred_m2a.net.collect_params(out);
    return out;
}

long ReCPModel::expected_param_count() const {
    const MLPSpec enc_a{{cfg_.attr_dim, cfg_.enc_hidden, cfg_.enc_hidden, cfg_.d}, false};
    const MLPSpec dec_a{{cfg_.d, cfg_.enc_hidden, cfg_.enc_hidden, cfg_.attr_dim}, false};
    const MLPSpec enc_m{{cfg_.mob_dim, cfg_.enc_hidden, cfg_.enc_hidden, cfg_.d}, false};
    const MLPSpec dec_m{{cfg_.d, cfg_.enc_hidden, cfg_.enc_hidden, cfg_.mob_dim}, false};
    const MLPSpec pred{{cfg_.d, cfg_.pred_hidden, cfg_.pred_hidden, cfg_.d}, true};
    return param_count(enc_a) + param_count(dec_a) + 2 * (param_count(enc_m) + param_count(dec_m)) +
           2 * param_count(pred);
}

Tape::Id fuse_mobility(Tape& t, Tape::Id z_s, Tape::Id z_d) {
    return t.scale(t.add(z_s, z_d), 0.5);
}

DenseMatrix fuse_mobility(const DenseMatrix& z_s, const DenseMatrix& z_d) {
    require_same_shape(z_s, z_d, "fuse_mobility");
    DenseMatrix out;
    kern::ew_add(z_s, z_d, out);
    kern::ew_scale(out, 0.5, out);
    return out;
}

// --- checkpoint --------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'E', 'C', 'P', 'C', 'K', 'P', '1'};

struct NamedMatrix {
    std::string name;
    DenseMatrix* m;
};

std::vector<NamedMatrix> checkpoint_entries(ReCPModel& model) {
    std::vector<NamedMatrix> out;
    for (ParamTensor* p : model.params()) out.push_back({p->name, &p->value});
    auto add_bn = [&out](const std::string& prefix, Mlp& net) {
        for (size_t i = 0; i < net.bn_state.size(); ++i) {
            out.push_back({prefix + ".bn_rmean" + std::to_string(i),
                           &net.bn_state[i].running_mean});
            out.push_back({prefix + ".bn_rvar" + std::to_string(i),
                           &net.bn_state[i].running_var});
        }
    };
    add_bn("pred_a2m", model.pred_a2m.net);
    add_bn("pred_m2a", model.pred_m2a.net);
    return out;
}

}  // namespace

void save_checkpoint(ReCPModel& m, uint64_t config_hash, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint " + path);
    f.write(kMagic, 8);
    f.write(reinterpret_cast<const char*>(&config_hash), 8);
    auto entries = checkpoint_entries(m);
    const uint32_t count = static_cast<uint32_t>(entries.size());
    f.write(reinterpret_cast<const char*>(&count), 4);
    for (auto& [name, mat] : entries) {
        const uint32_t len = static_cast<uint32_t>(name.size());
        const int32_t r = mat->rows(), c = mat->cols();
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(name.data(), len);
        f.write(reinterpret_cast<const char*>(&r), 4);
        f.write(reinterpret_cast<const char*>(&c), 4);
        f.write(reinterpret_cast<const char*>(mat->data()),
                static_cast<std::streamsize>(mat->size() * sizeof(double)));
    }
    if (!f) throw DataError("short write to checkpoint " + path);
}

void load_checkpoint(ReCPModel& m, uint64_t config_hash, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError(path + ": not a recp checkpoint");
    uint64_t hash = 0;
    f.read(reinterpret_cast<char*>(&hash), 8);
    if (hash != config_hash)
        throw DataError(path + ": config hash mismatch (checkpoint was written by a different "
                               "configuration)");
    uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 4);
    auto entries = checkpoint_entries(m);
    if (count != entries.size())
        throw DataError(path + ": tensor count mismatch, expected " +
                        std::to_string(entries.size()) + " got " + std::to_string(count));
    for (auto& [name, mat] : entries) {
        uint32_t len = 0;
        f.read(reinterpret_cast<char*>(&len), 4);
        std::string got(len, '\0');
        f.read(got.data(), len);
        int32_t r = 0, c = 0;
        f.read(reinterpret_cast<char*>(&r), 4);
        f.read(reinterpret_cast<char*>(&c), 4);
        if (!f || got != name || r != mat->rows() || c != mat->cols())
            throw DataError(path + ": tensor '" + got + "' does not match expected '" + name +
                            "' " + mat->shape_str());
        f.read(reinterpret_cast<char*>(mat->data()),
               static_cast<std::streamsize>(mat->size() * sizeof(double)));
    }
    if (!f) throw DataError(path + ": truncated checkpoint");
}

}  // namespace recp::model
