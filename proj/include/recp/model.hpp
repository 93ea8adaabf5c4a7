#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recp/tape.hpp"

namespace recp::model {

// Fully-connected stack: linear layers with ReLU between hidden layers and a
// linear output. use_batch_norm inserts BN between each hidden linear and its
// ReLU (the dual predictors use this; encoders/decoders do not).
struct MLPSpec {
    std::vector<int> layer_sizes;  // [input, hidden..., output]
    bool use_batch_norm = false;
};

long param_count(const MLPSpec& spec);

class Mlp {
  public:
    Mlp() = default;
    Mlp(std::string name, MLPSpec spec);

    void init(Rng& rng);
    Tape::Id forward(Tape& t, Tape::Id x, bool train);
    DenseMatrix forward_eval(const DenseMatrix& x) const;

    void collect_params(std::vector<ParamTensor*>& out);
    long value_count() const;
    const MLPSpec& spec() const { return spec_; }

    std::vector<ParamTensor> weights;
    std::vector<ParamTensor> biases;
    std::vector<ParamTensor> bn_gamma;
    std::vector<ParamTensor> bn_beta;
    std::vector<BatchNormState> bn_state;

  private:
    std::string name_;
    MLPSpec spec_;
};

// Encoder/decoder pair for one view; the decoder mirrors the encoder.
struct ViewNet {
    Mlp encoder;
    Mlp decoder;

    ViewNet() = default;
    ViewNet(const std::string& name, int input_dim, int hidden, int d);
};

// Cross-view regression net F^(a) or F^(m): d -> hidden -> hidden -> d with
// batch norm + ReLU on the hidden layers.
struct DualPredictor {
    Mlp net;

    DualPredictor() = default;
    DualPredictor(const std::string& name, int d, int hidden);
};

struct ModelConfig {
    int attr_dim = 0;    // F
    int mob_dim = 0;     // n * N_t
    int d = 96;          // embedding width per view
    int enc_hidden = 128;
    int pred_hidden = 96;
};

// The full set of trainable nets: one ViewNet per raw view (attribute,
// outflow, inflow) and the two dual predictors.
class ReCPModel {
  public:
    ReCPModel(const ModelConfig& cfg, uint64_t seed);

    Tape::Id encode(Tape& t, ViewNet& net, Tape::Id x, bool train) {
        return net.encoder.forward(t, x, train);
    }
    Tape::Id decode(Tape& t, ViewNet& net, Tape::Id z, bool train) {
        return net.decoder.forward(t, z, train);
    }

    std::vector<ParamTensor*> params();
    long expected_param_count() const;
    const ModelConfig& config() const { return cfg_; }

    ViewNet attr;
    ViewNet outflow;
    ViewNet inflow;
    DualPredictor pred_a2m;  // F^(a): attribute embedding -> mobility embedding
    DualPredictor pred_m2a;  // F^(m): mobility embedding -> attribute embedding

  private:
    ModelConfig cfg_;
};

// z_m = (z_s + z_d) / 2
Tape::Id fuse_mobility(Tape& t, Tape::Id z_s, Tape::Id z_d);
DenseMatrix fuse_mobility(const DenseMatrix& z_s, const DenseMatrix& z_d);

// Versioned binary dump of every ParamTensor value plus batch-norm running
// statistics; round-trips bit-exactly. config_hash must match on load.
void save_checkpoint(ReCPModel& m, uint64_t config_hash, const std::string& path);
void load_checkpoint(ReCPModel& m, uint64_t config_hash, const std::string& path);

}  // namespace recp::model
