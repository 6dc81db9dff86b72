#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fbc/graph.hpp"
#include "fbc/rng.hpp"

namespace fbc {

enum class LossKind { mse, cross_entropy };

/// Joint objective: data term + gamma * sum_l ||W_l - B_l A_l||_F^2 over
/// decomposed layers carrying a reference weight. The data term is the
/// mean over all output elements (mse) or the mean cross-entropy over the
/// batch (targets are class indices).
struct LossSpec {
    LossKind kind = LossKind::mse;
    double gamma = 1e-2;
};

struct Batch {
    Tensor4 x, y;
};

struct Dataset {
    Tensor4 xs, ys;

    int size() const { return xs.n; }
    /// Seeded shuffle, then consecutive batches (last one may be short).
    /// batch_size <= 0 means the whole set.
    std::vector<Batch> batches(int batch_size, std::uint64_t seed) const;
};

struct OptimizerState {
    double lr = 1e-2;
    double decay_factor = 10.0;
    int decay_epoch = 200;  // lr divides by decay_factor from this epoch on
    double momentum = 0.0;
    std::uint64_t seed = 0;
    int step = 0;
    std::map<std::string, Matrix> vel_basis;
    std::map<std::string, Matrix> vel_coeffs;

    double lr_at(int epoch) const {
        return (decay_epoch > 0 && epoch >= decay_epoch) ? lr / decay_factor : lr;
    }

    /// SGD with momentum 0.9 for classification-style runs, plain SGD
    /// otherwise.
    static OptimizerState defaults_for(LossKind kind);
};

/// Gradients of the trainable set {B, A}: basis grads keyed by basis id
/// (full width, slice columns populated), coefficient grads by layer name.
struct Gradients {
    std::map<std::string, Matrix> basis;
    std::map<std::string, Matrix> coeffs;
};

struct LossParts {
    double data = 0.0, penalty = 0.0, total = 0.0;
};

LossParts joint_loss(const ModelGraph& g, const Batch& b, const LossSpec& spec);

/// Reverse-mode gradients for every trainable tensor. The penalty adds
/// 2*gamma*(BA - W)A^T to the basis gradient and 2*gamma*B^T(BA - W) to
/// the coefficients. Throws numeric_error naming the offending layer on
/// non-finite values.
std::pair<LossParts, Gradients> backward(const ModelGraph& g, const Batch& b,
                                         const LossSpec& spec);

struct EpochStat {
    int epoch = 0;
    double data_loss = 0.0, penalty = 0.0, total = 0.0;
};

struct TrainReport {
    std::vector<EpochStat> epochs;
    std::vector<std::pair<std::string, double>> final_residuals;  // layer, ||W - BA||_F
    bool diverged = false;
    int steps = 0;

    /// One epoch per line: epoch, data_loss, penalty, total.
    std::string to_text() const;
};

/// Deterministic under a fixed seed. Aborts (diverged flag) when the
/// total loss exceeds 1e6 or turns non-finite.
TrainReport train(ModelGraph& g, const Dataset& data, const LossSpec& spec,
                  OptimizerState& opt, int epochs, int batch_size = 0);

/// Drops reference weights; keeps {B, A} and the frozen parameters.
ModelGraph export_for_inference(const ModelGraph& g);

}  // namespace fbc
