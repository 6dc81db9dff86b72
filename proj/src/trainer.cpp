#include "fbc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace fbc {

namespace {

// Basis gradient as a (p*w*h) x m matrix from the (m, p, h, w) weight
// gradient tensor (transpose of the filter-matrix layout).
Matrix basis_grad_matrix(const Tensor4& dw) {
    Matrix g(dw.c * dw.h * dw.w, dw.n);
    for (int j = 0; j < dw.n; ++j) {
        const double* src = &dw.data[dw.idx(j, 0, 0, 0)];
        for (int r = 0; r < g.rows; ++r) g.at(r, j) = src[r];
    }
    return g;
}

struct Tape {
    std::vector<Tensor4> acts;               // acts[0] = x, acts[i+1] = layer i out
    std::map<int, Tensor4> dec_stage;        // basis-stage concat per decomposed layer
};

Tensor4 forward_tape(const ModelGraph& g, const Tensor4& x, Tape& tape) {
    tape.acts.clear();
    tape.acts.push_back(x);
    for (std::size_t li = 0; li < g.layers.size(); ++li) {
        const Layer& l = g.layers[li];
        Tensor4 out;
        if (const auto* d = std::get_if<DecomposedConvLayer>(&l.op)) {
            const DecomposedLayer dl = g.materialize(*d);
            const Tensor4 basis_w = dl.basis.to_tensor();
            std::vector<Tensor4> stage;
            stage.reserve(dl.s);
            const Tensor4& in = tape.acts.back();
            for (int gsp = 0; gsp < dl.s; ++gsp)
                stage.push_back(conv2d(channel_slice(in, gsp * dl.basis.p, dl.basis.p),
                                       basis_w, dl.stride, dl.pad));
            Tensor4 z = channel_concat(stage);
            out = conv2d(z, combine_weight(dl), 1, 0, dl.bias);
            tape.dec_stage[static_cast<int>(li)] = std::move(z);
        } else {
            out = apply_layer(g, l, tape.acts.back());
        }
        if (!out.all_finite())
            throw numeric_error("layer '" + l.name + "' produced non-finite values");
        tape.acts.push_back(std::move(out));
    }
    return tape.acts.back();
}

double data_loss_and_grad(const Tensor4& yhat, const Tensor4& y, LossKind kind,
                          Tensor4* dy) {
    if (kind == LossKind::mse) {
        if (!yhat.same_shape(y))
            throw shape_error("mse: prediction and target shapes differ");
        const double inv = 1.0 / static_cast<double>(yhat.size());
        double loss = 0.0;
        if (dy) *dy = Tensor4(yhat.n, yhat.c, yhat.h, yhat.w);
        for (std::size_t i = 0; i < yhat.data.size(); ++i) {
            const double d = yhat.data[i] - y.data[i];
            loss += d * d * inv;
            if (dy) dy->data[i] = 2.0 * d * inv;
        }
        return loss;
    }
    // cross-entropy over class logits; target holds class indices
    if (yhat.h != 1 || yhat.w != 1)
        throw shape_error("cross_entropy: logits must have spatial dims 1x1");
    if (y.n != yhat.n || y.c != 1 || y.h != 1 || y.w != 1)
        throw shape_error("cross_entropy: target must be (n, 1, 1, 1) class indices");
    const int n = yhat.n, k = yhat.c;
    const double invn = 1.0 / n;
    double loss = 0.0;
    if (dy) *dy = Tensor4(n, k, 1, 1);
    for (int b = 0; b < n; ++b) {
        const double tval = y.at(b, 0, 0, 0);
        const int t = static_cast<int>(tval);
        if (t < 0 || t >= k || static_cast<double>(t) != tval)
            throw shape_error("cross_entropy: target " + std::to_string(tval) +
                              " is not a class index in [0, " + std::to_string(k) + ")");
        double mx = yhat.at(b, 0, 0, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, yhat.at(b, j, 0, 0));
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(yhat.at(b, j, 0, 0) - mx);
        loss += (std::log(z) - (yhat.at(b, t, 0, 0) - mx)) * invn;
        if (dy) {
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(yhat.at(b, j, 0, 0) - mx) / z;
                dy->at(b, j, 0, 0) = (p - (j == t ? 1.0 : 0.0)) * invn;
            }
        }
    }
    return loss;
}

// Penalty term and, when grads != nullptr, its closed-form gradients.
double penalty_term(const ModelGraph& g, double gamma, Gradients* grads) {
    double total = 0.0;
    for (const Layer& l : g.layers) {
        const auto* d = std::get_if<DecomposedConvLayer>(&l.op);
        if (!d || !d->reference) continue;
        const Matrix m = split_and_flatten(*d->reference, d->s).mat;
        const BasisSet& stored = g.bases.at(d->basis_id);
        const BasisSet bk = (d->slice == stored.m()) ? stored : slice_basis(stored, d->slice);
        Matrix r = matmul(bk.mat, d->coeffs.mat);
        for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= m.data[i];
        double sq = 0.0;
        for (double v : r.data) sq += v * v;
        total += sq;
        if (!grads || gamma == 0.0) continue;
        const Matrix db = matmul(r, transpose(d->coeffs.mat));  // (pwh) x slice
        const Matrix da = matmul(transpose(bk.mat), r);         // slice x (n*s)
        Matrix& bg = grads->basis.at(d->basis_id);
        for (int rr = 0; rr < db.rows; ++rr)
            for (int cc = 0; cc < db.cols; ++cc)
                bg.at(rr, cc) += 2.0 * gamma * db.at(rr, cc);
        Matrix& ag = grads->coeffs.at(l.name);
        for (std::size_t i = 0; i < ag.data.size(); ++i)
            ag.data[i] += 2.0 * gamma * da.data[i];
    }
    return total;
}

void init_grads(const ModelGraph& g, Gradients& grads) {
    for (const auto& [id, b] : g.bases) grads.basis.emplace(id, Matrix(b.mat.rows, b.mat.cols));
    for (const Layer& l : g.layers)
        if (const auto* d = std::get_if<DecomposedConvLayer>(&l.op))
            grads.coeffs.emplace(l.name, Matrix(d->coeffs.mat.rows, d->coeffs.mat.cols));
}

}  // namespace

std::vector<Batch> Dataset::batches(int batch_size, std::uint64_t seed) const {
    if (xs.n < 1) throw shape_error("dataset is empty");
    if (ys.n != xs.n) throw shape_error("dataset inputs and targets disagree on sample count");
    const int n = xs.n;
    const int bs = (batch_size <= 0 || batch_size > n) ? n : batch_size;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Batch> out;
    const std::size_t xstride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t ystride = static_cast<std::size_t>(ys.c) * ys.h * ys.w;
    for (int start = 0; start < n; start += bs) {
        const int count = std::min(bs, n - start);
        Batch b{Tensor4(count, xs.c, xs.h, xs.w), Tensor4(count, ys.c, ys.h, ys.w)};
        for (int i = 0; i < count; ++i) {
            const int src = order[start + i];
            std::memcpy(&b.x.data[i * xstride], &xs.data[src * xstride],
                        xstride * sizeof(double));
            std::memcpy(&b.y.data[i * ystride], &ys.data[src * ystride],
                        ystride * sizeof(double));
        }
        out.push_back(std::move(b));
    }
    return out;
}

OptimizerState OptimizerState::defaults_for(LossKind kind) {
    OptimizerState opt;
    if (kind == LossKind::cross_entropy) {
        opt.lr = 0.1;
        opt.momentum = 0.9;
    } else {
        opt.lr = 1e-4;
        opt.momentum = 0.0;
    }
    return opt;
}

LossParts joint_loss(const ModelGraph& g, const Batch& b, const LossSpec& spec) {
    if (spec.gamma < 0.0) throw shape_error("gamma must be >= 0");
    const Tensor4 yhat = g.forward(b.x);
    LossParts parts;
    parts.data = data_loss_and_grad(yhat, b.y, spec.kind, nullptr);
    parts.penalty = penalty_term(g, spec.gamma, nullptr);
    parts.total = parts.data + spec.gamma * parts.penalty;
    return parts;
}

std::pair<LossParts, Gradients> backward(const ModelGraph& g, const Batch& b,
                                         const LossSpec& spec) {
    if (spec.gamma < 0.0) throw shape_error("gamma must be >= 0");
    Tape tape;
    const Tensor4 yhat = forward_tape(g, b.x, tape);

    LossParts parts;
    Tensor4 dy;
    parts.data = data_loss_and_grad(yhat, b.y, spec.kind, &dy);
    if (!std::isfinite(parts.data)) throw numeric_error("data loss is non-finite");

    Gradients grads;
    init_grads(g, grads);

    for (int li = static_cast<int>(g.layers.size()) - 1; li >= 0; --li) {
        const Layer& l = g.layers[li];
        const Tensor4& x = tape.acts[li];
        std::visit(
            [&](const auto& op) {
                using T = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<T, ConvLayer>) {
                    dy = conv2d_grad_input(op.weight, dy, x.h, x.w, op.stride, op.pad);
                } else if constexpr (std::is_same_v<T, DecomposedConvLayer>) {
                    const DecomposedLayer dl = g.materialize(op);
                    const Tensor4& z = tape.dec_stage.at(li);
                    const Tensor4 cw = combine_weight(dl);
                    const Tensor4 dc = conv2d_grad_weight(z, dy, 1, 1, 1, 0);
                    Tensor4 dz = conv2d_grad_input(cw, dy, z.h, z.w, 1, 0);

                    const int n = dl.coeffs.n, m = dl.basis.m(), p = dl.basis.p;
                    Matrix& ag = grads.coeffs.at(l.name);
                    for (int i = 0; i < n; ++i)
                        for (int gsp = 0; gsp < dl.s; ++gsp)
                            for (int j = 0; j < m; ++j)
                                ag.at(j, gsp * n + i) += dc.at(i, gsp * m + j, 0, 0);

                    const Tensor4 basis_w = dl.basis.to_tensor();
                    Matrix& bg = grads.basis.at(op.basis_id);
                    std::vector<Tensor4> dx_parts;
                    dx_parts.reserve(dl.s);
                    for (int gsp = 0; gsp < dl.s; ++gsp) {
                        const Tensor4 xg = channel_slice(x, gsp * p, p);
                        const Tensor4 dzg = channel_slice(dz, gsp * m, m);
                        const Tensor4 dwg = conv2d_grad_weight(xg, dzg, dl.basis.h, dl.basis.w,
                                                               dl.stride, dl.pad);
                        const Matrix gb = basis_grad_matrix(dwg);
                        for (int rr = 0; rr < gb.rows; ++rr)
                            for (int cc = 0; cc < gb.cols; ++cc) bg.at(rr, cc) += gb.at(rr, cc);
                        dx_parts.push_back(
                            conv2d_grad_input(basis_w, dzg, x.h, x.w, dl.stride, dl.pad));
                    }
                    dy = channel_concat(dx_parts);
                } else if constexpr (std::is_same_v<T, ReluLayer>) {
                    Tensor4 dx = dy;
                    for (std::size_t i = 0; i < dx.data.size(); ++i)
                        if (x.data[i] <= 0.0) dx.data[i] = 0.0;
                    dy = std::move(dx);
                } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
                    Tensor4 dx(x.n, x.c, x.h, x.w);
                    const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
                    for (int bb = 0; bb < x.n; ++bb)
                        for (int ch = 0; ch < x.c; ++ch) {
                            const double v = dy.at(bb, ch, 0, 0) * inv;
                            double* plane = &dx.data[dx.idx(bb, ch, 0, 0)];
                            for (int i = 0; i < x.h * x.w; ++i) plane[i] = v;
                        }
                    dy = std::move(dx);
                } else if constexpr (std::is_same_v<T, DenseLayer>) {
                    Tensor4 dx(x.n, x.c, x.h, x.w);
                    for (int bb = 0; bb < x.n; ++bb) {
                        double* dxrow = &dx.data[dx.idx(bb, 0, 0, 0)];
                        for (int o = 0; o < op.out; ++o) {
                            const double dv = dy.at(bb, o, 0, 0);
                            if (dv == 0.0) continue;
                            for (int i = 0; i < op.in; ++i) dxrow[i] += dv * op.weight.at(o, i);
                        }
                    }
                    dy = std::move(dx);
                } else {
                    static_assert(std::is_same_v<T, UpsampleNearestLayer>);
                    Tensor4 dx(x.n, x.c, x.h, x.w);
                    for (int bb = 0; bb < x.n; ++bb)
                        for (int ch = 0; ch < x.c; ++ch)
                            for (int yy = 0; yy < dy.h; ++yy)
                                for (int xx = 0; xx < dy.w; ++xx)
                                    dx.at(bb, ch, yy / op.factor, xx / op.factor) +=
                                        dy.at(bb, ch, yy, xx);
                    dy = std::move(dx);
                }
            },
            l.op);
        if (!dy.all_finite())
            throw numeric_error("non-finite gradient flowing out of layer '" + l.name + "'");
    }

    parts.penalty = penalty_term(g, spec.gamma, &grads);
    parts.total = parts.data + spec.gamma * parts.penalty;

    for (const auto& [id, m] : grads.basis)
        if (!m.all_finite()) throw numeric_error("non-finite basis gradient for '" + id + "'");
    for (const auto& [name, m] : grads.coeffs)
        if (!m.all_finite())
            throw numeric_error("non-finite coefficient gradient for layer '" + name + "'");
    return {parts, grads};
}

namespace {

void sgd_update(ModelGraph& g, const Gradients& grads, OptimizerState& opt, double lr) {
    for (auto& [id, gmat] : grads.basis) {
        auto [it, fresh] = opt.vel_basis.try_emplace(id, Matrix(gmat.rows, gmat.cols));
        Matrix& v = it->second;
        Matrix& param = g.bases.at(id).mat;
        for (std::size_t i = 0; i < v.data.size(); ++i) {
            v.data[i] = opt.momentum * v.data[i] + gmat.data[i];
            param.data[i] -= lr * v.data[i];
        }
    }
    for (auto& [name, gmat] : grads.coeffs) {
        auto [it, fresh] = opt.vel_coeffs.try_emplace(name, Matrix(gmat.rows, gmat.cols));
        Matrix& v = it->second;
        auto* layer = g.find(name);
        Matrix& param = std::get<DecomposedConvLayer>(layer->op).coeffs.mat;
        for (std::size_t i = 0; i < v.data.size(); ++i) {
            v.data[i] = opt.momentum * v.data[i] + gmat.data[i];
            param.data[i] -= lr * v.data[i];
        }
    }
}

}  // namespace

TrainReport train(ModelGraph& g, const Dataset& data, const LossSpec& spec,
                  OptimizerState& opt, int epochs, int batch_size) {
    if (data.size() < 1) throw shape_error("train: dataset is empty");
    TrainReport report;
    for (int e = 0; e < epochs; ++e) {
        const double lr = opt.lr_at(e);
        const std::vector<Batch> batches = data.batches(batch_size, opt.seed + e);
        double data_sum = 0.0, pen_sum = 0.0, total_sum = 0.0;
        int nb = 0;
        for (const Batch& b : batches) {
            auto [parts, grads] = backward(g, b, spec);
            if (!std::isfinite(parts.total) || parts.total > 1e6) {
                report.diverged = true;
                report.epochs.push_back({e + 1, parts.data, parts.penalty, parts.total});
                report.steps = opt.step;
                return report;
            }
            sgd_update(g, grads, opt, lr);
            ++opt.step;
            data_sum += parts.data;
            pen_sum += parts.penalty;
            total_sum += parts.total;
            ++nb;
        }
        report.epochs.push_back(
            {e + 1, data_sum / nb, pen_sum / nb, total_sum / nb});
    }
    report.steps = opt.step;
    for (const Layer& l : g.layers) {
        const auto* d = std::get_if<DecomposedConvLayer>(&l.op);
        if (!d || !d->reference) continue;
        const Matrix m = split_and_flatten(*d->reference, d->s).mat;
        const BasisSet& stored = g.bases.at(d->basis_id);
        const BasisSet bk = (d->slice == stored.m()) ? stored : slice_basis(stored, d->slice);
        report.final_residuals.emplace_back(l.name, frob_diff(m, matmul(bk.mat, d->coeffs.mat)));
    }
    return report;
}

std::string TrainReport::to_text() const {
    std::string out = "# epoch data_loss penalty total\n";
    char line[160];
    for (const EpochStat& e : epochs) {
        std::snprintf(line, sizeof(line), "%d %.12e %.12e %.12e\n", e.epoch, e.data_loss,
                      e.penalty, e.total);
        out += line;
    }
    if (diverged) out += "# diverged\n";
    for (const auto& [name, r] : final_residuals) {
        std::snprintf(line, sizeof(line), "# residual %s %.12e\n", name.c_str(), r);
        out += line;
    }
    return out;
}

ModelGraph export_for_inference(const ModelGraph& g) {
    ModelGraph out = g;
    for (Layer& l : out.layers)
        if (auto* d = std::get_if<DecomposedConvLayer>(&l.op)) d->reference.reset();
    return out;
}

}  // namespace fbc
