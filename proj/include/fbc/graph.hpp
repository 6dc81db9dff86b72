#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fbc/decomposed_conv.hpp"

namespace fbc {

// Layer kinds of the desk-scale graph. Convolution and dense weights are
// the frozen parameter set; decomposed layers carry the trainable
// coefficients and reference a (possibly shared) basis by id.

struct ConvLayer {
    LayerShape shape;
    int stride = 1, pad = 0;
    Tensor4 weight;
    std::vector<double> bias;
    std::string block;   // residual-block tag, empty = none
    std::string group;   // group-sharing tag, empty = none
    std::optional<PlanEntry> plan;
};

struct DecomposedConvLayer {
    LayerShape shape;    // original (n, c, w, h)
    int s = 1, stride = 1, pad = 0;
    std::string basis_id;
    int slice = 0;       // basis prefix width used by this layer
    CoefficientSet coeffs;
    std::vector<double> bias;
    std::optional<Tensor4> reference;  // pre-compression weights (penalty target)
    std::string share_group;           // empty = own basis
};

struct ReluLayer {};

struct GlobalAvgPoolLayer {};

struct DenseLayer {
    int in = 0, out = 0;
    Matrix weight;  // out x in
    std::vector<double> bias;
};

struct UpsampleNearestLayer {
    int factor = 2;
};

using LayerOp = std::variant<ConvLayer, DecomposedConvLayer, ReluLayer,
                             GlobalAvgPoolLayer, DenseLayer, UpsampleNearestLayer>;

struct Layer {
    std::string name;
    LayerOp op;
};

struct Shape3 {
    int c = 0, h = 0, w = 0;
    bool operator==(const Shape3&) const = default;
};

struct ModelGraph {
    Shape3 input;
    std::vector<Layer> layers;
    std::map<std::string, BasisSet> bases;

    /// Output shape after every layer; throws shape_error naming the
    /// first layer whose input does not chain.
    std::vector<Shape3> infer_shapes() const;

    /// Whole-graph forward pass. Throws numeric_error naming the first
    /// layer that produces non-finite values.
    Tensor4 forward(const Tensor4& x) const;

    /// Bundle a decomposed layer with its (sliced) basis for execution.
    DecomposedLayer materialize(const DecomposedConvLayer& layer) const;

    Layer* find(const std::string& name);
    const Layer* find(const std::string& name) const;

    /// Basis + coefficient entries. Biases and frozen parameters excluded,
    /// matching the planner's budgets.
    std::uint64_t compressed_param_count() const;

    /// n*c*w*h over conv layers and decomposed layers' original shapes.
    std::uint64_t original_param_count() const;
};

/// Single-layer application, shared by forward and the training tape.
Tensor4 apply_layer(const ModelGraph& g, const Layer& layer, const Tensor4& x);

}  // namespace fbc
