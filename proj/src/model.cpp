#include "devifuzz/model.hpp"

#include <algorithm>

#include "devifuzz/errors.hpp"

namespace devifuzz {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::flatten: return "flatten";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "dense") return LayerKind::dense;
    if (name == "conv2d") return LayerKind::conv2d;
    if (name == "relu") return LayerKind::relu;
    if (name == "maxpool2") return LayerKind::maxpool2;
    if (name == "flatten") return LayerKind::flatten;
    if (name == "softmax") return LayerKind::softmax;
    throw ParseError("unknown layer kind: " + name);
}

std::size_t LayerSpec::expected_weight_len() const {
    switch (kind) {
        case LayerKind::dense: return in * out;
        case LayerKind::conv2d: return out_channels * in_channels * kernel_h * kernel_w;
        default: return 0;
    }
}

std::size_t LayerSpec::expected_bias_len() const {
    switch (kind) {
        case LayerKind::dense: return out;
        case LayerKind::conv2d: return out_channels;
        default: return 0;
    }
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in_shape) {
    switch (layer.kind) {
        case LayerKind::flatten:
            return {shape_product(in_shape)};
        case LayerKind::relu:
            return in_shape;
        case LayerKind::softmax:
            if (in_shape.size() != 1)
                throw ParseError("shape chain: softmax requires a flat vector input");
            return in_shape;
        case LayerKind::dense:
            if (in_shape.size() != 1 || in_shape[0] != layer.in)
                throw ParseError("shape chain: dense layer input mismatch");
            return {layer.out};
        case LayerKind::conv2d: {
            if (in_shape.size() != 3)
                throw ParseError("shape chain: conv2d requires [channels,h,w] input");
            const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
            if (c != layer.in_channels)
                throw ParseError("shape chain: conv2d channel mismatch");
            if (h < layer.kernel_h || w < layer.kernel_w)
                throw ParseError("shape chain: conv2d kernel larger than input");
            if (layer.stride == 0) throw ParseError("shape chain: conv2d stride is zero");
            const std::size_t oh = (h - layer.kernel_h) / layer.stride + 1;
            const std::size_t ow = (w - layer.kernel_w) / layer.stride + 1;
            return {layer.out_channels, oh, ow};
        }
        case LayerKind::maxpool2: {
            if (in_shape.size() != 3)
                throw ParseError("shape chain: maxpool2 requires [channels,h,w] input");
            const std::size_t h = in_shape[1], w = in_shape[2];
            if (h < 2 || w < 2)
                throw ParseError("shape chain: maxpool2 input smaller than window");
            return {in_shape[0], h / 2, w / 2};
        }
    }
    throw ParseError("shape chain: unknown layer kind");
}

std::size_t ModelManifest::num_classes() const {
    if (layers.empty()) return 0;
    std::vector<std::size_t> shape = input_shape;
    for (const LayerSpec& l : layers) shape = layer_output_shape(l, shape);
    return shape_product(shape);
}

std::size_t ModelManifest::total_param_count() const {
    std::size_t n = 0;
    for (const LayerSpec& l : layers) n += l.expected_weight_len() + l.expected_bias_len();
    return n;
}

void ModelManifest::validate() const {
    if (input_shape.empty()) throw ParseError("manifest: empty input shape");
    for (std::size_t e : input_shape) {
        if (e == 0) throw ParseError("manifest: zero extent in input shape");
    }
    if (layers.empty()) throw ParseError("manifest: no layers");
    if (layers.back().kind != LayerKind::softmax)
        throw ParseError("manifest: last layer must be softmax");

    std::vector<std::size_t> shape = input_shape;
    for (const LayerSpec& l : layers) {
        if (l.has_params()) {
            if (l.weight_len != l.expected_weight_len())
                throw ParseError("manifest: weight slice length does not match layer geometry");
            if (l.bias_len != l.expected_bias_len())
                throw ParseError("manifest: bias slice length does not match layer geometry");
        }
        shape = layer_output_shape(l, shape);
    }
    if (shape.size() != 1)
        throw ParseError("shape chain: model must end in a flat class vector");
}

void ModelGraph::validate() const {
    manifest.validate();
    for (const LayerSpec& l : manifest.layers) {
        if (!l.has_params()) continue;
        if (l.weight_offset + l.weight_len > weights.size() ||
            l.bias_offset + l.bias_len > weights.size())
            throw ParseError("truncated weights: parameter slice exceeds blob");
    }
    if (manifest.total_param_count() != weights.size())
        throw ParseError("weight blob size mismatch");
}

void LabeledDataset::validate() const {
    if (images.size() != labels.size())
        throw ContractViolation("dataset: image/label count mismatch");
    for (std::size_t l : labels) {
        if (l >= num_classes) throw ContractViolation("dataset: label out of range");
    }
}

} // namespace devifuzz
