#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "devifuzz/tensor.hpp"

namespace devifuzz {

enum class LayerKind { dense, conv2d, relu, maxpool2, flatten, softmax };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

/// One layer of a model. Only dense and conv2d carry parameters; their
/// weight/bias slices index into the owning graph's weight blob.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;

    // dense
    std::size_t in = 0;
    std::size_t out = 0;

    // conv2d (valid padding)
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t stride = 1;

    // parameter slices into the weight blob
    std::size_t weight_offset = 0;
    std::size_t weight_len = 0;
    std::size_t bias_offset = 0;
    std::size_t bias_len = 0;

    bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
    std::size_t expected_weight_len() const;
    std::size_t expected_bias_len() const;

    bool operator==(const LayerSpec&) const = default;
};

struct ModelManifest {
    std::string name;
    std::vector<std::size_t> input_shape;
    std::vector<LayerSpec> layers;

    bool operator==(const ModelManifest&) const = default;

    /// Number of classes produced by the final softmax.
    std::size_t num_classes() const;
    std::size_t total_param_count() const;

    /// Walks the layer chain from input_shape, checking that every layer
    /// accepts its predecessor's output, that parameter slice lengths match
    /// the analytic counts, and that the last layer is softmax over a vector.
    /// Throws ParseError ("shape chain ...") on any inconsistency.
    void validate() const;
};

/// Output shape of a single layer applied to `in_shape`.
/// Throws ParseError on incompatible input.
std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in_shape);

/// Executable model: manifest plus one contiguous little-endian float32
/// weight blob that the layer slices point into.
struct ModelGraph {
    ModelManifest manifest;
    std::vector<float> weights;

    bool operator==(const ModelGraph&) const = default;

    std::span<const float> weight_slice(const LayerSpec& l) const {
        return {weights.data() + l.weight_offset, l.weight_len};
    }
    std::span<const float> bias_slice(const LayerSpec& l) const {
        return {weights.data() + l.bias_offset, l.bias_len};
    }

    /// Manifest validation plus blob-size consistency.
    void validate() const;
};

/// Image set with per-image class labels; pixel values live in [0,1].
struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return images.size(); }
    void validate() const;
};

} // namespace devifuzz
