#include "devifuzz/inference.hpp"

#include <algorithm>
#include <cmath>

#include "devifuzz/errors.hpp"
#include "devifuzz/rng.hpp"

namespace devifuzz {

namespace {

void dense_forward(const LayerSpec& l, std::span<const float> w, std::span<const float> b,
                   const std::vector<double>& in, std::vector<double>& out) {
    out.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
        double acc = b[o];
        const float* row = w.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) acc += static_cast<double>(row[i]) * in[i];
        out[o] = acc;
    }
}

void conv2d_forward(const LayerSpec& l, std::span<const float> w, std::span<const float> b,
                    const std::vector<double>& in, const std::vector<std::size_t>& in_shape,
                    std::vector<double>& out) {
    const std::size_t h = in_shape[1], width = in_shape[2];
    const std::size_t oh = (h - l.kernel_h) / l.stride + 1;
    const std::size_t ow = (width - l.kernel_w) / l.stride + 1;
    out.assign(l.out_channels * oh * ow, 0.0);
    for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = b[oc];
                for (std::size_t ic = 0; ic < l.in_channels; ++ic) {
                    for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
                        const std::size_t iy = y * l.stride + ky;
                        const double* in_row = in.data() + (ic * h + iy) * width + x * l.stride;
                        const float* w_row =
                            w.data() +
                            ((oc * l.in_channels + ic) * l.kernel_h + ky) * l.kernel_w;
                        for (std::size_t kx = 0; kx < l.kernel_w; ++kx)
                            acc += static_cast<double>(w_row[kx]) * in_row[kx];
                    }
                }
                out[(oc * oh + y) * ow + x] = acc;
            }
        }
    }
}

void maxpool2_forward(const std::vector<double>& in, const std::vector<std::size_t>& in_shape,
                      std::vector<double>& out) {
    const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const std::size_t oh = h / 2, ow = w / 2;
    out.assign(c * oh * ow, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const std::size_t base = (ch * h + 2 * y) * w + 2 * x;
                double m = in[base];
                m = std::max(m, in[base + 1]);
                m = std::max(m, in[base + w]);
                m = std::max(m, in[base + w + 1]);
                out[(ch * oh + y) * ow + x] = m;
            }
        }
    }
}

void softmax_inplace(std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

void require_dense_only(const ModelManifest& m) {
    for (const LayerSpec& l : m.layers) {
        switch (l.kind) {
            case LayerKind::dense:
            case LayerKind::relu:
            case LayerKind::flatten:
            case LayerKind::softmax:
                break;
            default:
                throw UnsupportedError(
                    "training supports dense-only models; found layer kind " +
                    std::string(layer_kind_name(l.kind)));
        }
    }
}

} // namespace

ProbVector predict(const ModelGraph& m, const Tensor& x) {
    if (x.shape != m.manifest.input_shape)
        throw ContractViolation("predict: input shape mismatch");
    x.validate();

    std::vector<double> cur = x.data;
    std::vector<double> next;
    std::vector<std::size_t> shape = x.shape;
    for (const LayerSpec& l : m.manifest.layers) {
        switch (l.kind) {
            case LayerKind::flatten:
                break; // layout already flat
            case LayerKind::relu:
                for (double& v : cur) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::dense:
                dense_forward(l, m.weight_slice(l), m.bias_slice(l), cur, next);
                cur.swap(next);
                break;
            case LayerKind::conv2d:
                conv2d_forward(l, m.weight_slice(l), m.bias_slice(l), cur, shape, next);
                cur.swap(next);
                break;
            case LayerKind::maxpool2:
                maxpool2_forward(cur, shape, next);
                cur.swap(next);
                break;
            case LayerKind::softmax:
                softmax_inplace(cur);
                break;
        }
        shape = layer_output_shape(l, shape);
    }
    return ProbVector{std::move(cur)};
}

double accuracy(const ModelGraph& m, const LabeledDataset& data) {
    if (data.size() == 0) throw ContractViolation("accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (top1(predict(m, data.images[i])).label == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

GradResult loss_gradient(const ModelGraph& m, const LabeledDataset& data,
                         std::span<const std::size_t> batch_indices) {
    require_dense_only(m.manifest);
    if (batch_indices.empty()) throw ContractViolation("loss_gradient: empty batch");

    GradResult result;
    result.grad.assign(m.weights.size(), 0.0);

    const auto& layers = m.manifest.layers;
    for (std::size_t sample : batch_indices) {
        const Tensor& x = data.images[sample];
        const std::size_t label = data.labels[sample];
        if (x.shape != m.manifest.input_shape)
            throw ContractViolation("loss_gradient: input shape mismatch");

        // Forward, keeping the input of every layer.
        std::vector<std::vector<double>> inputs(layers.size());
        std::vector<double> cur = x.data;
        for (std::size_t li = 0; li < layers.size(); ++li) {
            inputs[li] = cur;
            const LayerSpec& l = layers[li];
            std::vector<double> next;
            switch (l.kind) {
                case LayerKind::flatten:
                    break;
                case LayerKind::relu:
                    for (double& v : cur) v = v > 0.0 ? v : 0.0;
                    break;
                case LayerKind::dense:
                    dense_forward(l, m.weight_slice(l), m.bias_slice(l), cur, next);
                    cur.swap(next);
                    break;
                case LayerKind::softmax:
                    softmax_inplace(cur);
                    break;
                default:
                    throw UnsupportedError("loss_gradient: unsupported layer");
            }
        }

        const std::vector<double>& probs = cur;
        const double p = std::max(probs[label], 1e-300);
        result.loss += -std::log(p);

        // Backward. Softmax + cross-entropy collapse to (p - onehot).
        std::vector<double> delta = probs;
        delta[label] -= 1.0;
        for (std::size_t li = layers.size(); li-- > 0;) {
            const LayerSpec& l = layers[li];
            switch (l.kind) {
                case LayerKind::softmax:
                case LayerKind::flatten:
                    break;
                case LayerKind::relu: {
                    const std::vector<double>& in = inputs[li];
                    for (std::size_t i = 0; i < delta.size(); ++i)
                        if (in[i] <= 0.0) delta[i] = 0.0;
                    break;
                }
                case LayerKind::dense: {
                    const std::vector<double>& in = inputs[li];
                    std::span<const float> w = m.weight_slice(l);
                    double* gw = result.grad.data() + l.weight_offset;
                    double* gb = result.grad.data() + l.bias_offset;
                    std::vector<double> prev(l.in, 0.0);
                    for (std::size_t o = 0; o < l.out; ++o) {
                        const double d = delta[o];
                        gb[o] += d;
                        double* gw_row = gw + o * l.in;
                        const float* w_row = w.data() + o * l.in;
                        for (std::size_t i = 0; i < l.in; ++i) {
                            gw_row[i] += d * in[i];
                            prev[i] += d * static_cast<double>(w_row[i]);
                        }
                    }
                    delta.swap(prev);
                    break;
                }
                default:
                    throw UnsupportedError("loss_gradient: unsupported layer");
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(batch_indices.size());
    for (double& g : result.grad) g *= inv;
    result.loss *= inv;
    return result;
}

ModelGraph init_mlp(const std::vector<std::size_t>& input_shape, std::size_t num_classes,
                    const MlpTrainConfig& cfg) {
    ModelGraph g;
    g.manifest.name = cfg.name;
    g.manifest.input_shape = input_shape;

    std::vector<std::size_t> widths;
    widths.push_back(shape_product(input_shape));
    for (std::size_t h : cfg.hidden_sizes) widths.push_back(h);
    widths.push_back(num_classes);

    std::size_t offset = 0;
    g.manifest.layers.push_back({.kind = LayerKind::flatten});
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        LayerSpec l;
        l.kind = LayerKind::dense;
        l.in = widths[i];
        l.out = widths[i + 1];
        l.weight_offset = offset;
        l.weight_len = l.in * l.out;
        offset += l.weight_len;
        l.bias_offset = offset;
        l.bias_len = l.out;
        offset += l.bias_len;
        g.manifest.layers.push_back(l);
        if (i + 2 < widths.size()) g.manifest.layers.push_back({.kind = LayerKind::relu});
    }
    g.manifest.layers.push_back({.kind = LayerKind::softmax});

    g.weights.assign(offset, 0.0f);
    Rng rng(derive_seed(cfg.rng_seed, 0xA11));
    for (const LayerSpec& l : g.manifest.layers) {
        if (l.kind != LayerKind::dense) continue;
        // Xavier-uniform weights, zero biases.
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (std::size_t i = 0; i < l.weight_len; ++i)
            g.weights[l.weight_offset + i] = static_cast<float>(rng.uniform(-bound, bound));
    }
    g.validate();
    return g;
}

TrainOutcome train_mlp(const LabeledDataset& data, const MlpTrainConfig& cfg) {
    data.validate();
    if (data.size() == 0) throw ContractViolation("train_mlp: empty dataset");
    if (data.num_classes < 2) throw ContractViolation("train_mlp: need at least two classes");

    TrainOutcome out;
    out.model = init_mlp(data.images.front().shape, data.num_classes, cfg);

    Rng shuffle_rng(derive_seed(cfg.rng_seed, 0x5FF));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with our own rng keeps the trace platform-stable.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            GradResult g = loss_gradient(out.model, data,
                                         std::span<const std::size_t>(order).subspan(start, len));
            for (std::size_t i = 0; i < out.model.weights.size(); ++i) {
                out.model.weights[i] = static_cast<float>(
                    static_cast<double>(out.model.weights[i]) - cfg.learning_rate * g.grad[i]);
            }
        }
    }
    out.train_accuracy = accuracy(out.model, data);
    return out;
}

} // namespace devifuzz
