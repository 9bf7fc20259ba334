#include "devifuzz/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "devifuzz/errors.hpp"

namespace devifuzz {

namespace {

constexpr char kManifestMagic[] = "devifuzz-model v1";
constexpr std::uint32_t kWeightsMagic = 0x44564657; // "DVFW"
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

void write_u32_le(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t read_u32_le(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(std::string("short read: ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_be(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    os.write(b, 4);
}

std::uint32_t read_u32_be(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(std::string("short read: ") + what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

std::size_t parse_size(std::istringstream& ls, const char* ctx) {
    long long v = -1;
    if (!(ls >> v) || v < 0) throw ParseError(std::string("manifest: bad field in ") + ctx);
    return static_cast<std::size_t>(v);
}

std::size_t expect_keyword_size(std::istringstream& ls, const char* kw, const char* ctx) {
    std::string word;
    if (!(ls >> word) || word != kw)
        throw ParseError(std::string("manifest: expected '") + kw + "' in " + ctx);
    return parse_size(ls, ctx);
}

void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

} // namespace

std::string manifest_to_text(const ModelManifest& m) {
    std::ostringstream os;
    os << kManifestMagic << "\n";
    os << "name " << m.name << "\n";
    os << "input";
    for (std::size_t e : m.input_shape) os << ' ' << e;
    os << "\n";
    for (const LayerSpec& l : m.layers) {
        os << "layer " << layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::dense:
                os << " in " << l.in << " out " << l.out;
                break;
            case LayerKind::conv2d:
                os << " in_c " << l.in_channels << " out_c " << l.out_channels << " kernel "
                   << l.kernel_h << ' ' << l.kernel_w << " stride " << l.stride;
                break;
            default:
                break;
        }
        if (l.has_params()) {
            os << " weights " << l.weight_offset << ' ' << l.weight_len << " bias "
               << l.bias_offset << ' ' << l.bias_len;
        }
        os << "\n";
    }
    os << "end\n";
    return os.str();
}

ModelManifest manifest_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != kManifestMagic)
        throw ParseError("bad magic: not a devifuzz model manifest");

    ModelManifest m;
    bool saw_end = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "name") {
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            m.name = rest;
        } else if (tag == "input") {
            std::size_t e;
            while (ls >> e) m.input_shape.push_back(e);
        } else if (tag == "layer") {
            std::string kind_name;
            if (!(ls >> kind_name)) throw ParseError("manifest: layer line without kind");
            LayerSpec l;
            l.kind = layer_kind_from_name(kind_name);
            switch (l.kind) {
                case LayerKind::dense:
                    l.in = expect_keyword_size(ls, "in", "dense");
                    l.out = expect_keyword_size(ls, "out", "dense");
                    break;
                case LayerKind::conv2d:
                    l.in_channels = expect_keyword_size(ls, "in_c", "conv2d");
                    l.out_channels = expect_keyword_size(ls, "out_c", "conv2d");
                    {
                        std::string word;
                        if (!(ls >> word) || word != "kernel")
                            throw ParseError("manifest: expected 'kernel' in conv2d");
                        l.kernel_h = parse_size(ls, "conv2d");
                        l.kernel_w = parse_size(ls, "conv2d");
                    }
                    l.stride = expect_keyword_size(ls, "stride", "conv2d");
                    break;
                default:
                    break;
            }
            if (l.has_params()) {
                l.weight_offset = expect_keyword_size(ls, "weights", "params");
                l.weight_len = parse_size(ls, "params");
                l.bias_offset = expect_keyword_size(ls, "bias", "params");
                l.bias_len = parse_size(ls, "params");
            }
            m.layers.push_back(l);
        } else if (tag == "end") {
            saw_end = true;
            break;
        } else {
            throw ParseError("manifest: unknown line tag '" + tag + "'");
        }
    }
    if (!saw_end) throw ParseError("manifest: missing end marker");
    m.validate();
    return m;
}

void save_model(const ModelGraph& m, const std::string& base_path) {
    m.validate();
    ensure_parent_dir(base_path);

    std::ofstream mf(base_path + ".manifest", std::ios::binary);
    if (!mf) throw ParseError("cannot open for write: " + base_path + ".manifest");
    mf << manifest_to_text(m.manifest);
    if (!mf) throw ParseError("write failed: " + base_path + ".manifest");

    std::ofstream wf(base_path + ".weights", std::ios::binary);
    if (!wf) throw ParseError("cannot open for write: " + base_path + ".weights");
    write_u32_le(wf, kWeightsMagic);
    write_u32_le(wf, static_cast<std::uint32_t>(m.weights.size()));
    for (float w : m.weights) write_u32_le(wf, std::bit_cast<std::uint32_t>(w));
    if (!wf) throw ParseError("write failed: " + base_path + ".weights");
}

ModelGraph load_model(const std::string& base_path) {
    std::ifstream mf(base_path + ".manifest", std::ios::binary);
    if (!mf) throw ParseError("cannot open: " + base_path + ".manifest");
    std::stringstream buf;
    buf << mf.rdbuf();

    ModelGraph g;
    g.manifest = manifest_from_text(buf.str());

    std::ifstream wf(base_path + ".weights", std::ios::binary);
    if (!wf) throw ParseError("cannot open: " + base_path + ".weights");
    if (read_u32_le(wf, "weights magic") != kWeightsMagic)
        throw ParseError("bad magic: not a devifuzz weights blob");
    const std::uint32_t count = read_u32_le(wf, "weights count");
    g.weights.resize(count);
    for (std::uint32_t i = 0; i < count; ++i)
        g.weights[i] = std::bit_cast<float>(read_u32_le(wf, "truncated weights"));

    const std::size_t need = g.manifest.total_param_count();
    if (g.weights.size() < need) throw ParseError("truncated weights: blob smaller than manifest demands");
    g.validate();
    return g;
}

std::vector<Tensor> load_idx_images(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    if (read_u32_be(f, "idx magic") != kIdxImagesMagic)
        throw ParseError("bad magic: not an IDX image file");
    const std::uint32_t count = read_u32_be(f, "idx image count");
    const std::uint32_t rows = read_u32_be(f, "idx rows");
    const std::uint32_t cols = read_u32_be(f, "idx cols");
    if (rows == 0 || cols == 0) throw ParseError("dimension mismatch: zero image extent");

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<Tensor> images;
    images.reserve(count);
    std::vector<unsigned char> raw(pixels);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
            throw ParseError("short read: truncated IDX image data");
        Tensor t = Tensor::zeros({1, rows, cols});
        for (std::size_t p = 0; p < pixels; ++p) t.data[p] = raw[p] / 255.0;
        images.push_back(std::move(t));
    }
    return images;
}

std::vector<std::size_t> load_idx_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    if (read_u32_be(f, "idx magic") != kIdxLabelsMagic)
        throw ParseError("bad magic: not an IDX label file");
    const std::uint32_t count = read_u32_be(f, "idx label count");
    std::vector<unsigned char> raw(count);
    if (count > 0 &&
        !f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count)))
        throw ParseError("short read: truncated IDX label data");
    return {raw.begin(), raw.end()};
}

void save_idx_images(const std::vector<Tensor>& images, const std::string& path) {
    if (images.empty()) throw ContractViolation("save_idx_images: no images");
    const auto& shape = images.front().shape;
    if (shape.size() != 3 || shape[0] != 1)
        throw ContractViolation("save_idx_images: images must be [1,h,w]");
    ensure_parent_dir(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open for write: " + path);
    write_u32_be(f, kIdxImagesMagic);
    write_u32_be(f, static_cast<std::uint32_t>(images.size()));
    write_u32_be(f, static_cast<std::uint32_t>(shape[1]));
    write_u32_be(f, static_cast<std::uint32_t>(shape[2]));
    for (const Tensor& t : images) {
        if (t.shape != shape) throw ContractViolation("save_idx_images: mixed image shapes");
        for (double v : t.data) {
            const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            f.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
        }
    }
    if (!f) throw ParseError("write failed: " + path);
}

void save_idx_labels(const std::vector<std::size_t>& labels, const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open for write: " + path);
    write_u32_be(f, kIdxLabelsMagic);
    write_u32_be(f, static_cast<std::uint32_t>(labels.size()));
    for (std::size_t l : labels) {
        if (l > 255) throw ContractViolation("save_idx_labels: label exceeds byte range");
        f.put(static_cast<char>(static_cast<unsigned char>(l)));
    }
    if (!f) throw ParseError("write failed: " + path);
}

} // namespace devifuzz
