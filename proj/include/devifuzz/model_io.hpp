#pragma once

#include <string>
#include <vector>

#include "devifuzz/model.hpp"

namespace devifuzz {

/// Models are stored as a pair of files sharing a base path:
///   <base>.manifest  - line-oriented text description of the layer chain
///   <base>.weights   - "DVFW" magic, u32 LE count, count * f32 LE
/// Round-trips are bit-exact.
void save_model(const ModelGraph& m, const std::string& base_path);
ModelGraph load_model(const std::string& base_path);

std::string manifest_to_text(const ModelManifest& m);
ModelManifest manifest_from_text(const std::string& text);

/// IDX image/label files, big-endian headers, as in the public MNIST
/// distribution (magic 0x00000803 for images, 0x00000801 for labels).
/// Pixels are scaled from bytes 0..255 to [0,1] on load and back on save.
std::vector<Tensor> load_idx_images(const std::string& path);
std::vector<std::size_t> load_idx_labels(const std::string& path);
void save_idx_images(const std::vector<Tensor>& images, const std::string& path);
void save_idx_labels(const std::vector<std::size_t>& labels, const std::string& path);

} // namespace devifuzz
