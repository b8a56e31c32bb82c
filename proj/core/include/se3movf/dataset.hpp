#pragma once

// Dataset ingestion (NPZ or the internal container) and the container
// conversion used by the `convert` CLI subcommand. The container is a ZIP
// holding the original NPY entries verbatim under data/ plus a JSON manifest,
// so payload bytes survive a round trip exactly.

#include <string>
#include <vector>

#include "se3movf/npy.hpp"
#include "se3movf/train.hpp"

namespace se3movf {

struct DatasetSplits {
    Dataset<float> train, val, test;
};

// NPZ bytes -> container bytes (and back). Conversion metadata, including the
// u8 -> [0,1] rescale rule applied at load time, is recorded in the manifest.
std::vector<std::uint8_t> npz_to_container(std::span<const std::uint8_t> npz_bytes);
std::vector<std::uint8_t> container_to_npz(std::span<const std::uint8_t> container_bytes);

// Accepts either an NPZ or a container file. Expects <split>_images and
// <split>_labels entries; images of rank 4 (N,W,H,D) or 5 (N,W,H,D,C).
// resize_to > 0 resizes each volume to a cube of that side.
DatasetSplits load_dataset_file(const std::string& path, int resize_to = 0);

} // namespace se3movf
