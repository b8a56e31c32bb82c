#pragma once

// NPY v1.0 reader/writer (little-endian <u1/<f4/<f8, C-order only) and the
// NPZ (ZIP of NPY) loader used for MedMNIST-style datasets.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "se3movf/volume.hpp"

namespace se3movf {

enum class NpyDtype { U8, F32, F64 };

struct NpyArray {
    NpyDtype dtype = NpyDtype::F32;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> payload; // raw little-endian element bytes

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
    std::size_t element_size() const {
        switch (dtype) {
            case NpyDtype::U8: return 1;
            case NpyDtype::F32: return 4;
            case NpyDtype::F64: return 8;
        }
        return 0;
    }
};

NpyArray npy_parse(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> npy_serialize(const NpyArray& a);

// Rank 3 or 4 arrays become volumes; u8 values are rescaled to [0,1].
Volume volume_from_npy(const NpyArray& a);
Volume load_npy(std::span<const std::uint8_t> bytes);

template <typename T>
NpyArray npy_from_volume(const VolumeT<T>& v) {
    NpyArray a;
    a.dtype = sizeof(T) == 8 ? NpyDtype::F64 : NpyDtype::F32;
    a.shape = {static_cast<std::size_t>(v.w), static_cast<std::size_t>(v.h),
               static_cast<std::size_t>(v.d), static_cast<std::size_t>(v.c)};
    a.payload.resize(v.data.size() * sizeof(T));
    std::memcpy(a.payload.data(), v.data.data(), a.payload.size());
    return a;
}

// ZIP container, store + deflate on read, store on write.
std::map<std::string, std::vector<std::uint8_t>> zip_read(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> zip_write(
    const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& entries);

std::map<std::string, NpyArray> load_npz_arrays(std::span<const std::uint8_t> bytes);
std::map<std::string, Volume> load_npz(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

} // namespace se3movf
