#include "se3movf/dataset.hpp"

#include <cstring>

#include <json.hpp>

#include "se3movf/errors.hpp"

namespace se3movf {

namespace {

constexpr int kContainerVersion = 1;

Dataset<float> split_from_arrays(const NpyArray& images, const NpyArray& labels,
                                 int resize_to) {
    if (images.shape.size() != 4 && images.shape.size() != 5)
        throw ShapeMismatch("image array must have rank 4 or 5, got rank " +
                            std::to_string(images.shape.size()));
    const std::size_t n = images.shape[0];
    const int w = static_cast<int>(images.shape[1]);
    const int h = static_cast<int>(images.shape[2]);
    const int d = static_cast<int>(images.shape[3]);
    const int c = images.shape.size() == 5 ? static_cast<int>(images.shape[4]) : 1;
    const std::size_t stride = static_cast<std::size_t>(w) * h * d * c;

    Dataset<float> ds;
    for (std::size_t i = 0; i < n; ++i) {
        Volume v(w, h, d, c);
        switch (images.dtype) {
            case NpyDtype::U8:
                for (std::size_t k = 0; k < stride; ++k)
                    v.data[k] = static_cast<float>(images.payload[i * stride + k]) / 255.0f;
                break;
            case NpyDtype::F32:
                std::memcpy(v.data.data(), images.payload.data() + i * stride * 4, stride * 4);
                break;
            case NpyDtype::F64: {
                const double* p =
                    reinterpret_cast<const double*>(images.payload.data()) + i * stride;
                for (std::size_t k = 0; k < stride; ++k) v.data[k] = static_cast<float>(p[k]);
                break;
            }
        }
        if (resize_to > 0) v = resize_trilinear(v, resize_to, resize_to, resize_to);
        ds.images.push_back(std::move(v));
    }

    if (labels.element_count() != n)
        throw ShapeMismatch("label count " + std::to_string(labels.element_count()) +
                            " does not match image count " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        switch (labels.dtype) {
            case NpyDtype::U8: ds.labels.push_back(labels.payload[i]); break;
            case NpyDtype::F32:
                ds.labels.push_back(static_cast<int>(
                    reinterpret_cast<const float*>(labels.payload.data())[i]));
                break;
            case NpyDtype::F64:
                ds.labels.push_back(static_cast<int>(
                    reinterpret_cast<const double*>(labels.payload.data())[i]));
                break;
        }
    }
    return ds;
}

bool is_container(const std::map<std::string, std::vector<std::uint8_t>>& files) {
    return files.count("manifest.json") > 0;
}

} // namespace

std::vector<std::uint8_t> npz_to_container(std::span<const std::uint8_t> npz_bytes) {
    auto files = zip_read(npz_bytes);
    nlohmann::json manifest;
    manifest["container_version"] = kContainerVersion;
    manifest["value_rule"] = "u8 entries are rescaled to [0,1] by /255 when loaded";
    manifest["entries"] = nlohmann::json::array();

    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
    for (auto& [name, data] : files) {
        std::string key = name;
        if (key.size() > 4 && key.substr(key.size() - 4) == ".npy")
            key = key.substr(0, key.size() - 4);
        const NpyArray a = npy_parse(data); // validates the entry
        nlohmann::json e;
        e["name"] = key;
        e["shape"] = a.shape;
        e["dtype"] = a.dtype == NpyDtype::U8 ? "u1" : (a.dtype == NpyDtype::F32 ? "f4" : "f8");
        manifest["entries"].push_back(e);
        out.emplace_back("data/" + key + ".npy", std::move(data));
    }
    const std::string mtext = manifest.dump(2);
    out.insert(out.begin(),
               {"manifest.json", std::vector<std::uint8_t>(mtext.begin(), mtext.end())});
    return zip_write(out);
}

std::vector<std::uint8_t> container_to_npz(std::span<const std::uint8_t> container_bytes) {
    auto files = zip_read(container_bytes);
    if (!is_container(files)) throw MissingEntry("manifest.json");
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
    for (auto& [name, data] : files) {
        if (name.rfind("data/", 0) != 0) continue;
        out.emplace_back(name.substr(5), std::move(data));
    }
    return zip_write(out);
}

DatasetSplits load_dataset_file(const std::string& path, int resize_to) {
    const auto bytes = read_file(path);
    auto files = zip_read(bytes);
    const std::string prefix = is_container(files) ? "data/" : "";

    auto get = [&](const std::string& key) -> NpyArray {
        for (const std::string cand : {prefix + key + ".npy", prefix + key}) {
            auto it = files.find(cand);
            if (it != files.end()) return npy_parse(it->second);
        }
        throw MissingEntry(key);
    };

    DatasetSplits s;
    s.train = split_from_arrays(get("train_images"), get("train_labels"), resize_to);
    s.val = split_from_arrays(get("val_images"), get("val_labels"), resize_to);
    s.test = split_from_arrays(get("test_images"), get("test_labels"), resize_to);
    return s;
}

} // namespace se3movf
