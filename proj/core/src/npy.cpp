#include "se3movf/npy.hpp"

#include <cstring>
#include <fstream>

#include "se3movf/errors.hpp"

namespace se3movf {

namespace {

const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string find_dict_value(const std::string& dict, const std::string& key) {
    auto pos = dict.find("'" + key + "'");
    if (pos == std::string::npos)
        throw BadMagic("npy header missing key '" + key + "'");
    pos = dict.find(':', pos);
    if (pos == std::string::npos)
        throw BadMagic("npy header malformed near '" + key + "'");
    ++pos;
    while (pos < dict.size() && dict[pos] == ' ') ++pos;
    // value runs to the next top-level comma or closing brace
    std::size_t end = pos;
    int depth = 0;
    for (; end < dict.size(); ++end) {
        char ch = dict[end];
        if (ch == '(' || ch == '[') ++depth;
        else if (ch == ')' || ch == ']') { if (depth == 0) break; --depth; }
        else if ((ch == ',' || ch == '}') && depth == 0) break;
    }
    return dict.substr(pos, end - pos);
}

} // namespace

NpyArray npy_parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0)
        throw BadMagic("not an NPY file (bad magic)");
    const int ver_major = bytes[6], ver_minor = bytes[7];
    if (ver_major != 1 || ver_minor != 0)
        throw BadMagic("unsupported NPY version " + std::to_string(ver_major) + "." +
                       std::to_string(ver_minor));
    const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < 10 + header_len)
        throw TruncatedPayload("NPY header truncated");
    const std::string dict(reinterpret_cast<const char*>(bytes.data()) + 10, header_len);

    NpyArray a;
    const std::string descr = find_dict_value(dict, "descr");
    if (descr.find("u1") != std::string::npos) a.dtype = NpyDtype::U8;
    else if (descr.find("<f4") != std::string::npos) a.dtype = NpyDtype::F32;
    else if (descr.find("<f8") != std::string::npos) a.dtype = NpyDtype::F64;
    else throw UnsupportedDtype("unsupported descr " + descr + " (want |u1, <f4 or <f8)");

    const std::string fortran = find_dict_value(dict, "fortran_order");
    if (fortran.find("True") != std::string::npos)
        throw FortranOrder("fortran_order=True is not supported");
    else if (fortran.find("False") == std::string::npos)
        throw BadMagic("unparseable fortran_order field: " + fortran);

    std::string shape = find_dict_value(dict, "shape");
    for (std::size_t i = 0; i < shape.size();) {
        if (std::isdigit(static_cast<unsigned char>(shape[i]))) {
            std::size_t j = i;
            while (j < shape.size() && std::isdigit(static_cast<unsigned char>(shape[j]))) ++j;
            a.shape.push_back(std::stoull(shape.substr(i, j - i)));
            i = j;
        } else {
            ++i;
        }
    }

    const std::size_t need = a.element_count() * a.element_size();
    const std::size_t have = bytes.size() - 10 - header_len;
    if (have < need)
        throw TruncatedPayload("NPY payload truncated: need " + std::to_string(need) +
                               " bytes, have " + std::to_string(have));
    a.payload.assign(bytes.begin() + 10 + header_len, bytes.begin() + 10 + header_len + need);
    return a;
}

std::vector<std::uint8_t> npy_serialize(const NpyArray& a) {
    std::string descr;
    switch (a.dtype) {
        case NpyDtype::U8: descr = "|u1"; break;
        case NpyDtype::F32: descr = "<f4"; break;
        case NpyDtype::F64: descr = "<f8"; break;
    }
    std::string shape = "(";
    for (std::size_t i = 0; i < a.shape.size(); ++i)
        shape += std::to_string(a.shape[i]) + (a.shape.size() == 1 || i + 1 < a.shape.size() ? "," : "");
    shape += ")";
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
    // pad so that the payload starts at a multiple of 64
    std::size_t unpadded = 10 + dict.size() + 1;
    std::size_t pad = (64 - unpadded % 64) % 64;
    dict += std::string(pad, ' ');
    dict += '\n';

    std::vector<std::uint8_t> out;
    out.reserve(10 + dict.size() + a.payload.size());
    out.insert(out.end(), kMagic, kMagic + 6);
    out.push_back(1);
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>(dict.size() & 0xff));
    out.push_back(static_cast<std::uint8_t>((dict.size() >> 8) & 0xff));
    out.insert(out.end(), dict.begin(), dict.end());
    out.insert(out.end(), a.payload.begin(), a.payload.end());
    return out;
}

Volume volume_from_npy(const NpyArray& a) {
    if (a.shape.size() != 3 && a.shape.size() != 4)
        throw ShapeMismatch("volume arrays must have rank 3 or 4, got rank " +
                            std::to_string(a.shape.size()));
    const int w = static_cast<int>(a.shape[0]);
    const int h = static_cast<int>(a.shape[1]);
    const int d = static_cast<int>(a.shape[2]);
    const int c = a.shape.size() == 4 ? static_cast<int>(a.shape[3]) : 1;
    Volume v(w, h, d, c);
    const std::size_t n = v.data.size();
    switch (a.dtype) {
        case NpyDtype::U8:
            for (std::size_t i = 0; i < n; ++i)
                v.data[i] = static_cast<float>(a.payload[i]) / 255.0f;
            break;
        case NpyDtype::F32:
            std::memcpy(v.data.data(), a.payload.data(), n * 4);
            break;
        case NpyDtype::F64: {
            const double* p = reinterpret_cast<const double*>(a.payload.data());
            for (std::size_t i = 0; i < n; ++i) v.data[i] = static_cast<float>(p[i]);
            break;
        }
    }
    return v;
}

Volume load_npy(std::span<const std::uint8_t> bytes) {
    return volume_from_npy(npy_parse(bytes));
}

std::map<std::string, NpyArray> load_npz_arrays(std::span<const std::uint8_t> bytes) {
    std::map<std::string, NpyArray> out;
    for (auto& [name, data] : zip_read(bytes)) {
        std::string key = name;
        if (key.size() > 4 && key.substr(key.size() - 4) == ".npy")
            key = key.substr(0, key.size() - 4);
        out.emplace(key, npy_parse(data));
    }
    return out;
}

std::map<std::string, Volume> load_npz(std::span<const std::uint8_t> bytes) {
    std::map<std::string, Volume> out;
    for (auto& [name, a] : load_npz_arrays(bytes)) out.emplace(name, volume_from_npy(a));
    return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

} // namespace se3movf
