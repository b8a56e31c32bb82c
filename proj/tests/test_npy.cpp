#include <doctest.h>

#include <random>

#include "se3movf/errors.hpp"
#include "se3movf/npy.hpp"

using namespace se3movf;

namespace {

// independent reference serializer used as the oracle for the reader
std::vector<std::uint8_t> reference_npy(const std::string& descr, bool fortran,
                                        const std::vector<std::size_t>& shape,
                                        const std::vector<std::uint8_t>& payload) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': " +
                       (fortran ? "True" : "False") + ", 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dict += ", ";
    }
    dict += "), }";
    while ((10 + dict.size() + 1) % 16 != 0) dict += ' ';
    dict += '\n';
    std::vector<std::uint8_t> out = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    out.push_back(dict.size() & 0xff);
    out.push_back((dict.size() >> 8) & 0xff);
    out.insert(out.end(), dict.begin(), dict.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

} // namespace

TEST_CASE("u8 NPY of shape (1,1,1) with value 255 loads as 1.0") {
    const auto bytes = reference_npy("|u1", false, {1, 1, 1}, {255});
    const Volume v = load_npy(bytes);
    CHECK(v.w == 1);
    CHECK(v.c == 1);
    CHECK(v.at(0, 0, 0, 0) == 1.0f);
}

TEST_CASE("f32 NPY of zeros loads as a zero volume") {
    const auto bytes = reference_npy("<f4", false, {2, 2, 2}, std::vector<std::uint8_t>(32, 0));
    const Volume v = load_npy(bytes);
    CHECK(v.w == 2);
    for (float x : v.data) CHECK(x == 0.0f);
}

TEST_CASE("f64 payloads are converted to 32-bit") {
    std::vector<double> vals = {0.5, -1.25};
    std::vector<std::uint8_t> payload(16);
    std::memcpy(payload.data(), vals.data(), 16);
    const auto bytes = reference_npy("<f8", false, {2, 1, 1}, payload);
    const Volume v = load_npy(bytes);
    CHECK(v.at(0, 0, 0, 0) == 0.5f);
    CHECK(v.at(1, 0, 0, 0) == -1.25f);
}

TEST_CASE("error cases name the offending field") {
    CHECK_THROWS_AS((void)load_npy(reference_npy("|u1", true, {1, 1, 1}, {0})), FortranOrder);
    CHECK_THROWS_AS((void)load_npy(reference_npy("<i4", false, {1, 1, 1}, {0, 0, 0, 0})),
                    UnsupportedDtype);
    auto truncated = reference_npy("<f4", false, {2, 2, 2}, std::vector<std::uint8_t>(16, 0));
    CHECK_THROWS_AS((void)load_npy(truncated), TruncatedPayload);
    std::vector<std::uint8_t> junk = {'P', 'K', 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS((void)load_npy(junk), BadMagic);
}

TEST_CASE("save/load round trip reproduces the numeric payload exactly") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> dist(-5, 5);
    Volume v(3, 4, 5, 2);
    for (auto& x : v.data) x = dist(rng);
    const Volume back = load_npy(npy_serialize(npy_from_volume(v)));
    CHECK(back.data == v.data);
    CHECK(back.same_shape(v));
}

TEST_CASE("our serializer parses under our parser and matches the reference header") {
    NpyArray a;
    a.dtype = NpyDtype::U8;
    a.shape = {2, 3};
    a.payload = {1, 2, 3, 4, 5, 6};
    const auto bytes = npy_serialize(a);
    const NpyArray b = npy_parse(bytes);
    CHECK(b.shape == a.shape);
    CHECK(b.payload == a.payload);
    CHECK((bytes.size() - a.payload.size()) % 64 == 0); // header alignment convention
}

TEST_CASE("zip round trip (store) and npz loading") {
    NpyArray zeros;
    zeros.dtype = NpyDtype::F32;
    zeros.shape = {2, 2, 2};
    zeros.payload.assign(32, 0);
    const auto entry = npy_serialize(zeros);
    const auto zip = zip_write({{"a.npy", entry}});
    const auto files = zip_read(zip);
    REQUIRE(files.size() == 1);
    CHECK(files.at("a.npy") == entry);

    const auto vols = load_npz(zip);
    REQUIRE(vols.count("a") == 1);
    for (float x : vols.at("a").data) CHECK(x == 0.0f);
}

TEST_CASE("empty archive loads as empty map") {
    const auto zip = zip_write({});
    CHECK(load_npz(zip).empty());
}

TEST_CASE("corrupted central directory raises BadZip") {
    auto zip = zip_write({{"a", {1, 2, 3}}});
    // smash the central-directory offset
    zip[zip.size() - 6] = 0xff;
    zip[zip.size() - 5] = 0xff;
    CHECK_THROWS_AS((void)zip_read(zip), BadZip);
    std::vector<std::uint8_t> tiny = {1, 2, 3};
    CHECK_THROWS_AS((void)zip_read(tiny), BadZip);
}

TEST_CASE("deflate entries are supported") {
    // raw-deflate stream for "hello" produced by zlib (fixed Huffman)
    // built here via compress2 would add a zlib wrapper, so store a known one
    const std::vector<std::uint8_t> raw = {0xcb, 0x48, 0xcd, 0xc9, 0xc9, 0x07, 0x00};
    // hand-build a zip with method 8
    std::vector<std::uint8_t> zip;
    auto w16 = [&](std::uint16_t x) { zip.push_back(x & 0xff); zip.push_back(x >> 8); };
    auto w32 = [&](std::uint32_t x) { w16(x & 0xffff); w16(x >> 16); };
    w32(0x04034b50); w16(20); w16(0); w16(8); w16(0); w16(0);
    w32(0x3610a686); // crc32("hello")
    w32(raw.size()); w32(5); w16(1); w16(0);
    zip.push_back('h');
    zip.insert(zip.end(), raw.begin(), raw.end());
    const auto cd_off = zip.size();
    w32(0x02014b50); w16(20); w16(20); w16(0); w16(8); w16(0); w16(0);
    w32(0x3610a686); w32(raw.size()); w32(5); w16(1); w16(0); w16(0); w16(0); w16(0);
    w32(0); w32(0);
    zip.push_back('h');
    const auto cd_size = zip.size() - cd_off;
    w32(0x06054b50); w16(0); w16(0); w16(1); w16(1); w32(cd_size); w32(cd_off); w16(0);

    const auto files = zip_read(zip);
    REQUIRE(files.count("h") == 1);
    CHECK(std::string(files.at("h").begin(), files.at("h").end()) == "hello");
}
