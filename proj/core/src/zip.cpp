#include <cstring>
#include <zlib.h>

#include "se3movf/errors.hpp"
#include "se3movf/npy.hpp"

// Minimal ZIP support: read store/deflate entries via the central directory,
// write store entries. No zip64 (checkpoints and desk-scale datasets are
// well under 4 GiB).

namespace se3movf {

namespace {

std::uint16_t rd16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t rd32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void wr16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
}
void wr32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    wr16(v, x & 0xffff);
    wr16(v, (x >> 16) & 0xffff);
}

std::vector<std::uint8_t> inflate_raw(const std::uint8_t* src, std::size_t src_len,
                                      std::size_t dst_len) {
    std::vector<std::uint8_t> out(dst_len);
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw BadZip("inflateInit failed");
    zs.next_in = const_cast<Bytef*>(src);
    zs.avail_in = static_cast<uInt>(src_len);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(dst_len);
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != dst_len)
        throw BadZip("deflate stream corrupt or size mismatch");
    return out;
}

} // namespace

std::map<std::string, std::vector<std::uint8_t>> zip_read(std::span<const std::uint8_t> bytes) {
    // locate end-of-central-directory (scan backwards over a possible comment)
    if (bytes.size() < 22) throw BadZip("file too small to be a ZIP archive");
    std::size_t eocd = std::string::npos;
    for (std::size_t i = bytes.size() - 22; ; --i) {
        if (rd32(bytes.data() + i) == 0x06054b50) { eocd = i; break; }
        if (i == 0 || bytes.size() - i > 22 + 0xffff) break;
    }
    if (eocd == std::string::npos) throw BadZip("end-of-central-directory signature not found");

    const std::uint16_t n_entries = rd16(bytes.data() + eocd + 10);
    const std::uint32_t cd_size = rd32(bytes.data() + eocd + 12);
    const std::uint32_t cd_off = rd32(bytes.data() + eocd + 16);
    if (static_cast<std::size_t>(cd_off) + cd_size > bytes.size())
        throw BadZip("central directory out of bounds");

    std::map<std::string, std::vector<std::uint8_t>> out;
    std::size_t p = cd_off;
    for (int e = 0; e < n_entries; ++e) {
        if (p + 46 > bytes.size() || rd32(bytes.data() + p) != 0x02014b50)
            throw BadZip("central directory entry " + std::to_string(e) + " corrupt");
        const std::uint16_t method = rd16(bytes.data() + p + 10);
        const std::uint32_t csize = rd32(bytes.data() + p + 20);
        const std::uint32_t usize = rd32(bytes.data() + p + 24);
        const std::uint16_t name_len = rd16(bytes.data() + p + 28);
        const std::uint16_t extra_len = rd16(bytes.data() + p + 30);
        const std::uint16_t comment_len = rd16(bytes.data() + p + 32);
        const std::uint32_t local_off = rd32(bytes.data() + p + 42);
        if (p + 46 + name_len > bytes.size()) throw BadZip("entry name out of bounds");
        std::string name(reinterpret_cast<const char*>(bytes.data()) + p + 46, name_len);
        p += 46 + name_len + extra_len + comment_len;

        // local header: re-read name/extra lengths, payload follows
        if (static_cast<std::size_t>(local_off) + 30 > bytes.size() ||
            rd32(bytes.data() + local_off) != 0x04034b50)
            throw BadZip("local header for '" + name + "' corrupt");
        const std::uint16_t lname = rd16(bytes.data() + local_off + 26);
        const std::uint16_t lextra = rd16(bytes.data() + local_off + 28);
        const std::size_t data_off = static_cast<std::size_t>(local_off) + 30 + lname + lextra;
        if (data_off + csize > bytes.size())
            throw BadZip("payload for '" + name + "' out of bounds");

        if (method == 0) {
            if (csize != usize) throw BadZip("stored entry '" + name + "' size mismatch");
            out[name].assign(bytes.begin() + data_off, bytes.begin() + data_off + csize);
        } else if (method == 8) {
            out[name] = inflate_raw(bytes.data() + data_off, csize, usize);
        } else {
            throw BadZip("entry '" + name + "' uses unsupported method " +
                         std::to_string(method));
        }
    }
    return out;
}

std::vector<std::uint8_t> zip_write(
    const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& entries) {
    std::vector<std::uint8_t> out;
    struct CdRecord {
        std::string name;
        std::uint32_t crc, size, offset;
    };
    std::vector<CdRecord> cd;

    for (const auto& [name, data] : entries) {
        const auto offset = static_cast<std::uint32_t>(out.size());
        const auto crc = static_cast<std::uint32_t>(
            crc32(0L, data.data(), static_cast<uInt>(data.size())));
        wr32(out, 0x04034b50);
        wr16(out, 20);      // version needed
        wr16(out, 0);       // flags
        wr16(out, 0);       // method: store
        wr16(out, 0);       // mod time
        wr16(out, 0x21);    // mod date
        wr32(out, crc);
        wr32(out, static_cast<std::uint32_t>(data.size()));
        wr32(out, static_cast<std::uint32_t>(data.size()));
        wr16(out, static_cast<std::uint16_t>(name.size()));
        wr16(out, 0);       // extra len
        out.insert(out.end(), name.begin(), name.end());
        out.insert(out.end(), data.begin(), data.end());
        cd.push_back({name, crc, static_cast<std::uint32_t>(data.size()), offset});
    }

    const auto cd_off = static_cast<std::uint32_t>(out.size());
    for (const auto& r : cd) {
        wr32(out, 0x02014b50);
        wr16(out, 20);  // version made by
        wr16(out, 20);  // version needed
        wr16(out, 0);
        wr16(out, 0);
        wr16(out, 0);
        wr16(out, 0x21);
        wr32(out, r.crc);
        wr32(out, r.size);
        wr32(out, r.size);
        wr16(out, static_cast<std::uint16_t>(r.name.size()));
        wr16(out, 0);
        wr16(out, 0);
        wr16(out, 0);
        wr16(out, 0);
        wr32(out, 0);
        wr32(out, r.offset);
        out.insert(out.end(), r.name.begin(), r.name.end());
    }
    const auto cd_size = static_cast<std::uint32_t>(out.size()) - cd_off;

    wr32(out, 0x06054b50);
    wr16(out, 0);
    wr16(out, 0);
    wr16(out, static_cast<std::uint16_t>(cd.size()));
    wr16(out, static_cast<std::uint16_t>(cd.size()));
    wr32(out, cd_size);
    wr32(out, cd_off);
    wr16(out, 0);  // comment length
    return out;
}

} // namespace se3movf
