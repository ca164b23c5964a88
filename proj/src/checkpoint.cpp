#include "lordsig/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lordsig::io {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string context;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error(context + ": truncated checkpoint");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]))
                    << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

const CheckpointBlock* Checkpoint::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return &b;
    return nullptr;
}

std::string Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("checkpoint: missing meta key '" + key + "'");
    return it->second;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
        put_u16(out, static_cast<std::uint16_t>(k.size()));
        out.append(k);
        put_u16(out, static_cast<std::uint16_t>(v.size()));
        out.append(v);
    }
    put_u32(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
    for (const auto& b : ckpt.blocks) {
        put_u16(out, static_cast<std::uint16_t>(b.name.size()));
        out.append(b.name);
        put_u32(out, static_cast<std::uint32_t>(b.rows));
        put_u32(out, static_cast<std::uint32_t>(b.cols));
    }
    for (const auto& b : ckpt.blocks) {
        if (b.data.size() != static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols))
            throw std::invalid_argument("save_checkpoint: block '" + b.name + "' shape mismatch");
        for (double x : b.data) put_f64(out, x);
    }

    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(file.string() + ": cannot open for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error(file.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::runtime_error(file.string() + ": cannot open");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, 0, file.string()};

    if (r.str(4) != std::string(kMagic, 4))
        throw std::runtime_error(file.string() + ": not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error(file.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));

    Checkpoint ckpt;
    const std::uint32_t meta_count = r.u32();
    for (std::uint32_t i = 0; i < meta_count; ++i) {
        std::string k = r.str(r.u16());
        std::string v = r.str(r.u16());
        ckpt.meta.emplace(std::move(k), std::move(v));
    }
    const std::uint32_t block_count = r.u32();
    ckpt.blocks.resize(block_count);
    for (auto& b : ckpt.blocks) {
        b.name = r.str(r.u16());
        b.rows = static_cast<int>(r.u32());
        b.cols = static_cast<int>(r.u32());
    }
    for (auto& b : ckpt.blocks) {
        const std::size_t n = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
        b.data.resize(n);
        for (auto& x : b.data) x = r.f64();
    }
    if (r.pos != buf.size()) throw std::runtime_error(file.string() + ": trailing bytes");
    return ckpt;
}

}  // namespace lordsig::io
