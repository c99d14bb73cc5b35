#include "core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace egs {
namespace {

constexpr char kMagic[8] = {'E', 'G', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::string read_str(std::istream& is) {
    uint32_t n = read_u32(is);
    check_contract(n < (1u << 20), "checkpoint: corrupt string length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& module_name,
                     const ParamStore& params,
                     const std::map<std::string, std::string>& metadata) {
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    write_str(os, module_name);
    write_u32(os, static_cast<uint32_t>(params.items.size()));
    for (auto& [name, p] : params.items) {
        write_str(os, name);
        write_u32(os, static_cast<uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) write_u32(os, static_cast<uint32_t>(d));
        write_u32(os, kDtypeF32);
    }
    for (auto& [name, p] : params.items) {
        os.write(reinterpret_cast<const char*>(p->value.v.data()),
                 static_cast<std::streamsize>(p->value.v.size() * sizeof(float)));
    }
    write_u32(os, static_cast<uint32_t>(metadata.size()));
    for (auto& [k, v] : metadata) {
        write_str(os, k);
        write_str(os, v);
    }
    check_contract(os.good(), "checkpoint: write failed for " + path);
}

std::map<std::string, std::string> load_checkpoint(const std::string& path,
                                                   const std::string& expected_module,
                                                   ParamStore& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    check_contract(std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in " + path);
    uint32_t ver = read_u32(is);
    check_contract(ver == kVersion, "checkpoint: unsupported version");
    std::string module = read_str(is);
    check_contract(expected_module.empty() || module == expected_module,
                   "checkpoint: module '" + module + "' does not match expected '" +
                       expected_module + "'");
    uint32_t n = read_u32(is);
    check_contract(n == params.items.size(), "checkpoint: parameter count mismatch in " + path);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = read_str(is);
        auto& [pname, p] = params.items[i];
        check_contract(name == pname, "checkpoint: parameter '" + name + "' does not match '" +
                                          pname + "'");
        uint32_t nd = read_u32(is);
        check_contract(nd == p->value.shape.size(), "checkpoint: rank mismatch for " + name);
        for (uint32_t d = 0; d < nd; ++d)
            check_contract(static_cast<int>(read_u32(is)) == p->value.shape[d],
                           "checkpoint: shape mismatch for " + name);
        check_contract(read_u32(is) == kDtypeF32, "checkpoint: unsupported dtype for " + name);
    }
    for (auto& [pname, p] : params.items) {
        is.read(reinterpret_cast<char*>(p->value.v.data()),
                static_cast<std::streamsize>(p->value.v.size() * sizeof(float)));
    }
    std::map<std::string, std::string> meta;
    uint32_t nm = read_u32(is);
    for (uint32_t i = 0; i < nm; ++i) {
        std::string k = read_str(is);
        meta[k] = read_str(is);
    }
    check_contract(is.good(), "checkpoint: truncated file " + path);
    return meta;
}

std::map<std::string, std::string> read_checkpoint_metadata(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    check_contract(std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in " + path);
    check_contract(read_u32(is) == kVersion, "checkpoint: unsupported version");
    read_str(is);
    uint32_t n = read_u32(is);
    uint64_t payload = 0;
    for (uint32_t i = 0; i < n; ++i) {
        read_str(is);
        uint32_t nd = read_u32(is);
        uint64_t numel = 1;
        for (uint32_t d = 0; d < nd; ++d) numel *= read_u32(is);
        read_u32(is);
        payload += numel * sizeof(float);
    }
    is.seekg(static_cast<std::streamoff>(payload), std::ios::cur);
    std::map<std::string, std::string> meta;
    uint32_t nm = read_u32(is);
    for (uint32_t i = 0; i < nm; ++i) {
        std::string k = read_str(is);
        meta[k] = read_str(is);
    }
    return meta;
}

}  // namespace egs
