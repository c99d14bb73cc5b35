#include "core/container.hpp"

#include <cstdint>
#include <fstream>

#include "core/common.hpp"

namespace egs {

void write_grid(const std::string& path, const GridFile& g) {
    check_contract(g.magic.size() == 7, "grid: magic must be 7 bytes");
    check_contract(g.values.ndim() == 2 && g.values.dim(0) == static_cast<int>(g.rows) &&
                       g.values.dim(1) == static_cast<int>(g.cols),
                   "grid: header/shape mismatch");
    std::ofstream os(path, std::ios::binary);
    check_contract(os.good(), "grid: cannot open " + path + " for writing");
    os.write(g.magic.data(), 7);
    auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); };
    w32(g.rows);
    w32(g.cols);
    w32(g.sample_rate);
    w32(g.window);
    w32(g.hop);
    os.write(reinterpret_cast<const char*>(&g.scale_min), 4);
    os.write(reinterpret_cast<const char*>(&g.scale_max), 4);
    os.write(reinterpret_cast<const char*>(g.values.v.data()),
             static_cast<std::streamsize>(g.values.v.size() * sizeof(float)));
    check_contract(os.good(), "grid: write failed for " + path);
}

GridFile read_grid(const std::string& path, const std::string& expected_magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw DataError("grid: cannot open " + path);
    GridFile g;
    char magic[7];
    is.read(magic, 7);
    g.magic.assign(magic, 7);
    if (!expected_magic.empty() && g.magic != expected_magic)
        throw DataError("grid: magic '" + g.magic + "' != expected '" + expected_magic + "' in " +
                        path);
    auto r32 = [&]() {
        uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    g.rows = r32();
    g.cols = r32();
    g.sample_rate = r32();
    g.window = r32();
    g.hop = r32();
    is.read(reinterpret_cast<char*>(&g.scale_min), 4);
    is.read(reinterpret_cast<char*>(&g.scale_max), 4);
    check_contract(g.rows < (1u << 24) && g.cols < (1u << 24), "grid: absurd dims in " + path);
    g.values = Tensor({static_cast<int>(g.rows), static_cast<int>(g.cols)});
    is.read(reinterpret_cast<char*>(g.values.v.data()),
            static_cast<std::streamsize>(g.values.v.size() * sizeof(float)));
    if (!is.good()) throw DataError("grid: truncated file " + path);
    return g;
}

}  // namespace egs
