#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "carnotlab/parallel.hpp"
#include "carnotlab/rng.hpp"
#include "carnotlab/sampler.hpp"

namespace carnotlab {

// Binary sample-bank file for uniform-grid path banks, so expensive banks
// can be reused across experiments.
//
// Layout (little-endian):
//   magic "CLABBANK" (8 bytes), u32 version = 1, u32 pad = 0,
//   u64 master_seed, u64 chunk_size, u64 K, u64 substeps, f64 beta, u64 count,
// then `count` fixed-width records of 4*(K+1) f64:
//   bx[0..K], by[0..K], area[0..K], w[0..K].
struct BankHeader {
    std::uint64_t master_seed = 0;
    std::uint64_t chunk_size = 0;
    std::uint64_t K = 0;
    std::uint64_t substeps = 0;
    double beta = 0.0;
    std::uint64_t count = 0;
};

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_f64(std::ostream& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(out, u);
}
inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}
inline std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
inline double get_f64(std::istream& in) {
    const std::uint64_t u = get_u64(in);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}
} // namespace detail

// Deterministic uniform-grid path bank generated from a seed plan.
inline std::vector<PathSample> make_bank(const SeedPlan& plan, std::size_t count, std::size_t K,
                                         int substeps, double beta, int threads) {
    std::vector<PathSample> bank(count);
    const auto grid = uniform_grid(K);
    parallel_chunks(count, plan.chunk_size, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            bank[i] = sample_path_at(grid, substeps, beta, plan.path_base(i));
    });
    return bank;
}

inline void write_bank(const std::string& file, const BankHeader& header,
                       const std::vector<PathSample>& bank) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("write_bank: cannot open " + file);
    out.write("CLABBANK", 8);
    detail::put_u32(out, 1);
    detail::put_u32(out, 0);
    detail::put_u64(out, header.master_seed);
    detail::put_u64(out, header.chunk_size);
    detail::put_u64(out, header.K);
    detail::put_u64(out, header.substeps);
    detail::put_f64(out, header.beta);
    detail::put_u64(out, bank.size());
    for (const auto& ps : bank) {
        if (ps.size() != header.K + 1)
            throw std::invalid_argument("write_bank: path size does not match header K");
        for (double v : ps.bx) detail::put_f64(out, v);
        for (double v : ps.by) detail::put_f64(out, v);
        for (double v : ps.area) detail::put_f64(out, v);
        for (double v : ps.w) detail::put_f64(out, v);
    }
    if (!out) throw std::runtime_error("write_bank: write failed on " + file);
}

inline std::pair<BankHeader, std::vector<PathSample>> read_bank(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("read_bank: cannot open " + file);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "CLABBANK")
        throw std::runtime_error("read_bank: bad magic in " + file);
    const std::uint32_t version = detail::get_u32(in);
    if (version != 1) throw std::runtime_error("read_bank: unsupported version");
    detail::get_u32(in);
    BankHeader h;
    h.master_seed = detail::get_u64(in);
    h.chunk_size = detail::get_u64(in);
    h.K = detail::get_u64(in);
    h.substeps = detail::get_u64(in);
    h.beta = detail::get_f64(in);
    h.count = detail::get_u64(in);
    if (!in) throw std::runtime_error("read_bank: truncated header in " + file);

    const auto grid = uniform_grid(h.K);
    std::vector<PathSample> bank(h.count);
    for (auto& ps : bank) {
        ps.beta = h.beta;
        ps.grid.assign(1, 0.0);
        ps.grid.insert(ps.grid.end(), grid.begin(), grid.end());
        const std::size_t len = h.K + 1;
        ps.bx.resize(len);
        ps.by.resize(len);
        ps.area.resize(len);
        ps.w.resize(len);
        for (auto& v : ps.bx) v = detail::get_f64(in);
        for (auto& v : ps.by) v = detail::get_f64(in);
        for (auto& v : ps.area) v = detail::get_f64(in);
        for (auto& v : ps.w) v = detail::get_f64(in);
        if (!in) throw std::runtime_error("read_bank: truncated record in " + file);
    }
    return {h, std::move(bank)};
}

} // namespace carnotlab
