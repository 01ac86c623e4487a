#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "torusflow/field.hpp"

namespace torusflow {

// Raw field file: header of 4 little-endian u32 (magic, d, n, ncomp), then
// the component blocks as little-endian doubles, x-fastest within each block.
inline constexpr std::uint32_t field_file_magic = 0x53544C47u;

static_assert(std::endian::native == std::endian::little,
              "raw field I/O assumes a little-endian host");

/// %.17g: shortest text that round-trips an IEEE double.
inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_field_raw(const std::string& path, const FieldBase& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    const std::uint32_t header[4] = {field_file_magic, static_cast<std::uint32_t>(f.grid().dim()),
                                     static_cast<std::uint32_t>(f.grid().n()),
                                     static_cast<std::uint32_t>(f.ncomp())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    auto raw = f.raw();
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!out) throw io_error("write failed: " + path);
}

namespace detail {

struct RawFieldHeader {
    int dim;
    int n;
    int ncomp;
};

inline RawFieldHeader read_field_header(std::ifstream& in, const std::string& path) {
    std::uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw io_error("truncated header: " + path);
    if (header[0] != field_file_magic) throw io_error("bad magic: " + path);
    return RawFieldHeader{static_cast<int>(header[1]), static_cast<int>(header[2]),
                          static_cast<int>(header[3])};
}

template <class FieldT>
FieldT read_field_raw_impl(const std::string& path, int expect_ncomp_factor) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    const RawFieldHeader h = read_field_header(in, path);
    TorusGrid grid(h.dim, h.n);
    FieldT f(grid);
    const int want = expect_ncomp_factor == 0 ? 1 : expect_ncomp_factor;
    if (h.ncomp != want)
        throw io_error("component count mismatch in " + path + ": file has " +
                       std::to_string(h.ncomp) + ", expected " + std::to_string(want));
    auto raw = f.raw();
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!in) throw io_error("truncated data: " + path);
    return f;
}

} // namespace detail

inline ScalarField read_scalar_field(const std::string& path) {
    return detail::read_field_raw_impl<ScalarField>(path, 1);
}

inline VectorField read_vector_field(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw io_error("cannot open: " + path);
    const auto h = detail::read_field_header(probe, path);
    probe.close();
    return detail::read_field_raw_impl<VectorField>(path, h.dim);
}

inline MatrixField read_matrix_field(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw io_error("cannot open: " + path);
    const auto h = detail::read_field_header(probe, path);
    probe.close();
    return detail::read_field_raw_impl<MatrixField>(path, h.dim * h.dim);
}

} // namespace torusflow
