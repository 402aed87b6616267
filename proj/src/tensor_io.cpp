#include "ecgnn/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "ecgnn/errors.hpp"

static_assert(std::endian::native == std::endian::little, "ECGF I/O assumes a little-endian host");

namespace ecgnn {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'F'};
constexpr std::size_t kMaxDim = 1u << 28;  // per-dimension sanity bound

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw FormatError(std::string("ECGF: truncated ") + what);
    return v;
}

}  // namespace

void write_tensor_record(std::ostream& os, const Tensor& t, std::uint32_t version) {
    if (version != 1 && version != 2) {
        throw FormatError("ECGF: unsupported version " + std::to_string(version));
    }
    os.write(kMagic, 4);
    write_u32(os, version);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    if (version == 1) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const float f = static_cast<float>(t.at(i));
            os.write(reinterpret_cast<const char*>(&f), 4);
        }
    } else {
        os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    }
    if (!os) throw FormatError("ECGF: write failed");
}

Tensor read_tensor_record(std::istream& is) {
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("ECGF: bad magic (not an ECGF tensor)");
    }
    const std::uint32_t version = read_u32(is, "version");
    if (version != 1 && version != 2) {
        throw FormatError("ECGF: unsupported version " + std::to_string(version));
    }
    const std::uint32_t rank = read_u32(is, "rank");
    if (rank == 0 || rank > 8) throw FormatError("ECGF: dimension overflow (rank " + std::to_string(rank) + ")");
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = read_u32(is, "dims");
        if (d == 0 || d > kMaxDim) {
            throw FormatError("ECGF: dimension overflow (dim " + std::to_string(d) + ")");
        }
        shape[i] = d;
        numel *= d;
        if (numel > (1ull << 30)) throw FormatError("ECGF: dimension overflow (total element count)");
    }
    std::vector<double> data(numel);
    if (version == 1) {
        std::vector<float> raw(numel);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(numel * 4));
        if (static_cast<std::size_t>(is.gcount()) != numel * 4) throw FormatError("ECGF: truncated payload");
        for (std::size_t i = 0; i < numel; ++i) data[i] = static_cast<double>(raw[i]);
    } else {
        is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(numel * 8));
        if (static_cast<std::size_t>(is.gcount()) != numel * 8) throw FormatError("ECGF: truncated payload");
    }
    return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t, std::uint32_t version) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("ECGF: cannot open '" + path + "' for writing");
    write_tensor_record(os, t, version);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("ECGF: cannot open '" + path + "'");
    return read_tensor_record(is);
}

}  // namespace ecgnn
