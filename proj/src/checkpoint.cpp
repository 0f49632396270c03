#include "srrl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace srrl {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, const double* data, std::size_t n) {
    // host is little-endian on every supported target
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write("SRRL", 4);
    write_u32(os, kCheckpointVersion);
    for (const auto& [name, t] : entries) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, 2);
        write_u32(os, static_cast<std::uint32_t>(t.rows()));
        write_u32(os, static_cast<std::uint32_t>(t.cols()));
        write_f64(os, t.values().data(), t.values().size());
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SRRL", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    std::vector<std::pair<std::string, Tensor>> entries;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(is);
        if (rank < 1 || rank > 2) throw std::runtime_error("checkpoint: unsupported rank in " + path);
        std::uint32_t rows = 1, cols = 1;
        if (rank == 1) {
            cols = read_u32(is);
        } else {
            rows = read_u32(is);
            cols = read_u32(is);
        }
        Tensor t = Tensor::matrix(static_cast<int>(rows), static_cast<int>(cols));
        is.read(reinterpret_cast<char*>(t.values().data()),
                static_cast<std::streamsize>(t.values().size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "' in " + path);
        entries.emplace_back(std::move(name), std::move(t));
    }
    return entries;
}

}  // namespace srrl
