#include <fstream>
#include <ostream>

#include "mita/binary_io.hpp"
#include "mita/scenarios.hpp"

namespace mita {

namespace {
constexpr std::string_view kDataMagic = "MITADAT1";
constexpr std::uint64_t kMaxRows = 1ULL << 32;
constexpr std::uint64_t kMaxDim = 1ULL << 20;
} // namespace

void write_dataset(std::ostream& os, const LabeledBatch& data) {
    data.validate();
    binary::put_magic(os, kDataMagic);
    binary::put_u64(os, data.size());
    binary::put_u64(os, static_cast<std::uint64_t>(data.x.cols()));
    binary::put_u64(os, data.num_classes);
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            binary::put_f64(os, data.x(i, j));
        }
    }
    for (int y : data.labels) {
        binary::put_u32(os, static_cast<std::uint32_t>(y));
    }
    for (std::uint8_t t : data.tags) {
        os.put(static_cast<char>(t));
    }
    if (!os) {
        throw IoError("failed to write dataset");
    }
}

LabeledBatch read_dataset(std::istream& is) {
    binary::expect_magic(is, kDataMagic);
    const std::uint64_t n = binary::get_u64(is, "n");
    const std::uint64_t d = binary::get_u64(is, "d");
    const std::uint64_t k = binary::get_u64(is, "K");
    if (n > kMaxRows || d == 0 || d > kMaxDim || k < 2 || k > kMaxDim) {
        throw IoError("implausible dataset header");
    }
    LabeledBatch out;
    out.num_classes = static_cast<std::size_t>(k);
    out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
            out.x(i, j) = binary::get_f64(is, "samples");
        }
    }
    out.labels.resize(n);
    for (auto& y : out.labels) {
        y = static_cast<int>(binary::get_u32(is, "labels"));
    }
    out.tags.resize(n);
    if (n > 0) {
        binary::read_exact(is, reinterpret_cast<char*>(out.tags.data()), n, "tags");
    }
    try {
        out.validate();
    } catch (const Error& e) {
        throw IoError(std::string("invalid dataset: ") + e.what());
    }
    return out;
}

void save_dataset(const std::string& path, const LabeledBatch& data) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_dataset(os, data);
}

LabeledBatch load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open dataset " + path);
    }
    return read_dataset(is);
}

void write_dataset_csv(std::ostream& os, const LabeledBatch& data) {
    data.validate();
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
        os << 'x' << j << ',';
    }
    os << "label,tag\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            os << data.x(i, j) << ',';
        }
        const auto r = static_cast<std::size_t>(i);
        os << data.labels[r] << ',' << static_cast<int>(data.tags[r]) << '\n';
    }
}

} // namespace mita
