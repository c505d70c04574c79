#include <fstream>

#include "mita/binary_io.hpp"
#include "mita/net.hpp"

namespace mita {

namespace {
constexpr std::string_view kNetMagic = "MITANET1";
constexpr std::uint64_t kMaxDim = 1u << 24;
} // namespace

void write_net(std::ostream& os, const ParamNet& net) {
    const NetSpec& s = net.spec();
    binary::put_magic(os, kNetMagic);
    binary::put_u64(os, s.input_dim);
    binary::put_u64(os, s.hidden_dims.size());
    for (std::size_t h : s.hidden_dims) {
        binary::put_u64(os, h);
    }
    binary::put_u64(os, s.num_classes);
    binary::put_u64(os, s.activation == Activation::relu ? 0 : 1);
    binary::put_u64(os, s.use_norm_layers ? 1 : 0);
    for (double v : net.params()) {
        binary::put_f64(os, v);
    }
    for (const NormStats& n : net.norm_stats()) {
        for (double v : n.mean) binary::put_f64(os, v);
        for (double v : n.var) binary::put_f64(os, v);
    }
    if (!os) {
        throw IoError("failed to write net checkpoint");
    }
}

ParamNet read_net(std::istream& is) {
    binary::expect_magic(is, kNetMagic);
    auto dim = [&](const char* what) {
        const std::uint64_t v = binary::get_u64(is, what);
        if (v > kMaxDim) {
            throw IoError(std::string("implausible ") + what + " in checkpoint");
        }
        return static_cast<std::size_t>(v);
    };
    NetSpec s;
    s.input_dim = dim("input_dim");
    const std::size_t hidden = dim("hidden count");
    for (std::size_t i = 0; i < hidden; ++i) {
        s.hidden_dims.push_back(dim("hidden dim"));
    }
    s.num_classes = dim("num_classes");
    const std::uint64_t act = binary::get_u64(is, "activation");
    if (act > 1) {
        throw IoError("unknown activation code in checkpoint");
    }
    s.activation = act == 0 ? Activation::relu : Activation::tanh;
    const std::uint64_t norm = binary::get_u64(is, "use_norm_layers");
    if (norm > 1) {
        throw IoError("bad norm flag in checkpoint");
    }
    s.use_norm_layers = norm == 1;
    try {
        s.validate();
    } catch (const SpecError& e) {
        throw IoError(std::string("invalid net spec in checkpoint: ") + e.what());
    }

    Vector params(static_cast<Eigen::Index>(s.param_count()));
    for (auto& v : params) {
        v = binary::get_f64(is, "params");
    }
    std::vector<NormStats> stats;
    for (std::size_t l = 0; l < s.norm_layer_count(); ++l) {
        const auto w = static_cast<Eigen::Index>(s.hidden_dims[l]);
        NormStats n{Vector(w), Vector(w)};
        for (auto& v : n.mean) v = binary::get_f64(is, "running mean");
        for (auto& v : n.var) v = binary::get_f64(is, "running var");
        stats.push_back(std::move(n));
    }
    try {
        return {std::move(s), std::move(params), std::move(stats)};
    } catch (const SpecError& e) {
        throw IoError(std::string("invalid checkpoint: ") + e.what());
    }
}

void save_net(const std::string& path, const ParamNet& net) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_net(os, net);
}

ParamNet load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open checkpoint " + path);
    }
    return read_net(is);
}

} // namespace mita
