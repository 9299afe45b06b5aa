#include "rpsft/checkpoint.hpp"

#include "rpsft/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

namespace rpsft {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'S', 'V'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t offset() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("truncated ") + what, pos_);
        }
    }

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(T);
        return v;
    }

    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors) {
    if (tensors.size() > UINT32_MAX) {
        throw ParameterError("too many tensors for one checkpoint");
    }
    std::set<std::string> names;
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        if (name.empty() || name.size() > UINT16_MAX) {
            throw ParameterError("tensor name length must be 1..65535");
        }
        if (!names.insert(name).second) {
            throw ParameterError("duplicate tensor name " + name);
        }
        if (m.empty()) {
            throw ParameterError("tensor " + name + " is empty");
        }
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint64_t>(out, m.rows());
        put<std::uint64_t>(out, m.cols());
        for (double v : m.data()) {
            put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

NamedTensors decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    const std::string magic = in.text(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw FormatError("bad magic, not an RPSV checkpoint", 0);
    }
    const std::uint64_t version_at = in.offset();
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
    }
    const auto count = in.get<std::uint32_t>("tensor count");
    NamedTensors out;
    std::set<std::string> names;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint64_t entry_at = in.offset();
        const auto name_len = in.get<std::uint16_t>("name length");
        if (name_len == 0) {
            throw FormatError("empty tensor name", entry_at);
        }
        std::string name = in.text(name_len, "tensor name");
        if (!names.insert(name).second) {
            throw FormatError("duplicate tensor name " + name, entry_at);
        }
        const std::uint64_t dims_at = in.offset();
        const auto rows = in.get<std::uint64_t>("rows");
        const auto cols = in.get<std::uint64_t>("cols");
        if (rows == 0 || cols == 0) {
            throw FormatError("tensor " + name + " has a zero dimension", dims_at);
        }
        const std::uint64_t payload_at = in.offset();
        if (cols > (bytes.size() - payload_at) / 8 / rows) {
            throw FormatError("truncated payload of tensor " + name, payload_at);
        }
        std::vector<double> data(rows * cols);
        for (double& v : data) {
            v = std::bit_cast<double>(in.get<std::uint64_t>("payload"));
        }
        try {
            out.emplace_back(std::move(name), DenseMatrix(rows, cols, std::move(data)));
        } catch (const ValidationError& e) {
            throw FormatError(e.what(), payload_at);
        }
    }
    if (!in.done()) {
        throw FormatError("trailing bytes after the last tensor", in.offset());
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
    const auto bytes = encode_checkpoint(tensors);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw IoError("failed writing " + path.string());
    }
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) {
        throw IoError("failed reading " + path.string());
    }
    return decode_checkpoint(bytes);
}

NamedTensors to_tensors(const ModelParams& model) {
    NamedTensors out;
    for (const auto& [name, w] : model.layers()) {
        out.emplace_back(name, w);
    }
    return out;
}

NamedTensors to_tensors(const BasisSet& bases) {
    NamedTensors out;
    for (const auto& [name, b] : bases) {
        out.emplace_back(name + ".Uk", b.U_k().columns());
        out.emplace_back(name + ".Vk", b.V_k().columns());
        out.emplace_back(name + ".Sref", b.S_ref());
    }
    return out;
}

ModelParams model_from_tensors(const NamedTensors& tensors) {
    LayerMap layers;
    for (const auto& [name, m] : tensors) {
        if (!layers.emplace(name, m).second) {
            throw ValidationError("duplicate tensor " + name);
        }
    }
    const Architecture arch = infer_architecture(layers);
    return ModelParams(arch, std::move(layers));
}

BasisSet bases_from_tensors(const NamedTensors& tensors) {
    struct Parts {
        const DenseMatrix* U = nullptr;
        const DenseMatrix* V = nullptr;
        const DenseMatrix* S = nullptr;
    };
    std::map<std::string, Parts> parts;
    for (const auto& [name, m] : tensors) {
        const auto dot = name.rfind('.');
        const std::string layer = dot == std::string::npos ? std::string() : name.substr(0, dot);
        const std::string kind = dot == std::string::npos ? name : name.substr(dot + 1);
        if (layer.empty() || (kind != "Uk" && kind != "Vk" && kind != "Sref")) {
            throw ValidationError("tensor " + name + " is not a basis component");
        }
        Parts& p = parts[layer];
        (kind == "Uk" ? p.U : kind == "Vk" ? p.V : p.S) = &m;
    }
    BasisSet out;
    for (const auto& [layer, p] : parts) {
        if (p.U == nullptr || p.V == nullptr || p.S == nullptr) {
            throw ValidationError("basis for " + layer + " lacks one of Uk, Vk, Sref");
        }
        out.emplace(layer, ProtectedBasis(layer, OrthonormalBasis(*p.U), OrthonormalBasis(*p.V), *p.S));
    }
    return out;
}

} // namespace rpsft
