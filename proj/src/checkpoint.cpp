#include <string>

#include "faed/binary_io.hpp"
#include "faed/error.hpp"
#include "faed/nn.hpp"

namespace faed::nn {

namespace {

constexpr std::string_view kMagic = "FAEDCKP1";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Autoencoder& model) {
    const auto& a = model.arch;
    io::ByteWriter w;
    w.raw(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(a.input_side));
    w.u32(static_cast<std::uint32_t>(a.input_channels));
    w.u32(static_cast<std::uint32_t>(a.encoder_channels.size()));
    for (std::size_t c : a.encoder_channels) w.u32(static_cast<std::uint32_t>(c));
    w.u32(static_cast<std::uint32_t>(a.kernel));
    w.u32(static_cast<std::uint32_t>(a.stride));
    w.u32(static_cast<std::uint32_t>(a.latent_dim));
    w.f64(a.dropout_rate);
    w.u32(static_cast<std::uint32_t>(a.placement));

    w.u32(static_cast<std::uint32_t>(model.parameters.size()));
    for (const auto& [name, t] : model.parameters) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
        for (double v : t.data) w.f64(v);
    }
    return std::move(w.bytes());
}

Autoencoder deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (r.raw(kMagic.size(), "magic") != kMagic) throw ParseError("checkpoint: bad magic", 0);
    const std::size_t version_at = r.offset();
    if (const auto v = r.u32("version"); v != kVersion) {
        throw ParseError("checkpoint: unsupported version " + std::to_string(v), version_at);
    }

    ArchitectureConfig a;
    a.input_side = r.u32("input_side");
    a.input_channels = r.u32("input_channels");
    const std::uint32_t layers_n = r.u32("layer count");
    if (layers_n > 64) throw ParseError("checkpoint: implausible layer count", r.offset() - 4);
    a.encoder_channels.clear();
    for (std::uint32_t l = 0; l < layers_n; ++l) a.encoder_channels.push_back(r.u32("encoder channels"));
    a.kernel = r.u32("kernel");
    a.stride = r.u32("stride");
    a.latent_dim = r.u32("latent_dim");
    a.dropout_rate = r.f64("dropout_rate");
    const std::size_t placement_at = r.offset();
    const std::uint32_t placement = r.u32("dropout placement");
    if (placement > 1) throw ParseError("checkpoint: unknown dropout placement", placement_at);
    a.placement = static_cast<DropoutPlacement>(placement);
    a.validate();

    // Shapes must match a freshly built model exactly.
    Autoencoder m = build(a, 0);
    const std::uint32_t count = r.u32("tensor count");
    if (count != m.parameters.size()) {
        throw ParseError("checkpoint: expected " + std::to_string(m.parameters.size()) + " tensors, found " +
                             std::to_string(count),
                         r.offset() - 4);
    }
    for (std::uint32_t n = 0; n < count; ++n) {
        const std::size_t at = r.offset();
        const std::uint32_t len = r.u32("name length");
        if (len > 256) throw ParseError("checkpoint: implausible tensor name length", at);
        const std::string name = r.raw(len, "tensor name");
        auto it = m.parameters.find(name);
        if (it == m.parameters.end()) throw ParseError("checkpoint: unexpected tensor " + name, at);
        const std::uint32_t rank = r.u32("rank");
        std::vector<std::size_t> shape;
        for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(r.u32("dims"));
        if (shape != it->second.shape) throw ParseError("checkpoint: shape mismatch for " + name, at);
        for (double& v : it->second.data) v = r.f64("tensor data");
    }
    if (r.remaining() != 0) throw ParseError("checkpoint: trailing bytes", r.offset());
    return m;
}

void save_checkpoint(const Autoencoder& model, const std::filesystem::path& path) {
    io::write_file(path, serialize_checkpoint(model));
}

Autoencoder load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    try {
        return deserialize_checkpoint(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

}  // namespace faed::nn
