#include "faed/harness.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "faed/binary_io.hpp"
#include "faed/error.hpp"

namespace faed::harness {

namespace {

constexpr std::string_view kEmbMagic = "FAEDEMB1";
constexpr std::uint32_t kEmbVersion = 1;
// Reference embeddings draw their dropout masks from a different seed than the
// test rungs, so input i of both sets never shares masks.
constexpr std::uint64_t kReferenceSeedTag = 0x5245'4645'5245'4E43ULL;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw ConfigError("bad value '" + value + "' for " + key);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("bad boolean '" + value + "' for " + key);
}

}  // namespace

// --- embeddings -------------------------------------------------------------

std::vector<std::uint8_t> serialize_embeddings(const metrics::EmbeddingTensor& tensor, std::uint64_t seed) {
    io::ByteWriter w;
    w.raw(kEmbMagic);
    w.u32(kEmbVersion);
    w.u32(static_cast<std::uint32_t>(tensor.n_inputs()));
    w.u32(static_cast<std::uint32_t>(tensor.n_samples()));
    w.u32(static_cast<std::uint32_t>(tensor.latent_dim()));
    w.u64(seed);
    for (double v : tensor.data()) w.f64(v);
    return std::move(w.bytes());
}

EmbeddingFile deserialize_embeddings(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (r.raw(kEmbMagic.size(), "magic") != kEmbMagic) throw ParseError("embeddings: bad magic", 0);
    const std::size_t version_at = r.offset();
    if (const auto v = r.u32("version"); v != kEmbVersion) {
        throw ParseError("embeddings: unsupported version " + std::to_string(v), version_at);
    }
    const std::size_t n = r.u32("n_inputs");
    const std::size_t j = r.u32("n_samples");
    const std::size_t k = r.u32("latent_dim");
    const std::uint64_t seed = r.u64("seed");
    if (j < 1) throw ParseError("embeddings: n_samples must be at least 1", r.offset() - 12);
    const std::size_t count = n * j * k;
    if (r.remaining() != count * 8) {
        throw ParseError("embeddings: payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
                             std::to_string(count * 8),
                         r.offset());
    }
    std::vector<double> values(count);
    for (double& v : values) v = r.f64("embedding data");
    return {metrics::EmbeddingTensor(n, j, k, std::move(values)), seed};
}

void save_embeddings(const metrics::EmbeddingTensor& tensor, std::uint64_t seed, const std::filesystem::path& path) {
    io::write_file(path, serialize_embeddings(tensor, seed));
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    try {
        return deserialize_embeddings(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

// --- reports ----------------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_report(const metrics::MetricReport& r) {
    std::ostringstream out;
    out << "# FAED metric report\n";
    out << "mean_faed = " << format_double(r.mean_faed) << '\n';
    out << "sigma_faed = " << format_double(r.sigma_faed) << '\n';
    out << "pvar = " << format_double(r.pvar) << '\n';
    out << "n_inputs = " << r.n_inputs << '\n';
    out << "n_samples = " << r.n_samples << '\n';
    out << "latent_dim = " << r.latent_dim << '\n';
    out << "seed = " << r.seed << '\n';
    out << "ref_mode = " << metrics::to_string(r.ref_mode) << '\n';
    out << "warnings = ";
    for (std::size_t i = 0; i < r.warnings.size(); ++i) out << (i ? "; " : "") << r.warnings[i];
    out << '\n';
    out << "faed_per_j = ";
    for (std::size_t j = 0; j < r.faed_per_j.values.size(); ++j) out << (j ? "," : "") << format_double(r.faed_per_j.values[j]);
    out << '\n';
    return out.str();
}

metrics::MetricReport parse_report(const std::string& text) {
    const auto kv = parse_key_values(text);
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(std::string("report is missing ") + key);
        return it->second;
    };
    metrics::MetricReport r;
    r.mean_faed = parse_number<double>("mean_faed", get("mean_faed"));
    r.sigma_faed = parse_number<double>("sigma_faed", get("sigma_faed"));
    r.pvar = parse_number<double>("pvar", get("pvar"));
    r.n_inputs = parse_number<std::size_t>("n_inputs", get("n_inputs"));
    r.n_samples = parse_number<std::size_t>("n_samples", get("n_samples"));
    r.latent_dim = parse_number<std::size_t>("latent_dim", get("latent_dim"));
    r.seed = parse_number<std::uint64_t>("seed", get("seed"));
    r.ref_mode = metrics::parse_ref_mode(get("ref_mode"));
    {
        std::stringstream ss(get("warnings"));
        std::string w;
        while (std::getline(ss, w, ';'))
            if (!trim(w).empty()) r.warnings.push_back(trim(w));
    }
    {
        std::stringstream ss(get("faed_per_j"));
        std::string v;
        while (std::getline(ss, v, ',')) r.faed_per_j.values.push_back(parse_number<double>("faed_per_j", trim(v)));
    }
    return r;
}

std::string format_history_csv(std::span<const nn::EpochRecord> history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss\n";
    for (const auto& h : history) out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.val_loss) << '\n';
    return out.str();
}

// --- configuration ----------------------------------------------------------

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty entry in list for " + key);
        out.push_back(parse_number<std::size_t>(key, item));
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}


std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "input_side") arch.input_side = parse_number<std::size_t>(key, value);
    else if (key == "input_channels") arch.input_channels = parse_number<std::size_t>(key, value);
    else if (key == "encoder_channels") arch.encoder_channels = parse_count_list(key, value);
    else if (key == "kernel") arch.kernel = parse_number<std::size_t>(key, value);
    else if (key == "stride") arch.stride = parse_number<std::size_t>(key, value);
    else if (key == "latent_dim") arch.latent_dim = parse_number<std::size_t>(key, value);
    else if (key == "dropout") arch.dropout_rate = parse_number<double>(key, value);
    else if (key == "dropout_placement") arch.placement = nn::parse_placement(value);
    else if (key == "epochs") train.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") train.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") train.learning_rate = parse_number<double>(key, value);
    else if (key == "beta1") train.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") train.beta2 = parse_number<double>(key, value);
    else if (key == "eps_adam") train.eps_adam = parse_number<double>(key, value);
    else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
        train.seed = seed;
    } else if (key == "j_samples") j_samples = parse_number<std::size_t>(key, value);
    else if (key == "ref_mode") ref_mode = metrics::parse_ref_mode(value);
    else if (key == "overlay_count") overlay_count = parse_number<std::size_t>(key, value);
    else if (key == "patch_side") patch_side = parse_number<std::size_t>(key, value);
    else if (key == "clamp_noise") clamp_noise = parse_bool(key, value);
    else if (key == "train_data" || key == "val_data" || key == "test_data" || key == "ref_data" ||
             key == "foreign_data" || key == "disjoint_data" || key == "output_dir")
        paths[key] = value;
    else
        throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::validate() const {
    arch.validate();
    train.validate();
    if (j_samples < 1) throw ConfigError("j_samples must be at least 1");
    if (patch_side == 0 || patch_side >= arch.input_side) {
        throw ConfigError("patch_side must lie in [1, input_side)");
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    for (const auto& [k, v] : parse_key_values(ss.str())) cfg.set(k, v);
    return cfg;
}

// --- experiments ------------------------------------------------------------

TrainOutputs train_model(const nn::ArchitectureConfig& arch, const nn::TrainConfig& tc, const data::Dataset& train,
                         const data::Dataset& val) {
    TrainOutputs out;
    out.fit = nn::fit(nn::build(arch, tc.seed), train, val, tc);
    out.checkpoint_bytes = nn::serialize_checkpoint(out.fit.best);
    out.history_csv = format_history_csv(out.fit.history);
    return out;
}

void SweepSpec::validate() const {
    if (overlay_counts.empty()) throw ConfigError("sweep: no overlay counts");
    for (std::size_t i = 1; i < overlay_counts.size(); ++i) {
        if (overlay_counts[i] <= overlay_counts[i - 1]) throw ConfigError("sweep: overlay counts must be ascending");
    }
    if (overlay_counts.back() > 0 && foreign_source.size() == 0) throw ConfigError("sweep: empty foreign source");
}

std::uint64_t reference_seed(std::uint64_t seed) {
    return derive_stream(kReferenceSeedTag, seed);
}

std::vector<SweepRow> run_sweep(const nn::Autoencoder& model, const data::Dataset& base, const SweepSpec& sweep,
                                const metrics::EmbeddingTensor& reference, std::uint64_t seed, std::size_t j_samples,
                                std::size_t patch_side, metrics::RefMode mode) {
    sweep.validate();
    std::vector<SweepRow> rows;
    for (std::size_t count : sweep.overlay_counts) {
        data::AugmentSpec spec{data::AugmentKind::ForeignOverlay, count, patch_side, true};
        const auto augmented = data::augment_dataset(base, spec, sweep.foreign_source.images, seed);
        const auto tensor = nn::encode_mc(model, augmented.images, j_samples, seed);
        rows.push_back({count, metrics::metric_report(tensor, reference, seed, mode)});
    }
    return rows;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "overlay_count,mean_faed,sigma_faed,pvar\n";
    for (const auto& r : rows) {
        out << r.overlay_count << ',' << format_double(r.report.mean_faed) << ',' << format_double(r.report.sigma_faed)
            << ',' << format_double(r.report.pvar) << '\n';
    }
    return out.str();
}

std::vector<LadderRow> run_ladder(const nn::Autoencoder& model, const LadderInputs& in, std::uint64_t seed,
                                  std::size_t j_samples, std::size_t overlay_count, std::size_t patch_side,
                                  metrics::RefMode mode, bool clamp_noise) {
    const std::uint64_t ref_seed = reference_seed(seed);
    const auto reference = nn::encode_mc(model, in.reference.images, j_samples, ref_seed);

    auto evaluate = [&](const std::string& rung, const data::Dataset& ds) {
        const auto tensor = nn::encode_mc(model, ds.images, j_samples, seed);
        return LadderRow{rung, metrics::metric_report(tensor, reference, seed, mode)};
    };

    using data::AugmentKind;
    std::vector<LadderRow> rows;
    rows.push_back(evaluate("baseline", in.test));
    rows.push_back(evaluate("noise", data::augment_dataset(in.test, {AugmentKind::Noise, 0, patch_side, clamp_noise}, {}, seed)));
    rows.push_back(evaluate("self-overlay", data::augment_dataset(in.test, {AugmentKind::SelfOverlay, overlay_count, patch_side, true}, {}, seed)));
    rows.push_back(evaluate("foreign-overlay", data::augment_dataset(in.test, {AugmentKind::ForeignOverlay, overlay_count, patch_side, true}, in.foreign.images, seed)));
    rows.push_back(evaluate("disjoint", in.disjoint));
    return rows;
}

std::string format_ladder_csv(std::span<const LadderRow> rows) {
    std::ostringstream out;
    out << "rung,mean_faed,sigma_faed,pvar,n_inputs,n_samples\n";
    for (const auto& r : rows) {
        out << r.rung << ',' << format_double(r.report.mean_faed) << ',' << format_double(r.report.sigma_faed) << ','
            << format_double(r.report.pvar) << ',' << r.report.n_inputs << ',' << r.report.n_samples << '\n';
    }
    return out.str();
}

}  // namespace faed::harness
