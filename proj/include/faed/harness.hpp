#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faed/data.hpp"
#include "faed/metrics.hpp"
#include "faed/nn.hpp"

namespace faed::harness {

// ---------------------------------------------------------------------------
// Embedding files: "FAEDEMB1", u32 version, u32 n_inputs, u32 n_samples,
// u32 latent_dim, u64 seed, then little-endian f64 in (i, j, k) order.

struct EmbeddingFile {
    metrics::EmbeddingTensor tensor;
    std::uint64_t seed = 0;
};

std::vector<std::uint8_t> serialize_embeddings(const metrics::EmbeddingTensor& tensor, std::uint64_t seed);
EmbeddingFile deserialize_embeddings(std::span<const std::uint8_t> bytes);
void save_embeddings(const metrics::EmbeddingTensor& tensor, std::uint64_t seed, const std::filesystem::path& path);
EmbeddingFile load_embeddings(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports are "key = value" lines; doubles use the shortest round-trip form.

std::string format_double(double v);
std::string format_report(const metrics::MetricReport& report);
/// Parses what format_report writes.
metrics::MetricReport parse_report(const std::string& text);

std::string format_history_csv(std::span<const nn::EpochRecord> history);

// ---------------------------------------------------------------------------
// Flat "key = value" configuration; '#' starts a comment.

struct ExperimentConfig {
    nn::ArchitectureConfig arch = nn::ArchitectureConfig::desk();
    nn::TrainConfig train;
    std::size_t j_samples = 200;
    std::uint64_t seed = 0;
    metrics::RefMode ref_mode = metrics::RefMode::FixedJ0;
    std::size_t overlay_count = 5;
    std::size_t patch_side = 8;
    bool clamp_noise = true;
    std::map<std::string, std::string> paths;  // train_data, val_data, ... output_dir

    /// Applies one key; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void validate() const;
};

std::map<std::string, std::string> parse_key_values(const std::string& text);
/// "0,1,3" -> {0, 1, 3}.
std::vector<std::size_t> parse_count_list(const std::string& what, const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiments.

struct TrainOutputs {
    nn::FitResult fit;
    std::vector<std::uint8_t> checkpoint_bytes;
    std::string history_csv;
};

/// Builds from (arch, seed), fits, and serializes the best snapshot.
TrainOutputs train_model(const nn::ArchitectureConfig& arch, const nn::TrainConfig& tc, const data::Dataset& train,
                         const data::Dataset& val);

/// MC seed for reference embeddings, so reference masks never coincide with
/// the test masks drawn from `seed`.
std::uint64_t reference_seed(std::uint64_t seed);

struct SweepSpec {
    std::vector<std::size_t> overlay_counts;
    data::Dataset foreign_source;

    void validate() const;
};

struct SweepRow {
    std::size_t overlay_count = 0;
    metrics::MetricReport report;
};

std::vector<SweepRow> run_sweep(const nn::Autoencoder& model, const data::Dataset& base, const SweepSpec& sweep,
                                const metrics::EmbeddingTensor& reference, std::uint64_t seed, std::size_t j_samples,
                                std::size_t patch_side, metrics::RefMode mode = metrics::RefMode::FixedJ0);
std::string format_sweep_csv(std::span<const SweepRow> rows);

struct LadderInputs {
    data::Dataset test;      // first half of the in-distribution evaluation set
    data::Dataset reference; // second half
    data::Dataset foreign;   // overlay sources for the foreign rung
    data::Dataset disjoint;  // a different image family altogether
};

struct LadderRow {
    std::string rung;
    metrics::MetricReport report;
};

/// Rungs, in order: baseline, noise, self-overlay, foreign-overlay, disjoint.
/// The reference embeddings are computed once and shared by every rung.
std::vector<LadderRow> run_ladder(const nn::Autoencoder& model, const LadderInputs& inputs, std::uint64_t seed,
                                  std::size_t j_samples, std::size_t overlay_count, std::size_t patch_side,
                                  metrics::RefMode mode = metrics::RefMode::FixedJ0, bool clamp_noise = true);
std::string format_ladder_csv(std::span<const LadderRow> rows);

}  // namespace faed::harness
