#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "faed/data.hpp"
#include "faed/linalg.hpp"
#include "faed/metrics.hpp"
#include "faed/rng.hpp"

namespace faed::nn {

/// Where inverted dropout masks are applied inside the encoder.
enum class DropoutPlacement : std::uint32_t {
    EncoderHidden = 0,           // after every conv ReLU (the flattened map feeding the bottleneck included)
    EncoderHiddenAndLatent = 1,  // additionally on the bottleneck output
};

DropoutPlacement parse_placement(const std::string& text);
const char* to_string(DropoutPlacement placement);

struct ArchitectureConfig {
    std::size_t input_side = 128;
    std::size_t input_channels = 3;
    std::vector<std::size_t> encoder_channels{128, 256, 512};
    std::size_t kernel = 4;
    std::size_t stride = 2;
    std::size_t latent_dim = 256;
    double dropout_rate = 0.1;
    DropoutPlacement placement = DropoutPlacement::EncoderHidden;

    /// 128 px, channels (128, 256, 512), latent 256.
    static ArchitectureConfig full_scale() { return {}; }
    /// 32 px, channels (8, 16, 32), latent 32.
    static ArchitectureConfig desk();

    /// Throws ConfigError when the shape chain does not close.
    void validate() const;

    std::size_t padding() const noexcept { return (kernel - stride) / 2; }
    std::size_t bottleneck_side() const;
    /// Length of the flattened encoder output and of the decoder linear output.
    std::size_t flat_size() const;
    /// Output channels of the transposed convolutions, ending in input_channels.
    std::vector<std::size_t> decoder_channels() const;

    bool operator==(const ArchitectureConfig&) const = default;
};

/// Dense parameter tensor.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    std::size_t size() const noexcept { return data.size(); }
    bool operator==(const Tensor&) const = default;
};

/// Ordered by name, which fixes iteration order everywhere.
using ParameterMap = std::map<std::string, Tensor>;

struct AdamState {
    ParameterMap first_moment;
    ParameterMap second_moment;
    std::uint64_t step = 0;
};

struct Autoencoder {
    ArchitectureConfig arch;
    ParameterMap parameters;
    AdamState adam;
};

struct TrainConfig {
    std::size_t epochs = 25;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Mode { Train, EvalDeterministic, EvalMc };

struct ForwardResult {
    std::vector<data::Image> reconstruction;
    linalg::Matrix latent;  // batch x latent_dim
};

struct Gradients {
    double loss = 0.0;
    ParameterMap grads;
};

/// Kaiming-style uniform weights in +-sqrt(6 / fan_in), zero biases.
Autoencoder build(const ArchitectureConfig& arch, std::uint64_t seed);

/// `streams` supplies one dropout stream per image; it may be empty for
/// Mode::EvalDeterministic.
ForwardResult forward(const Autoencoder& model, std::span<const data::Image> batch, Mode mode,
                      std::span<const RngStream> streams);

/// Encoder only.
linalg::Matrix encode(const Autoencoder& model, std::span<const data::Image> batch, Mode mode,
                      std::span<const RngStream> streams);

/// Per-image pixel sum of squared errors, averaged over the batch.
double loss_mse_sum(std::span<const data::Image> reconstruction, std::span<const data::Image> target);

/// Train-mode forward pass and backpropagation in one call, so the dropout
/// masks used for the gradients are exactly the ones used for the loss.
Gradients backward(const Autoencoder& model, std::span<const data::Image> batch, std::span<const RngStream> streams);

/// One Adam update with bias correction. Throws DivergedError naming the
/// first parameter with a non-finite gradient; the model is untouched then.
void adam_step(Autoencoder& model, const ParameterMap& grads, const TrainConfig& tc);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct FitResult {
    Autoencoder best;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
};

/// Validation loss with dropout disabled.
double evaluate_loss(const Autoencoder& model, std::span<const data::Image> images, std::size_t batch_size = 64);

FitResult fit(Autoencoder model, const data::Dataset& train, const data::Dataset& val, const TrainConfig& tc);

/// Draw j of image i uses stream (seed, derive(derive(tag, i), j)); the
/// result does not depend on `batch_size`.
metrics::EmbeddingTensor encode_mc(const Autoencoder& model, std::span<const data::Image> images,
                                   std::size_t j_samples, std::uint64_t seed, std::size_t batch_size = 16);

/// Dropout stream for draw j of image i, as used by encode_mc.
RngStream mc_stream(std::uint64_t seed, std::size_t i, std::size_t j);

// Checkpoints: "FAEDCKP1", u32 version, architecture, named f64 tensors.
// Optimizer state is never written.
std::vector<std::uint8_t> serialize_checkpoint(const Autoencoder& model);
Autoencoder deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Autoencoder& model, const std::filesystem::path& path);
Autoencoder load_checkpoint(const std::filesystem::path& path);

namespace layers {

// Single-sample kernels on channel-major (C, side, side) buffers. The
// *_backward functions accumulate into the weight and bias gradients and
// overwrite grad_in. Exposed for gradient checking.

struct ConvShape {
    std::size_t in_channels, out_channels, in_side, out_side, kernel, stride, padding;
};

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);
void conv2d_backward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> grad_out, std::span<double> grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias);

/// weight is (in_channels, out_channels, k, k).
void conv_transpose2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                              std::span<const double> bias, std::span<double> out);
void conv_transpose2d_backward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                               std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_weight, std::span<double> grad_bias);

/// weight is (out, in).
void linear_forward(std::size_t in_features, std::size_t out_features, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias, std::span<double> out);
void linear_backward(std::size_t in_features, std::size_t out_features, std::span<const double> in,
                     std::span<const double> weight, std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias);

/// Inverted dropout mask: each entry is 0 with probability `rate`, otherwise 1 / (1 - rate).
std::vector<double> dropout_mask(std::size_t n, double rate, RngStream& rng);

}  // namespace layers

}  // namespace faed::nn
