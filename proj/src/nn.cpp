#include "faed/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "faed/error.hpp"

namespace faed::nn {

namespace {

constexpr std::uint64_t kInitTag = 0x494E'4954'5041'5241ULL;
constexpr std::uint64_t kShuffleTag = 0x5348'5546'464C'4545ULL;
constexpr std::uint64_t kTrainDropTag = 0x5452'4149'4E44'524FULL;
constexpr std::uint64_t kMcTag = 0x4D43'4452'4F50'4F55ULL;

std::string conv_name(std::size_t l, const char* what) { return "enc.conv" + std::to_string(l) + "." + what; }
std::string deconv_name(std::size_t l, const char* what) { return "dec.deconv" + std::to_string(l) + "." + what; }

const Tensor& param(const ParameterMap& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ConfigError("missing parameter " + name);
    return it->second;
}

Tensor& param(ParameterMap& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ConfigError("missing parameter " + name);
    return it->second;
}

layers::ConvShape encoder_shape(const ArchitectureConfig& a, std::size_t l) {
    const std::size_t in_c = l == 0 ? a.input_channels : a.encoder_channels[l - 1];
    std::size_t side = a.input_side;
    for (std::size_t i = 0; i < l; ++i) side /= a.stride;
    return {in_c, a.encoder_channels[l], side, side / a.stride, a.kernel, a.stride, a.padding()};
}

layers::ConvShape decoder_shape(const ArchitectureConfig& a, std::size_t l) {
    const auto outs = a.decoder_channels();
    const std::size_t in_c = l == 0 ? a.encoder_channels.back() : outs[l - 1];
    std::size_t side = a.bottleneck_side();
    for (std::size_t i = 0; i < l; ++i) side *= a.stride;
    return {in_c, outs[l], side, side * a.stride, a.kernel, a.stride, a.padding()};
}

// Output index range [lo, hi) for which in_index = o * stride - pad + k stays inside [0, in_side).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in_side,
                                                std::size_t out_side) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    const auto shift = static_cast<std::ptrdiff_t>(pad) - static_cast<std::ptrdiff_t>(k);
    std::ptrdiff_t lo = shift > 0 ? (shift + s - 1) / s : 0;
    std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(in_side) - 1 + shift);
    hi = hi < 0 ? 0 : hi / s + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_side));
    if (lo > hi) lo = hi;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void relu_inplace(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

struct Trace {
    std::vector<std::vector<double>> enc_in;    // input of conv l
    std::vector<std::vector<double>> enc_pre;   // conv l output before ReLU
    std::vector<std::vector<double>> enc_mask;  // empty when dropout is off
    std::vector<double> flat;
    std::vector<double> latent_pre;
    std::vector<double> latent_mask;
    std::vector<double> latent;
    std::vector<std::vector<double>> dec_in;   // input of deconv l
    std::vector<std::vector<double>> dec_pre;  // deconv l output before ReLU
    std::vector<double> output;
};

bool dropout_active(const ArchitectureConfig& a, Mode mode) {
    return mode != Mode::EvalDeterministic && a.dropout_rate > 0.0;
}

void check_image(const ArchitectureConfig& a, const data::Image& img) {
    if (img.side != a.input_side || img.channels != a.input_channels ||
        img.pixels.size() != a.input_channels * a.input_side * a.input_side) {
        throw DimensionError("image of side " + std::to_string(img.side) + " and " + std::to_string(img.channels) +
                             " channels does not match architecture input " + std::to_string(a.input_side) + "x" +
                             std::to_string(a.input_side) + "x" + std::to_string(a.input_channels));
    }
}

void check_streams(std::span<const data::Image> batch, std::span<const RngStream> streams, Mode mode,
                   const ArchitectureConfig& a) {
    if (dropout_active(a, mode) && streams.size() != batch.size()) {
        throw DimensionError("expected one dropout stream per image (" + std::to_string(batch.size()) + "), got " +
                             std::to_string(streams.size()));
    }
}

void run_encoder(const Autoencoder& m, const std::vector<double>& input, Mode mode, RngStream* rng, Trace& t) {
    const auto& a = m.arch;
    const bool drop = dropout_active(a, mode);
    const std::size_t layers_n = a.encoder_channels.size();
    t.enc_in.assign(layers_n, {});
    t.enc_pre.assign(layers_n, {});
    t.enc_mask.assign(layers_n, {});

    std::vector<double> x = input;
    for (std::size_t l = 0; l < layers_n; ++l) {
        const auto s = encoder_shape(a, l);
        std::vector<double> z(s.out_channels * s.out_side * s.out_side);
        layers::conv2d_forward(s, x, param(m.parameters, conv_name(l, "weight")).data,
                               param(m.parameters, conv_name(l, "bias")).data, z);
        std::vector<double> h = z;
        relu_inplace(h);
        if (drop) {
            t.enc_mask[l] = layers::dropout_mask(h.size(), a.dropout_rate, *rng);
            for (std::size_t i = 0; i < h.size(); ++i) h[i] *= t.enc_mask[l][i];
        }
        t.enc_in[l] = std::move(x);
        t.enc_pre[l] = std::move(z);
        x = std::move(h);
    }
    t.flat = std::move(x);

    const std::size_t flat = a.flat_size();
    t.latent_pre.assign(a.latent_dim, 0.0);
    layers::linear_forward(flat, a.latent_dim, t.flat, param(m.parameters, "enc.fc.weight").data,
                           param(m.parameters, "enc.fc.bias").data, t.latent_pre);
    t.latent = t.latent_pre;
    t.latent_mask.clear();
    if (drop && a.placement == DropoutPlacement::EncoderHiddenAndLatent) {
        t.latent_mask = layers::dropout_mask(a.latent_dim, a.dropout_rate, *rng);
        for (std::size_t i = 0; i < t.latent.size(); ++i) t.latent[i] *= t.latent_mask[i];
    }
}

void run_decoder(const Autoencoder& m, Trace& t) {
    const auto& a = m.arch;
    const std::size_t layers_n = a.encoder_channels.size();
    std::vector<double> d(a.flat_size());
    layers::linear_forward(a.latent_dim, a.flat_size(), t.latent, param(m.parameters, "dec.fc.weight").data,
                           param(m.parameters, "dec.fc.bias").data, d);
    t.dec_in.assign(layers_n, {});
    t.dec_pre.assign(layers_n, {});
    for (std::size_t l = 0; l < layers_n; ++l) {
        const auto s = decoder_shape(a, l);
        std::vector<double> z(s.out_channels * s.out_side * s.out_side);
        layers::conv_transpose2d_forward(s, d, param(m.parameters, deconv_name(l, "weight")).data,
                                         param(m.parameters, deconv_name(l, "bias")).data, z);
        std::vector<double> h = z;
        relu_inplace(h);
        t.dec_in[l] = std::move(d);
        t.dec_pre[l] = std::move(z);
        d = std::move(h);
    }
    t.output = std::move(d);
}

data::Image to_image(const ArchitectureConfig& a, std::vector<double> pixels) {
    data::Image img;
    img.side = a.input_side;
    img.channels = a.input_channels;
    img.pixels = std::move(pixels);
    return img;
}

ParameterMap zeros_like(const ParameterMap& p) {
    ParameterMap out;
    for (const auto& [name, t] : p) out.emplace(name, Tensor(t.shape));
    return out;
}

}  // namespace

DropoutPlacement parse_placement(const std::string& text) {
    if (text == "encoder-hidden") return DropoutPlacement::EncoderHidden;
    if (text == "encoder-hidden-and-latent") return DropoutPlacement::EncoderHiddenAndLatent;
    throw ConfigError("unknown dropout placement '" + text + "' (expected encoder-hidden or encoder-hidden-and-latent)");
}

const char* to_string(DropoutPlacement placement) {
    return placement == DropoutPlacement::EncoderHidden ? "encoder-hidden" : "encoder-hidden-and-latent";
}

ArchitectureConfig ArchitectureConfig::desk() {
    ArchitectureConfig a;
    a.input_side = 32;
    a.encoder_channels = {8, 16, 32};
    a.latent_dim = 32;
    return a;
}

void ArchitectureConfig::validate() const {
    if (encoder_channels.empty()) throw ConfigError("architecture needs at least one encoder layer");
    if (std::find(encoder_channels.begin(), encoder_channels.end(), std::size_t{0}) != encoder_channels.end())
        throw ConfigError("encoder channel counts must be positive");
    if (input_channels == 0) throw ConfigError("input_channels must be positive");
    if (stride == 0 || kernel < stride || (kernel - stride) % 2 != 0) {
        throw ConfigError("kernel " + std::to_string(kernel) + " and stride " + std::to_string(stride) +
                          " do not give an exact side / stride resampling (need kernel >= stride, even difference)");
    }
    if (latent_dim == 0) throw ConfigError("latent_dim must be at least 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    std::size_t side = input_side;
    for (std::size_t l = 0; l < encoder_channels.size(); ++l) {
        if (side == 0 || side % stride != 0) {
            throw ConfigError("input_side " + std::to_string(input_side) + " is not divisible by stride^" +
                              std::to_string(encoder_channels.size()));
        }
        side /= stride;
    }
    if (side == 0) throw ConfigError("bottleneck side collapses to zero");
}

std::size_t ArchitectureConfig::bottleneck_side() const {
    std::size_t side = input_side;
    for (std::size_t l = 0; l < encoder_channels.size(); ++l) side /= stride;
    return side;
}

std::size_t ArchitectureConfig::flat_size() const {
    const std::size_t s = bottleneck_side();
    return encoder_channels.back() * s * s;
}

std::vector<std::size_t> ArchitectureConfig::decoder_channels() const {
    std::vector<std::size_t> out(encoder_channels.rbegin() + 1, encoder_channels.rend());
    out.push_back(input_channels);
    return out;
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    data.assign(n, fill);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps_adam > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

Autoencoder build(const ArchitectureConfig& arch, std::uint64_t seed) {
    arch.validate();
    Autoencoder m;
    m.arch = arch;
    const std::size_t k = arch.kernel;
    const std::size_t layers_n = arch.encoder_channels.size();

    struct Spec {
        std::string name;
        std::vector<std::size_t> shape;
        double fan_in;  // 0 marks a bias
    };
    std::vector<Spec> specs;
    for (std::size_t l = 0; l < layers_n; ++l) {
        const auto s = encoder_shape(arch, l);
        specs.push_back({conv_name(l, "weight"), {s.out_channels, s.in_channels, k, k},
                         static_cast<double>(s.in_channels * k * k)});
        specs.push_back({conv_name(l, "bias"), {s.out_channels}, 0.0});
    }
    specs.push_back({"enc.fc.weight", {arch.latent_dim, arch.flat_size()}, static_cast<double>(arch.flat_size())});
    specs.push_back({"enc.fc.bias", {arch.latent_dim}, 0.0});
    specs.push_back({"dec.fc.weight", {arch.flat_size(), arch.latent_dim}, static_cast<double>(arch.latent_dim)});
    specs.push_back({"dec.fc.bias", {arch.flat_size()}, 0.0});
    for (std::size_t l = 0; l < layers_n; ++l) {
        const auto s = decoder_shape(arch, l);
        // Each transposed-conv output sees in_channels * (k / stride)^2 inputs.
        const double fan_in = static_cast<double>(s.in_channels * k * k) / static_cast<double>(s.stride * s.stride);
        specs.push_back({deconv_name(l, "weight"), {s.in_channels, s.out_channels, k, k}, fan_in});
        specs.push_back({deconv_name(l, "bias"), {s.out_channels}, 0.0});
    }

    for (std::size_t idx = 0; idx < specs.size(); ++idx) {
        Tensor t(specs[idx].shape);
        if (specs[idx].fan_in > 0.0) {
            RngStream rng(seed, derive_stream(kInitTag, idx));
            const double bound = std::sqrt(6.0 / specs[idx].fan_in);
            for (double& v : t.data) v = rng.uniform(-bound, bound);
        }
        m.parameters.emplace(specs[idx].name, std::move(t));
    }
    m.adam.first_moment = zeros_like(m.parameters);
    m.adam.second_moment = zeros_like(m.parameters);
    return m;
}

ForwardResult forward(const Autoencoder& model, std::span<const data::Image> batch, Mode mode,
                      std::span<const RngStream> streams) {
    check_streams(batch, streams, mode, model.arch);
    ForwardResult r{{}, linalg::Matrix(batch.size(), model.arch.latent_dim)};
    r.reconstruction.reserve(batch.size());
    Trace t;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        check_image(model.arch, batch[b]);
        RngStream rng = streams.empty() ? RngStream(0, 0) : streams[b];
        run_encoder(model, batch[b].pixels, mode, &rng, t);
        std::copy(t.latent.begin(), t.latent.end(), r.latent.row(b).begin());
        run_decoder(model, t);
        r.reconstruction.push_back(to_image(model.arch, std::move(t.output)));
    }
    return r;
}

linalg::Matrix encode(const Autoencoder& model, std::span<const data::Image> batch, Mode mode,
                      std::span<const RngStream> streams) {
    check_streams(batch, streams, mode, model.arch);
    linalg::Matrix latent(batch.size(), model.arch.latent_dim);
    Trace t;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        check_image(model.arch, batch[b]);
        RngStream rng = streams.empty() ? RngStream(0, 0) : streams[b];
        run_encoder(model, batch[b].pixels, mode, &rng, t);
        std::copy(t.latent.begin(), t.latent.end(), latent.row(b).begin());
    }
    return latent;
}

double loss_mse_sum(std::span<const data::Image> reconstruction, std::span<const data::Image> target) {
    if (reconstruction.size() != target.size() || reconstruction.empty()) {
        throw DimensionError("loss_mse_sum: batch sizes differ or are empty");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < target.size(); ++b) {
        const auto& r = reconstruction[b].pixels;
        const auto& t = target[b].pixels;
        if (r.size() != t.size()) throw DimensionError("loss_mse_sum: image shapes differ");
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += (r[i] - t[i]) * (r[i] - t[i]);
        total += s;
    }
    return total / static_cast<double>(target.size());
}

Gradients backward(const Autoencoder& model, std::span<const data::Image> batch, std::span<const RngStream> streams) {
    const auto& a = model.arch;
    check_streams(batch, streams, Mode::Train, a);
    if (batch.empty()) throw InsufficientDataError("backward: empty batch");

    Gradients g;
    g.grads = zeros_like(model.parameters);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::size_t layers_n = a.encoder_channels.size();
    const std::size_t flat = a.flat_size();
    Trace t;

    for (std::size_t b = 0; b < batch.size(); ++b) {
        check_image(a, batch[b]);
        RngStream rng = streams.empty() ? RngStream(0, 0) : streams[b];
        run_encoder(model, batch[b].pixels, Mode::Train, &rng, t);
        run_decoder(model, t);

        const auto& target = batch[b].pixels;
        std::vector<double> grad(t.output.size());
        double sample_loss = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double diff = t.output[i] - target[i];
            sample_loss += diff * diff;
            grad[i] = 2.0 * diff * inv_b;
        }
        g.loss += sample_loss * inv_b;

        for (std::size_t l = layers_n; l-- > 0;) {
            const auto s = decoder_shape(a, l);
            const auto& pre = t.dec_pre[l];
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (!(pre[i] > 0.0)) grad[i] = 0.0;
            std::vector<double> grad_in(t.dec_in[l].size());
            layers::conv_transpose2d_backward(s, t.dec_in[l], param(model.parameters, deconv_name(l, "weight")).data,
                                              grad, grad_in, param(g.grads, deconv_name(l, "weight")).data,
                                              param(g.grads, deconv_name(l, "bias")).data);
            grad = std::move(grad_in);
        }

        std::vector<double> grad_latent(a.latent_dim);
        layers::linear_backward(a.latent_dim, flat, t.latent, param(model.parameters, "dec.fc.weight").data, grad,
                                grad_latent, param(g.grads, "dec.fc.weight").data, param(g.grads, "dec.fc.bias").data);
        if (!t.latent_mask.empty())
            for (std::size_t i = 0; i < grad_latent.size(); ++i) grad_latent[i] *= t.latent_mask[i];

        grad.assign(flat, 0.0);
        layers::linear_backward(flat, a.latent_dim, t.flat, param(model.parameters, "enc.fc.weight").data, grad_latent,
                                grad, param(g.grads, "enc.fc.weight").data, param(g.grads, "enc.fc.bias").data);

        for (std::size_t l = layers_n; l-- > 0;) {
            const auto s = encoder_shape(a, l);
            const auto& pre = t.enc_pre[l];
            const auto& mask = t.enc_mask[l];
            for (std::size_t i = 0; i < grad.size(); ++i) {
                if (!(pre[i] > 0.0)) grad[i] = 0.0;
                else if (!mask.empty()) grad[i] *= mask[i];
            }
            std::vector<double> grad_in(l == 0 ? 0 : t.enc_in[l].size());
            layers::conv2d_backward(s, t.enc_in[l], param(model.parameters, conv_name(l, "weight")).data, grad,
                                    grad_in, param(g.grads, conv_name(l, "weight")).data,
                                    param(g.grads, conv_name(l, "bias")).data);
            grad = std::move(grad_in);
        }
    }
    return g;
}

void adam_step(Autoencoder& model, const ParameterMap& grads, const TrainConfig& tc) {
    for (const auto& [name, p] : model.parameters) {
        const Tensor& gt = param(grads, name);
        if (gt.size() != p.size()) throw DimensionError("adam_step: gradient shape mismatch for " + name);
        for (double v : gt.data)
            if (!std::isfinite(v)) throw DivergedError("adam_step: non-finite gradient in parameter " + name);
    }

    auto& st = model.adam;
    if (st.first_moment.empty()) st.first_moment = zeros_like(model.parameters);
    if (st.second_moment.empty()) st.second_moment = zeros_like(model.parameters);
    ++st.step;
    const double t = static_cast<double>(st.step);
    const double c1 = 1.0 - std::pow(tc.beta1, t);
    const double c2 = 1.0 - std::pow(tc.beta2, t);

    for (auto& [name, p] : model.parameters) {
        const auto& g = param(grads, name).data;
        auto& m = param(st.first_moment, name).data;
        auto& v = param(st.second_moment, name).data;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
            v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p.data[i] -= tc.learning_rate * m_hat / (std::sqrt(v_hat) + tc.eps_adam);
        }
    }
}

double evaluate_loss(const Autoencoder& model, std::span<const data::Image> images, std::size_t batch_size) {
    if (images.empty()) throw InsufficientDataError("evaluate_loss: no images");
    double total = 0.0;
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const auto chunk = images.subspan(start, std::min(batch_size, images.size() - start));
        const auto r = forward(model, chunk, Mode::EvalDeterministic, {});
        total += loss_mse_sum(r.reconstruction, chunk) * static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(images.size());
}

FitResult fit(Autoencoder model, const data::Dataset& train, const data::Dataset& val, const TrainConfig& tc) {
    tc.validate();
    if (train.size() == 0 || val.size() == 0) throw InsufficientDataError("fit: training and validation sets must be nonempty");

    FitResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train.size());
    std::vector<data::Image> batch;
    std::vector<RngStream> streams;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        RngStream shuffle(tc.seed, derive_stream(kShuffleTag, epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

        const std::uint64_t epoch_stream = derive_stream(kTrainDropTag, epoch);
        double train_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t n = std::min(tc.batch_size, order.size() - start);
            batch.clear();
            streams.clear();
            for (std::size_t b = 0; b < n; ++b) {
                batch.push_back(train.images[order[start + b]]);
                streams.emplace_back(tc.seed, derive_stream(epoch_stream, start + b));
            }
            const Gradients g = backward(model, batch, streams);
            if (!std::isfinite(g.loss)) {
                throw DivergedError("fit: training loss became non-finite in epoch " + std::to_string(epoch));
            }
            try {
                adam_step(model, g.grads, tc);
            } catch (const DivergedError& e) {
                throw DivergedError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
            }
            train_total += g.loss * static_cast<double>(n);
        }

        const double val_loss = evaluate_loss(model, val.images);
        if (!std::isfinite(val_loss)) {
            throw DivergedError("fit: validation loss became non-finite in epoch " + std::to_string(epoch));
        }
        result.history.push_back({epoch, train_total / static_cast<double>(train.size()), val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            result.best = model;
            result.best_epoch = epoch;
        }
    }
    return result;
}

RngStream mc_stream(std::uint64_t seed, std::size_t i, std::size_t j) {
    return RngStream(seed, derive_stream(derive_stream(kMcTag, i), j));
}

metrics::EmbeddingTensor encode_mc(const Autoencoder& model, std::span<const data::Image> images,
                                   std::size_t j_samples, std::uint64_t seed, std::size_t batch_size) {
    if (j_samples < 1) throw ConfigError("encode_mc: j_samples must be at least 1");
    if (batch_size < 1) throw ConfigError("encode_mc: batch_size must be at least 1");
    const std::size_t latent = model.arch.latent_dim;
    metrics::EmbeddingTensor out(images.size(), j_samples, latent);

    std::vector<data::Image> batch;
    std::vector<RngStream> streams;
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    const std::size_t total = images.size() * j_samples;
    for (std::size_t start = 0; start < total; start += batch_size) {
        const std::size_t n = std::min(batch_size, total - start);
        batch.clear();
        streams.clear();
        slots.clear();
        for (std::size_t q = start; q < start + n; ++q) {
            const std::size_t i = q / j_samples;
            const std::size_t j = q % j_samples;
            batch.push_back(images[i]);
            streams.push_back(mc_stream(seed, i, j));
            slots.emplace_back(i, j);
        }
        const linalg::Matrix z = encode(model, batch, Mode::EvalMc, streams);
        for (std::size_t b = 0; b < n; ++b) {
            const auto row = z.row(b);
            for (std::size_t k = 0; k < latent; ++k) out(slots[b].first, slots[b].second, k) = row[k];
        }
    }
    return out;
}

namespace layers {

void conv2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
    const std::size_t k = s.kernel;
    const std::size_t in_area = s.in_side * s.in_side;
    const std::size_t out_area = s.out_side * s.out_side;
    for (std::size_t co = 0; co < s.out_channels; ++co) {
        double* o = out.data() + co * out_area;
        std::fill(o, o + out_area, bias[co]);
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.data() + ci * in_area;
            const double* w = weight.data() + (co * s.in_channels + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto [oy0, oy1] = valid_range(ky, s.padding, s.stride, s.in_side, s.out_side);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto [ox0, ox1] = valid_range(kx, s.padding, s.stride, s.in_side, s.out_side);
                    const double wv = w[ky * k + kx];
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const double* xr = x + (oy * s.stride + ky - s.padding) * s.in_side + kx - s.padding;
                        double* orow = o + oy * s.out_side;
                        for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xr[ox * s.stride];
                    }
                }
            }
        }
    }
}

void conv2d_backward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> grad_out, std::span<double> grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
    const std::size_t k = s.kernel;
    const std::size_t in_area = s.in_side * s.in_side;
    const std::size_t out_area = s.out_side * s.out_side;
    const bool want_input = !grad_in.empty();
    if (want_input) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t co = 0; co < s.out_channels; ++co) {
        const double* g = grad_out.data() + co * out_area;
        double gb = 0.0;
        for (std::size_t i = 0; i < out_area; ++i) gb += g[i];
        grad_bias[co] += gb;
        for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
            const double* x = in.data() + ci * in_area;
            double* gx = want_input ? grad_in.data() + ci * in_area : nullptr;
            const std::size_t wbase = (co * s.in_channels + ci) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto [oy0, oy1] = valid_range(ky, s.padding, s.stride, s.in_side, s.out_side);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto [ox0, ox1] = valid_range(kx, s.padding, s.stride, s.in_side, s.out_side);
                    const double wv = weight[wbase + ky * k + kx];
                    double gw = 0.0;
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const std::size_t off = (oy * s.stride + ky - s.padding) * s.in_side + kx - s.padding;
                        const double* grow = g + oy * s.out_side;
                        const double* xr = x + off;
                        for (std::size_t ox = ox0; ox < ox1; ++ox) gw += grow[ox] * xr[ox * s.stride];
                        if (want_input) {
                            double* gxr = gx + off;
                            for (std::size_t ox = ox0; ox < ox1; ++ox) gxr[ox * s.stride] += wv * grow[ox];
                        }
                    }
                    grad_weight[wbase + ky * k + kx] += gw;
                }
            }
        }
    }
}

void conv_transpose2d_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                              std::span<const double> bias, std::span<double> out) {
    const std::size_t k = s.kernel;
    const std::size_t in_area = s.in_side * s.in_side;
    const std::size_t out_area = s.out_side * s.out_side;
    for (std::size_t co = 0; co < s.out_channels; ++co) std::fill(out.data() + co * out_area, out.data() + (co + 1) * out_area, bias[co]);
    // Output (oy, ox) = (iy * stride - pad + ky, ix * stride - pad + kx); the
    // valid input range mirrors the conv case with the roles of the sides swapped.
    for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
        const double* x = in.data() + ci * in_area;
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            double* o = out.data() + co * out_area;
            const double* w = weight.data() + (ci * s.out_channels + co) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto [iy0, iy1] = valid_range(ky, s.padding, s.stride, s.out_side, s.in_side);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto [ix0, ix1] = valid_range(kx, s.padding, s.stride, s.out_side, s.in_side);
                    const double wv = w[ky * k + kx];
                    for (std::size_t iy = iy0; iy < iy1; ++iy) {
                        const double* xr = x + iy * s.in_side;
                        double* orow = o + (iy * s.stride + ky - s.padding) * s.out_side + kx - s.padding;
                        for (std::size_t ix = ix0; ix < ix1; ++ix) orow[ix * s.stride] += wv * xr[ix];
                    }
                }
            }
        }
    }
}

void conv_transpose2d_backward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                               std::span<const double> grad_out, std::span<double> grad_in,
                               std::span<double> grad_weight, std::span<double> grad_bias) {
    const std::size_t k = s.kernel;
    const std::size_t in_area = s.in_side * s.in_side;
    const std::size_t out_area = s.out_side * s.out_side;
    const bool want_input = !grad_in.empty();
    if (want_input) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t co = 0; co < s.out_channels; ++co) {
        const double* g = grad_out.data() + co * out_area;
        double gb = 0.0;
        for (std::size_t i = 0; i < out_area; ++i) gb += g[i];
        grad_bias[co] += gb;
    }
    for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
        const double* x = in.data() + ci * in_area;
        double* gx = want_input ? grad_in.data() + ci * in_area : nullptr;
        for (std::size_t co = 0; co < s.out_channels; ++co) {
            const double* g = grad_out.data() + co * out_area;
            const std::size_t wbase = (ci * s.out_channels + co) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto [iy0, iy1] = valid_range(ky, s.padding, s.stride, s.out_side, s.in_side);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto [ix0, ix1] = valid_range(kx, s.padding, s.stride, s.out_side, s.in_side);
                    const double wv = weight[wbase + ky * k + kx];
                    double gw = 0.0;
                    for (std::size_t iy = iy0; iy < iy1; ++iy) {
                        const double* xr = x + iy * s.in_side;
                        const double* grow = g + (iy * s.stride + ky - s.padding) * s.out_side + kx - s.padding;
                        for (std::size_t ix = ix0; ix < ix1; ++ix) gw += xr[ix] * grow[ix * s.stride];
                        if (want_input) {
                            double* gxr = gx + iy * s.in_side;
                            for (std::size_t ix = ix0; ix < ix1; ++ix) gxr[ix] += wv * grow[ix * s.stride];
                        }
                    }
                    grad_weight[wbase + ky * k + kx] += gw;
                }
            }
        }
    }
}

void linear_forward(std::size_t in_features, std::size_t out_features, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias, std::span<double> out) {
    for (std::size_t o = 0; o < out_features; ++o) {
        const double* w = weight.data() + o * in_features;
        double acc = bias[o];
        for (std::size_t i = 0; i < in_features; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
}

void linear_backward(std::size_t in_features, std::size_t out_features, std::span<const double> in,
                     std::span<const double> weight, std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
    const bool want_input = !grad_in.empty();
    if (want_input) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < out_features; ++o) {
        const double g = grad_out[o];
        grad_bias[o] += g;
        if (g == 0.0) continue;
        const double* w = weight.data() + o * in_features;
        double* gw = grad_weight.data() + o * in_features;
        for (std::size_t i = 0; i < in_features; ++i) gw[i] += g * in[i];
        if (want_input)
            for (std::size_t i = 0; i < in_features; ++i) grad_in[i] += g * w[i];
    }
}

std::vector<double> dropout_mask(std::size_t n, double rate, RngStream& rng) {
    std::vector<double> mask(n);
    const double keep = 1.0 / (1.0 - rate);
    for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
    return mask;
}

}  // namespace layers

}  // namespace faed::nn
