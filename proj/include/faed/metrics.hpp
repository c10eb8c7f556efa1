#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "faed/linalg.hpp"

namespace faed::metrics {

using linalg::GaussianSummary;
using linalg::Matrix;

/// Stochastic embeddings l(i, j, k): input i, Monte Carlo draw j, latent
/// element k, stored row-major in that order.
class EmbeddingTensor {
public:
    EmbeddingTensor() = default;
    EmbeddingTensor(std::size_t n_inputs, std::size_t n_samples, std::size_t latent_dim);
    EmbeddingTensor(std::size_t n_inputs, std::size_t n_samples, std::size_t latent_dim, std::vector<double> data);

    std::size_t n_inputs() const noexcept { return n_inputs_; }
    std::size_t n_samples() const noexcept { return n_samples_; }
    std::size_t latent_dim() const noexcept { return latent_dim_; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * n_samples_ + j) * latent_dim_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * n_samples_ + j) * latent_dim_ + k];
    }

    /// The N x K population {l(., j, .)} seen by the j-th Frechet distance.
    Matrix slice(std::size_t j) const;

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool operator==(const EmbeddingTensor&) const = default;

private:
    std::size_t n_inputs_ = 0;
    std::size_t n_samples_ = 0;
    std::size_t latent_dim_ = 0;
    std::vector<double> data_;
};

struct FaedDistribution {
    std::vector<double> values;
};

/// How the reference population is collapsed to Gaussian summaries.
enum class RefMode {
    FixedJ0,  // one summary from the reference tensor's j = 0 slice
    PairedJ,  // test slice j is compared with reference slice j
};

const char* to_string(RefMode mode);
RefMode parse_ref_mode(const std::string& text);

struct MetricReport {
    double mean_faed = 0.0;
    double sigma_faed = 0.0;
    double pvar = 0.0;
    FaedDistribution faed_per_j;
    std::size_t n_inputs = 0;
    std::size_t n_samples = 0;
    std::size_t latent_dim = 0;
    std::uint64_t seed = 0;
    RefMode ref_mode = RefMode::FixedJ0;
    std::vector<std::string> warnings;
};

/// Values in [-kNegativeSlack, 0) are reported as 0.
inline constexpr double kNegativeSlack = 1e-6;

/// Squared Frechet distance between two Gaussians:
///   |mu_a - mu_b|^2 + tr(S_a + S_b - 2 sqrtm(S_a^1/2 S_b S_a^1/2)).
/// The symmetric form has the same trace as sqrtm(S_a S_b) and stays PSD.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

FaedDistribution faed_distribution(const EmbeddingTensor& test, const GaussianSummary& reference);
FaedDistribution faed_distribution_paired(const EmbeddingTensor& test, const EmbeddingTensor& reference);

/// Population standard deviation (denominator J).
double sigma_faed(const FaedDistribution& d);

/// Mean over k and i of the population variance over j.
double pvar(const EmbeddingTensor& test);

/// Stability notes for a population of n_inputs vectors in latent_dim dims.
std::vector<std::string> stability_warnings(const std::string& which, std::size_t n_inputs, std::size_t latent_dim);

MetricReport metric_report(const EmbeddingTensor& test, const EmbeddingTensor& reference, std::uint64_t seed,
                           RefMode mode = RefMode::FixedJ0);

}  // namespace faed::metrics
