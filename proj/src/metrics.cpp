#include "faed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faed/error.hpp"

namespace faed::metrics {

using linalg::Vector;

EmbeddingTensor::EmbeddingTensor(std::size_t n_inputs, std::size_t n_samples, std::size_t latent_dim)
    : n_inputs_(n_inputs), n_samples_(n_samples), latent_dim_(latent_dim), data_(n_inputs * n_samples * latent_dim) {}

EmbeddingTensor::EmbeddingTensor(std::size_t n_inputs, std::size_t n_samples, std::size_t latent_dim,
                                 std::vector<double> data)
    : n_inputs_(n_inputs), n_samples_(n_samples), latent_dim_(latent_dim), data_(std::move(data)) {
    if (data_.size() != n_inputs_ * n_samples_ * latent_dim_) {
        throw DimensionError("EmbeddingTensor: data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(n_inputs_) + "x" + std::to_string(n_samples_) + "x" +
                             std::to_string(latent_dim_));
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw NumericalError("EmbeddingTensor: non-finite entry");
    }
}

Matrix EmbeddingTensor::slice(std::size_t j) const {
    if (j >= n_samples_) throw DimensionError("EmbeddingTensor::slice: j out of range");
    Matrix m(n_inputs_, latent_dim_);
    for (std::size_t i = 0; i < n_inputs_; ++i) {
        const double* src = data_.data() + (i * n_samples_ + j) * latent_dim_;
        std::copy(src, src + latent_dim_, m.row(i).begin());
    }
    return m;
}

const char* to_string(RefMode mode) {
    switch (mode) {
        case RefMode::FixedJ0: return "fixed-j0";
        case RefMode::PairedJ: return "paired-j";
    }
    return "unknown";
}

RefMode parse_ref_mode(const std::string& text) {
    if (text == "fixed-j0") return RefMode::FixedJ0;
    if (text == "paired-j") return RefMode::PairedJ;
    throw ConfigError("unknown ref mode '" + text + "' (expected fixed-j0 or paired-j)");
}

namespace {

void require_psd(const Matrix& cov, const char* which) {
    const auto eig = linalg::sym_eig(cov);
    const double floor = linalg::psd_floor(cov);
    if (!eig.eigenvalues.empty() && eig.eigenvalues.front() < floor) {
        throw NotPsdError(std::string("frechet_distance: covariance of ") + which +
                              " is not positive semi-definite (eigenvalue " + std::to_string(eig.eigenvalues.front()) +
                              ")",
                          eig.eigenvalues.front());
    }
}

double clamp_distance(double d) {
    if (d >= 0.0) return d;
    if (d >= -kNegativeSlack) return 0.0;
    throw NumericalError("frechet_distance: result " + std::to_string(d) + " is negative beyond round-off slack");
}

// Distance given a precomputed root of the first covariance. Only the trace of
// sqrtm(R S_b R) is needed, which is the sum of the roots of its eigenvalues.
double frechet_with_root(const GaussianSummary& a, const Matrix& root_a, const GaussianSummary& b) {
    const std::size_t d = a.dim();
    double mean_term = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a.mean[k] - b.mean[k];
        mean_term += diff * diff;
    }

    Matrix inner = root_a * b.cov * root_a;
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r + 1; c < d; ++c) {
            const double v = 0.5 * (inner(r, c) + inner(c, r));
            inner(r, c) = v;
            inner(c, r) = v;
        }
    }
    const auto eig = linalg::sym_eig(inner);
    const double floor = linalg::psd_floor(inner);
    double trace_root = 0.0;
    for (double lambda : eig.eigenvalues) {
        if (lambda < floor) {
            throw NotPsdError("frechet_distance: cross term is not positive semi-definite (eigenvalue " +
                                  std::to_string(lambda) + ")",
                              lambda);
        }
        trace_root += std::sqrt(std::max(lambda, 0.0));
    }
    return clamp_distance(mean_term + linalg::trace(a.cov) + linalg::trace(b.cov) - 2.0 * trace_root);
}

void require_same_dim(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim() || !a.cov.square() ||
        !b.cov.square()) {
        throw DimensionError("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                             std::to_string(b.dim()) + ")");
    }
}

}  // namespace

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
    require_same_dim(a, b);
    const Matrix root_a = linalg::sqrtm_psd(a.cov);
    require_psd(b.cov, "second operand");
    return frechet_with_root(a, root_a, b);
}

FaedDistribution faed_distribution(const EmbeddingTensor& test, const GaussianSummary& reference) {
    if (test.latent_dim() != reference.dim()) {
        throw DimensionError("faed_distribution: latent_dim " + std::to_string(test.latent_dim()) +
                             " does not match reference dimension " + std::to_string(reference.dim()));
    }
    if (test.n_inputs() < 2) {
        throw InsufficientDataError("faed_distribution: need at least 2 inputs, got " +
                                    std::to_string(test.n_inputs()));
    }
    const Matrix root_ref = linalg::sqrtm_psd(reference.cov);

    FaedDistribution out;
    out.values.reserve(test.n_samples());
    for (std::size_t j = 0; j < test.n_samples(); ++j) {
        const GaussianSummary slice = linalg::gaussian_summary(test.slice(j));
        out.values.push_back(frechet_with_root(reference, root_ref, slice));
    }
    return out;
}

FaedDistribution faed_distribution_paired(const EmbeddingTensor& test, const EmbeddingTensor& reference) {
    if (test.latent_dim() != reference.latent_dim()) {
        throw DimensionError("faed_distribution_paired: latent dims differ");
    }
    if (test.n_samples() != reference.n_samples()) {
        throw DimensionError("faed_distribution_paired: test has " + std::to_string(test.n_samples()) +
                             " draws but reference has " + std::to_string(reference.n_samples()));
    }
    if (test.n_inputs() < 2) {
        throw InsufficientDataError("faed_distribution_paired: need at least 2 inputs");
    }
    FaedDistribution out;
    out.values.reserve(test.n_samples());
    for (std::size_t j = 0; j < test.n_samples(); ++j) {
        const GaussianSummary ref = linalg::gaussian_summary(reference.slice(j));
        const GaussianSummary slice = linalg::gaussian_summary(test.slice(j));
        out.values.push_back(frechet_with_root(ref, linalg::sqrtm_psd(ref.cov), slice));
    }
    return out;
}

namespace {

// Welford's update: identical inputs give exactly zero variance.
struct RunningVariance {
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;

    void add(double x) noexcept {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    double population() const noexcept { return n ? m2 / static_cast<double>(n) : 0.0; }
};

}  // namespace

double sigma_faed(const FaedDistribution& d) {
    if (d.values.empty()) throw InsufficientDataError("sigma_faed: empty distribution");
    RunningVariance rv;
    for (double v : d.values) rv.add(v);
    return std::sqrt(rv.population());
}

double pvar(const EmbeddingTensor& test) {
    if (test.n_samples() < 2) {
        throw InsufficientDataError("pvar: need at least 2 Monte Carlo draws, got " + std::to_string(test.n_samples()));
    }
    if (test.n_inputs() == 0 || test.latent_dim() == 0) throw InsufficientDataError("pvar: empty tensor");

    const std::size_t nj = test.n_samples();
    double total = 0.0;
    for (std::size_t k = 0; k < test.latent_dim(); ++k) {
        double over_inputs = 0.0;
        for (std::size_t i = 0; i < test.n_inputs(); ++i) {
            RunningVariance rv;
            for (std::size_t j = 0; j < nj; ++j) rv.add(test(i, j, k));
            over_inputs += rv.population();
        }
        total += over_inputs / static_cast<double>(test.n_inputs());
    }
    return total / static_cast<double>(test.latent_dim());
}

std::vector<std::string> stability_warnings(const std::string& which, std::size_t n_inputs, std::size_t latent_dim) {
    std::vector<std::string> out;
    if (n_inputs <= latent_dim) {
        out.push_back("rank-deficient " + which + " covariance: n_inputs " + std::to_string(n_inputs) +
                      " <= latent_dim " + std::to_string(latent_dim));
    }
    return out;
}

MetricReport metric_report(const EmbeddingTensor& test, const EmbeddingTensor& reference, std::uint64_t seed,
                           RefMode mode) {
    if (test.latent_dim() != reference.latent_dim()) {
        throw DimensionError("metric_report: test latent_dim " + std::to_string(test.latent_dim()) +
                             " != reference latent_dim " + std::to_string(reference.latent_dim()));
    }
    if (reference.n_samples() == 0) throw InsufficientDataError("metric_report: reference has no draws");

    MetricReport r;
    r.n_inputs = test.n_inputs();
    r.n_samples = test.n_samples();
    r.latent_dim = test.latent_dim();
    r.seed = seed;
    r.ref_mode = mode;

    for (auto& w : stability_warnings("test", test.n_inputs(), test.latent_dim())) r.warnings.push_back(std::move(w));
    for (auto& w : stability_warnings("reference", reference.n_inputs(), reference.latent_dim()))
        r.warnings.push_back(std::move(w));

    if (mode == RefMode::FixedJ0) {
        r.faed_per_j = faed_distribution(test, linalg::gaussian_summary(reference.slice(0)));
    } else {
        r.faed_per_j = faed_distribution_paired(test, reference);
    }

    double sum = 0.0;
    for (double v : r.faed_per_j.values) sum += v;
    r.mean_faed = sum / static_cast<double>(r.faed_per_j.values.size());
    r.sigma_faed = sigma_faed(r.faed_per_j);

    if (test.n_samples() >= 2) {
        r.pvar = pvar(test);
    } else {
        r.pvar = 0.0;
        r.warnings.push_back("pvar undefined for a single Monte Carlo draw; reported as 0");
    }
    return r;
}

}  // namespace faed::metrics
