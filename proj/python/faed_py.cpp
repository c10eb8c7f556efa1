#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "faed/data.hpp"
#include "faed/error.hpp"
#include "faed/harness.hpp"
#include "faed/metrics.hpp"
#include "faed/nn.hpp"

namespace py = pybind11;
using namespace faed;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<data::Image> images_from(const Array& a) {
    if (a.ndim() != 4 || a.shape(2) != a.shape(3)) {
        throw DimensionError("images must be shaped (n, channels, side, side)");
    }
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto channels = static_cast<std::size_t>(a.shape(1));
    const auto side = static_cast<std::size_t>(a.shape(2));
    const std::size_t per = channels * side * side;
    std::vector<data::Image> out;
    out.reserve(n);
    const double* p = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        data::Image img(side, channels);
        std::copy(p + i * per, p + (i + 1) * per, img.pixels.begin());
        out.push_back(std::move(img));
    }
    return out;
}

Array images_to(const std::vector<data::Image>& images) {
    const std::size_t n = images.size();
    const std::size_t c = n ? images[0].channels : 3;
    const std::size_t s = n ? images[0].side : 0;
    Array out({n, c, s, s});
    double* p = out.mutable_data();
    for (const auto& img : images) p = std::copy(img.pixels.begin(), img.pixels.end(), p);
    return out;
}

metrics::EmbeddingTensor tensor_from(const Array& a) {
    if (a.ndim() != 3) throw DimensionError("embeddings must be shaped (n_inputs, n_samples, latent_dim)");
    return metrics::EmbeddingTensor(a.shape(0), a.shape(1), a.shape(2),
                                    std::vector<double>(a.data(), a.data() + a.size()));
}

Array tensor_to(const metrics::EmbeddingTensor& t) {
    Array out({t.n_inputs(), t.n_samples(), t.latent_dim()});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

linalg::GaussianSummary summary_from(const Array& mean, const Array& cov) {
    if (mean.ndim() != 1 || cov.ndim() != 2) throw DimensionError("expected a 1-d mean and a 2-d covariance");
    const auto d = static_cast<std::size_t>(mean.shape(0));
    if (cov.shape(0) != mean.shape(0) || cov.shape(1) != mean.shape(0)) {
        throw DimensionError("covariance must be square and match the mean");
    }
    return {linalg::Vector(mean.data(), mean.data() + d),
            linalg::Matrix(d, d, std::vector<double>(cov.data(), cov.data() + d * d))};
}

py::dict report_to_dict(const metrics::MetricReport& r) {
    py::dict d;
    d["mean_faed"] = r.mean_faed;
    d["sigma_faed"] = r.sigma_faed;
    d["pvar"] = r.pvar;
    d["faed_per_j"] = r.faed_per_j.values;
    d["n_inputs"] = r.n_inputs;
    d["n_samples"] = r.n_samples;
    d["latent_dim"] = r.latent_dim;
    d["seed"] = r.seed;
    d["ref_mode"] = metrics::to_string(r.ref_mode);
    d["warnings"] = r.warnings;
    return d;
}

data::Dataset dataset_of(const Array& images) {
    return {"array", images_from(images), {}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of the faed package";

    auto base = py::register_exception<Error>(m, "FaedError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NotPsdError>(m, "NotPsdError", base.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());

    py::class_<nn::ArchitectureConfig>(m, "ArchitectureConfig")
        .def(py::init<>())
        .def_static("full_scale", &nn::ArchitectureConfig::full_scale)
        .def_static("desk", &nn::ArchitectureConfig::desk)
        .def_readwrite("input_side", &nn::ArchitectureConfig::input_side)
        .def_readwrite("input_channels", &nn::ArchitectureConfig::input_channels)
        .def_readwrite("encoder_channels", &nn::ArchitectureConfig::encoder_channels)
        .def_readwrite("kernel", &nn::ArchitectureConfig::kernel)
        .def_readwrite("stride", &nn::ArchitectureConfig::stride)
        .def_readwrite("latent_dim", &nn::ArchitectureConfig::latent_dim)
        .def_readwrite("dropout_rate", &nn::ArchitectureConfig::dropout_rate)
        .def_property(
            "placement", [](const nn::ArchitectureConfig& a) { return std::string(nn::to_string(a.placement)); },
            [](nn::ArchitectureConfig& a, const std::string& s) { a.placement = nn::parse_placement(s); })
        .def_property_readonly("flat_size", &nn::ArchitectureConfig::flat_size)
        .def("validate", &nn::ArchitectureConfig::validate);

    py::class_<nn::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &nn::TrainConfig::epochs)
        .def_readwrite("batch_size", &nn::TrainConfig::batch_size)
        .def_readwrite("learning_rate", &nn::TrainConfig::learning_rate)
        .def_readwrite("beta1", &nn::TrainConfig::beta1)
        .def_readwrite("beta2", &nn::TrainConfig::beta2)
        .def_readwrite("eps_adam", &nn::TrainConfig::eps_adam)
        .def_readwrite("seed", &nn::TrainConfig::seed);

    py::class_<nn::Autoencoder>(m, "Autoencoder")
        .def(py::init([](const nn::ArchitectureConfig& arch, std::uint64_t seed) { return nn::build(arch, seed); }),
             py::arg("arch"), py::arg("seed") = 0)
        .def_static("load", [](const std::filesystem::path& p) { return nn::load_checkpoint(p); })
        .def("save", [](const nn::Autoencoder& a, const std::filesystem::path& p) { nn::save_checkpoint(a, p); })
        .def_readonly("arch", &nn::Autoencoder::arch)
        .def(
            "fit",
            [](const nn::Autoencoder& a, const Array& train, const Array& val, const nn::TrainConfig& tc) {
                auto r = nn::fit(a, dataset_of(train), dataset_of(val), tc);
                py::list history;
                for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
                return py::make_tuple(std::move(r.best), r.best_epoch, history);
            },
            py::arg("train"), py::arg("val"), py::arg("config"),
            "Returns (best model, best epoch, [(epoch, train_loss, val_loss), ...]).")
        .def(
            "reconstruct",
            [](const nn::Autoencoder& a, const Array& images) {
                const auto imgs = images_from(images);
                return images_to(nn::forward(a, imgs, nn::Mode::EvalDeterministic, {}).reconstruction);
            },
            py::arg("images"))
        .def(
            "loss", [](const nn::Autoencoder& a, const Array& images) { return nn::evaluate_loss(a, images_from(images)); },
            py::arg("images"))
        .def(
            "encode_mc",
            [](const nn::Autoencoder& a, const Array& images, std::size_t j, std::uint64_t seed) {
                const auto imgs = images_from(images);
                metrics::EmbeddingTensor t;
                {
                    py::gil_scoped_release release;
                    t = nn::encode_mc(a, imgs, j, seed);
                }
                return tensor_to(t);
            },
            py::arg("images"), py::arg("j_samples"), py::arg("seed"));

    m.def(
        "synth_dataset",
        [](const std::string& family, std::size_t n, std::size_t side, std::uint64_t seed) {
            return images_to(data::synth_dataset(data::parse_family(family), n, side, seed).images);
        },
        py::arg("family"), py::arg("n"), py::arg("side"), py::arg("seed"));

    m.def(
        "augment",
        [](const Array& images, const std::string& kind, std::uint64_t seed, std::size_t count, std::size_t patch_side,
           std::optional<Array> foreign, bool clamp_noise) {
            const data::AugmentSpec spec{data::parse_augment_kind(kind), count, patch_side, clamp_noise};
            const auto src = foreign ? images_from(*foreign) : std::vector<data::Image>{};
            return images_to(data::augment_dataset(dataset_of(images), spec, src, seed).images);
        },
        py::arg("images"), py::arg("kind"), py::arg("seed"), py::arg("count") = 5, py::arg("patch_side") = 8,
        py::arg("foreign") = py::none(), py::arg("clamp_noise") = true);

    m.def(
        "frechet_distance",
        [](const Array& mu_a, const Array& cov_a, const Array& mu_b, const Array& cov_b) {
            return metrics::frechet_distance(summary_from(mu_a, cov_a), summary_from(mu_b, cov_b));
        },
        py::arg("mu_a"), py::arg("cov_a"), py::arg("mu_b"), py::arg("cov_b"));

    m.def(
        "faed_distribution",
        [](const Array& test, const Array& reference) {
            const auto ref = tensor_from(reference);
            return metrics::faed_distribution(tensor_from(test), linalg::gaussian_summary(ref.slice(0))).values;
        },
        py::arg("test"), py::arg("reference"));

    m.def("pvar", [](const Array& test) { return metrics::pvar(tensor_from(test)); }, py::arg("test"));

    m.def(
        "metric_report",
        [](const Array& test, const Array& reference, std::uint64_t seed, const std::string& ref_mode) {
            return report_to_dict(
                metrics::metric_report(tensor_from(test), tensor_from(reference), seed, metrics::parse_ref_mode(ref_mode)));
        },
        py::arg("test"), py::arg("reference"), py::arg("seed") = 0, py::arg("ref_mode") = "fixed-j0");

    m.def(
        "write_embeddings",
        [](const Array& t, std::uint64_t seed, const std::filesystem::path& p) { harness::save_embeddings(tensor_from(t), seed, p); },
        py::arg("embeddings"), py::arg("seed"), py::arg("path"));

    m.def(
        "read_embeddings",
        [](const std::filesystem::path& p) {
            const auto f = harness::load_embeddings(p);
            return py::make_tuple(tensor_to(f.tensor), f.seed);
        },
        py::arg("path"), "Returns (embeddings, seed).");
}
