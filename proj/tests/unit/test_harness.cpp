#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "faed/error.hpp"
#include "faed/harness.hpp"

using namespace faed;
using namespace faed::harness;
using metrics::EmbeddingTensor;

namespace {

EmbeddingTensor random_tensor(std::size_t n, std::size_t j, std::size_t k, std::uint64_t seed) {
    RngStream rng(seed, 0);
    EmbeddingTensor t(n, j, k);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

nn::ArchitectureConfig small_arch() {
    nn::ArchitectureConfig a = nn::ArchitectureConfig::desk();
    a.input_side = 16;
    a.encoder_channels = {4, 8};
    a.latent_dim = 6;
    return a;
}

}  // namespace

TEST_CASE("embedding file round trip") {
    const auto t = random_tensor(4, 3, 2, 1);
    const auto bytes = serialize_embeddings(t, 0xDEADBEEFCAFEull);
    CHECK(bytes.size() == 8 + 4 * 4 + 8 + 24 * 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "FAEDEMB1");
    CHECK(bytes[8] == 1);
    CHECK(bytes[12] == 4);
    CHECK(bytes[16] == 3);
    CHECK(bytes[20] == 2);
    CHECK(bytes[24] == 0xFE);

    const auto back = deserialize_embeddings(bytes);
    CHECK(back.tensor == t);
    CHECK(back.seed == 0xDEADBEEFCAFEull);

    const auto path = std::filesystem::temp_directory_path() / "faed_test_emb" / "t.emb";
    save_embeddings(t, 5, path);
    CHECK(load_embeddings(path).tensor == t);
    std::filesystem::remove_all(path.parent_path());

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(deserialize_embeddings(truncated), ParseError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(deserialize_embeddings(trailing), ParseError);
    auto version = bytes;
    version[8] = 2;
    CHECK_THROWS_AS(deserialize_embeddings(version), ParseError);
}

TEST_CASE("report format and parse") {
    const auto test = random_tensor(6, 4, 8, 2);
    const auto ref = random_tensor(7, 4, 8, 3);
    const auto r = metrics::metric_report(test, ref, 42, metrics::RefMode::PairedJ);
    const std::string text = format_report(r);
    CHECK(text.find("mean_faed = ") != std::string::npos);
    CHECK(text.find("seed = 42") != std::string::npos);
    CHECK(text.find("n_samples = 4") != std::string::npos);
    CHECK(text.find("ref_mode = paired-j") != std::string::npos);
    CHECK(text.find("rank-deficient") != std::string::npos);

    const auto back = parse_report(text);
    CHECK(back.mean_faed == r.mean_faed);
    CHECK(back.sigma_faed == r.sigma_faed);
    CHECK(back.pvar == r.pvar);
    CHECK(back.faed_per_j.values == r.faed_per_j.values);
    CHECK(back.warnings == r.warnings);
    CHECK(back.seed == 42);
    CHECK(back.ref_mode == metrics::RefMode::PairedJ);
    CHECK(format_report(back) == text);

    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK_THROWS_AS(parse_report("mean_faed = x\n"), ConfigError);
}

TEST_CASE("history csv") {
    const std::vector<nn::EpochRecord> h{{1, 2.5, 3.0}, {2, 1.25, 2.0}};
    CHECK(format_history_csv(h) == "epoch,train_loss,val_loss\n1,2.5,3\n2,1.25,2\n");
}

TEST_CASE("configuration") {
    const auto kv = parse_key_values("# comment\nseed = 7\n\n  epochs=3 # trailing\nencoder_channels = 4,8\n");
    CHECK(kv.at("seed") == "7");
    CHECK(kv.at("epochs") == "3");
    CHECK(kv.at("encoder_channels") == "4,8");
    CHECK_THROWS_AS(parse_key_values("novalue\n"), ConfigError);

    ExperimentConfig cfg;
    for (const auto& [k, v] : kv) cfg.set(k, v);
    CHECK(cfg.seed == 7);
    CHECK(cfg.train.seed == 7);
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.arch.encoder_channels == std::vector<std::size_t>{4, 8});
    cfg.set("ref_mode", "paired-j");
    CHECK(cfg.ref_mode == metrics::RefMode::PairedJ);
    cfg.set("dropout_placement", "encoder-hidden-and-latent");
    CHECK(cfg.arch.placement == nn::DropoutPlacement::EncoderHiddenAndLatent);
    cfg.set("test_data", "/tmp/x");
    CHECK(cfg.paths.at("test_data") == "/tmp/x");

    CHECK_THROWS_AS(cfg.set("bogus", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("epochs", "three"), ConfigError);
    CHECK_THROWS_AS(cfg.set("dropout", "0.1x"), ConfigError);
    cfg.set("j_samples", "0");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK(parse_count_list("c", "0,1, 3") == std::vector<std::size_t>{0, 1, 3});
    CHECK_THROWS_AS(parse_count_list("c", "0,,1"), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "faed_test_cfg.txt";
    std::ofstream(path) << "latent_dim = 12\nj_samples = 9\n";
    const auto loaded = load_config(path);
    CHECK(loaded.arch.latent_dim == 12);
    CHECK(loaded.j_samples == 9);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config("/nonexistent/cfg"), IoError);
}

TEST_CASE("train_model is reproducible") {
    const auto train = data::synth_dataset(data::SynthFamily::Blobs, 8, 16, 1);
    const auto val = data::synth_dataset(data::SynthFamily::Blobs, 4, 16, 2);
    nn::TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 5;
    const auto a = train_model(small_arch(), tc, train, val);
    const auto b = train_model(small_arch(), tc, train, val);
    CHECK(a.checkpoint_bytes == b.checkpoint_bytes);
    CHECK(a.fit.history.size() == 2);
    CHECK(a.history_csv.rfind("epoch,train_loss,val_loss\n", 0) == 0);
}

TEST_CASE("sweep and ladder shapes") {
    const auto model = nn::build(small_arch(), 3);
    const auto base = data::synth_dataset(data::SynthFamily::Blobs, 8, 16, 1);
    const auto foreign = data::synth_dataset(data::SynthFamily::Stripes, 4, 16, 2);
    const auto reference = nn::encode_mc(model, data::synth_dataset(data::SynthFamily::Blobs, 8, 16, 3).images, 2, 9);

    SweepSpec only_zero{{0}, foreign};
    const auto one = run_sweep(model, base, only_zero, reference, 1, 2, 4);
    REQUIRE(one.size() == 1);
    CHECK(one[0].overlay_count == 0);
    const auto baseline = metrics::metric_report(nn::encode_mc(model, base.images, 2, 1), reference, 1);
    CHECK(one[0].report.mean_faed == baseline.mean_faed);

    SweepSpec counts{{0, 1, 3}, foreign};
    const auto rows = run_sweep(model, base, counts, reference, 1, 2, 4);
    CHECK(rows.size() == 3);
    const auto csv = format_sweep_csv(rows);
    CHECK(csv.rfind("overlay_count,mean_faed,sigma_faed,pvar\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    CHECK_THROWS_AS((SweepSpec{{1, 0}, foreign}.validate()), ConfigError);
    CHECK_THROWS_AS((SweepSpec{{}, foreign}.validate()), ConfigError);

    LadderInputs in{base, data::synth_dataset(data::SynthFamily::Blobs, 8, 16, 3), foreign,
                    data::synth_dataset(data::SynthFamily::Stripes, 8, 16, 4)};
    const auto ladder = run_ladder(model, in, 1, 2, 2, 4);
    REQUIRE(ladder.size() == 5);
    CHECK(ladder[0].rung == "baseline");
    CHECK(ladder[4].rung == "disjoint");
    CHECK(format_ladder_csv(ladder).rfind("rung,mean_faed,sigma_faed,pvar,n_inputs,n_samples\n", 0) == 0);
}
