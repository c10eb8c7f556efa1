import numpy as np
import pytest

import faed


def test_frechet_closed_forms():
    one = np.eye(1)
    assert faed.frechet_distance([0.0], one, [0.0], one) == 0.0
    assert faed.frechet_distance([0.0], one, [1.0], 4 * one) == pytest.approx(2.0)
    assert faed.frechet_distance([0, 0], np.eye(2), [3, 4], 4 * np.eye(2)) == pytest.approx(27.0)


def test_frechet_matches_scipy():
    scipy_linalg = pytest.importorskip("scipy.linalg")
    rng = np.random.default_rng(3)
    b = rng.normal(size=(5, 5))
    c = rng.normal(size=(5, 5))
    sa = b @ b.T / 5 + 0.1 * np.eye(5)
    sb = c @ c.T / 5 + 0.1 * np.eye(5)
    ma, mb = rng.normal(size=5), rng.normal(size=5)
    want = np.sum((ma - mb) ** 2) + np.trace(sa + sb - 2 * scipy_linalg.sqrtm(sa @ sb).real)
    assert faed.frechet_distance(ma, sa, mb, sb) == pytest.approx(want, rel=1e-7)


def test_not_psd_raises():
    with pytest.raises(faed._core.NotPsdError):
        faed.frechet_distance([0, 0], np.diag([1.0, -1.0]), [0, 0], np.eye(2))


def test_pvar_and_report():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(50, 20, 4))
    ref = rng.normal(size=(60, 20, 4))
    assert faed.pvar(t) == pytest.approx(np.var(t, axis=1).mean(), rel=1e-12)
    r = faed.metric_report(t, ref, seed=5)
    assert r["seed"] == 5
    assert r["n_samples"] == 20
    assert r["mean_faed"] == pytest.approx(np.mean(r["faed_per_j"]))
    assert r["sigma_faed"] == pytest.approx(np.std(r["faed_per_j"]))
    assert faed.faed_distribution(t, ref) == pytest.approx(r["faed_per_j"])


def test_pipeline(tmp_path):
    arch = faed.ArchitectureConfig.desk()
    arch.input_side = 16
    arch.encoder_channels = [4, 8]
    arch.latent_dim = 6
    train = faed.synth_dataset("blobs", 16, 16, 1)
    val = faed.synth_dataset("blobs", 8, 16, 2)
    assert train.shape == (16, 3, 16, 16)
    assert 0.0 <= train.min() and train.max() <= 1.0

    tc = faed.TrainConfig()
    tc.epochs = 2
    tc.batch_size = 4
    tc.seed = 1
    model, best_epoch, history = faed.Autoencoder(arch, 1).fit(train, val, tc)
    assert len(history) == 2
    assert 1 <= best_epoch <= 2

    emb = model.encode_mc(val, 3, 9)
    assert emb.shape == (8, 3, 6)
    np.testing.assert_array_equal(emb, model.encode_mc(val, 3, 9))

    path = tmp_path / "e.emb"
    faed.write_embeddings(emb, 9, str(path))
    back, seed = faed.read_embeddings(str(path))
    assert seed == 9
    np.testing.assert_array_equal(back, emb)

    ckpt = tmp_path / "m.ckpt"
    model.save(str(ckpt))
    again = faed.Autoencoder.load(str(ckpt))
    np.testing.assert_array_equal(again.encode_mc(val, 3, 9), emb)

    noisy = faed.augment(val, "noise", seed=4)
    assert noisy.shape == val.shape
    assert not np.array_equal(noisy, val)
    over = faed.augment(val, "foreign-overlay", seed=4, count=2, patch_side=4,
                        foreign=faed.synth_dataset("stripes", 3, 16, 5))
    assert over.shape == val.shape
