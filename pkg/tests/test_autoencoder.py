import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpqe.autoencoder import (
    Block,
    ConfigError,
    DegenerateChannelError,
    EncoderConfig,
    build_autoencoder,
    cifar_config,
    fpqe_encode,
    freeze_encoder,
    load_autoencoder,
    mnist_config,
    reconstruct,
    save_autoencoder,
    train_autoencoder,
    wide_latent_config,
)
from fpqe.autoencoder import FrozenEncoder
from fpqe.functional import conv_output_size, mse_loss
from fpqe.tensor import Tensor

from _oracles import numeric_grad


def tiny_config(**kw):
    return EncoderConfig((1, 8, 8), (Block(3), Block(2)), **kw)


def images(rng, n, shape=(1, 28, 28)):
    return rng.uniform(0, 1, size=(n, *shape))


@settings(max_examples=40, deadline=None)
@given(h=st.integers(6, 33), w=st.integers(6, 33),
       blocks=st.lists(st.tuples(st.integers(1, 4), st.integers(1, 2), st.integers(0, 1)), min_size=1, max_size=3))
def test_spatial_chain_matches_conv_formula(h, w, blocks):
    cfg = EncoderConfig((1, h, w), tuple(Block(c, s, p) for c, s, p in blocks), allow_expansion=True)
    try:
        chain = cfg.spatial_chain()
    except ConfigError:
        hh, ww = h, w
        for b in cfg.blocks:
            if min(hh, ww) + 2 * b.padding < 3:
                return
            hh = (hh + 2 * b.padding - 3) // b.stride + 1
            ww = (ww + 2 * b.padding - 3) // b.stride + 1
        raise
    for (hi, wi), (ho, wo), b in zip(chain, chain[1:], cfg.blocks):
        assert ho == conv_output_size(hi, 3, b.stride, b.padding)
        assert wo == conv_output_size(wi, 3, b.stride, b.padding)


@settings(max_examples=15, deadline=None)
@given(h=st.integers(8, 20), strides=st.lists(st.integers(1, 2), min_size=1, max_size=3))
def test_decoder_inverts_encoder_shape(h, strides):
    cfg = EncoderConfig((1, h, h), tuple(Block(2, s) for s in strides), allow_expansion=True)
    model = build_autoencoder(cfg, seed=0)
    x = np.random.default_rng(0).uniform(size=(2, 1, h, h))
    assert model.encode(x).shape == (2, *cfg.latent_shape)
    assert model.forward(x).shape == x.shape


@pytest.mark.parametrize("cfg,shape", [(mnist_config(), (1, 28, 28)), (cifar_config(), (3, 32, 32))])
def test_presets_give_4x4_latent(rng, cfg, shape):
    model = build_autoencoder(cfg, seed=0)
    x = images(rng, 2, shape)
    assert model.encode(x).shape == (2, 8, 4, 4)
    assert model.forward(x).shape == (2, *shape)


def test_wide_preset_gives_8x8_latent(rng):
    model = build_autoencoder(wide_latent_config(), seed=0)
    assert model.encode(images(rng, 1)).shape == (1, 64, 8, 8)


def test_same_seed_same_parameters():
    a = build_autoencoder(mnist_config(), seed=7).arrays()
    b = build_autoencoder(mnist_config(), seed=7).arrays()
    c = build_autoencoder(mnist_config(), seed=8).arrays()
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert not all(np.array_equal(u, v) for u, v in zip(a, c))


def test_kernel_too_large_names_block():
    cfg = EncoderConfig((1, 4, 4), (Block(2), Block(2), Block(2), Block(2, 1, 0)))
    with pytest.raises(ConfigError, match="block 3"):
        build_autoencoder(cfg)


def test_latent_mismatch_and_expansion_rejected():
    with pytest.raises(ConfigError, match="latent"):
        mnist_config().validate((4, 4, 4))
    with pytest.raises(ConfigError, match="larger than the input"):
        build_autoencoder(EncoderConfig((1, 8, 8), (Block(8, 1),)))


def test_reconstruction_loss_gradient_matches_fd(rng):
    model = build_autoencoder(tiny_config(), seed=1)
    x = images(rng, 3, (1, 8, 8))

    def loss():
        return mse_loss(model.forward(x, train=True), Tensor(x))

    params = model.parameters()
    for p in params:
        p.grad = None
    loss().backward()
    for p in params:
        fd = numeric_grad(lambda: loss().item(), p.data, 1e-6)
        assert np.allclose(p.grad, fd, atol=1e-7, rtol=1e-5)


def test_zero_epochs_leaves_model_unchanged(rng):
    model = build_autoencoder(tiny_config(), seed=0)
    before = [a.copy() for a in model.arrays()]
    result = train_autoencoder(model, images(rng, 4, (1, 8, 8)), epochs=0)
    assert result.trace == []
    assert all(np.array_equal(u, v) for u, v in zip(before, model.arrays()))


def test_memorises_single_image(rng):
    model = build_autoencoder(EncoderConfig((1, 8, 8), (Block(8), Block(4))), seed=0)
    x = images(rng, 1, (1, 8, 8)).round(1)
    result = train_autoencoder(model, x, epochs=400, lr=1e-2, batch_size=1)
    assert result.trace[-1] < 1e-3
    assert result.trace[-1] < result.trace[0]


def test_training_is_deterministic(rng):
    x = images(rng, 6, (1, 8, 8))
    runs = []
    for _ in range(2):
        model = build_autoencoder(tiny_config(), seed=3)
        runs.append((train_autoencoder(model, x, epochs=3, batch_size=2, seed=5).trace, model.arrays()))
    assert runs[0][0] == runs[1][0]
    assert all(np.array_equal(u, v) for u, v in zip(runs[0][1], runs[1][1]))


def test_frozen_handle_is_isolated_from_training(rng, tmp_path):
    model = build_autoencoder(tiny_config(), seed=0)
    x = images(rng, 4, (1, 8, 8))
    handle = freeze_encoder(model)
    z = handle.encode(x)
    assert not hasattr(handle, "decoder")
    with pytest.raises(ValueError, match="frozen"):
        train_autoencoder(model, x, epochs=1)
    # retraining the source model must not leak into the handle
    model.frozen = False
    train_autoencoder(model, x, epochs=2)
    assert np.array_equal(handle.encode(x), z)

    handle.save(tmp_path / "enc.fpqt")
    loaded = FrozenEncoder.load(tmp_path / "enc.fpqt")
    assert np.array_equal(loaded.encode(x), z)
    assert all(not a.flags.writeable for a in handle.arrays())


def test_autoencoder_checkpoint_round_trip(rng, tmp_path):
    model = build_autoencoder(tiny_config(), seed=2)
    x = images(rng, 4, (1, 8, 8))
    train_autoencoder(model, x, epochs=2)
    save_autoencoder(model, tmp_path / "ae.fpqt")
    loaded = load_autoencoder(tmp_path / "ae.fpqt")
    assert np.array_equal(reconstruct(loaded, x), reconstruct(model, x))
    assert loaded.epochs_trained == 2


def test_fpqe_rows_are_unit_norm(rng):
    handle = freeze_encoder(build_autoencoder(mnist_config(), seed=0))
    psi = fpqe_encode(handle, images(rng, 5))
    assert psi.shape == (5, 8, 16)
    assert np.allclose(np.linalg.norm(psi, axis=-1), 1.0, atol=1e-12)
    assert fpqe_encode(handle, images(rng, 1)[0]).shape == (8, 16)


def test_fpqe_pads_to_power_of_two(rng):
    cfg = EncoderConfig((1, 10, 10), (Block(2),))  # 5x5 latent -> 32 amplitudes
    psi = fpqe_encode(freeze_encoder(build_autoencoder(cfg, 0)), images(rng, 2, (1, 10, 10)))
    assert psi.shape == (2, 2, 32)
    assert np.all(psi[..., 25:] == 0)


def test_wide_preset_register_shape(rng):
    handle = freeze_encoder(build_autoencoder(wide_latent_config(), seed=0))
    assert fpqe_encode(handle, images(rng, 1)[0]).shape == (64, 64)


def test_zero_channel_raises_with_index(rng):
    model = build_autoencoder(tiny_config(), seed=0)
    last = model.encoder[-1]
    last.weight.data[1] = 0.0
    last.bias.data[1] = 0.0
    last.beta.data[1] = 0.0
    handle = freeze_encoder(model)
    with pytest.raises(DegenerateChannelError) as err:
        fpqe_encode(handle, images(rng, 2, (1, 8, 8)))
    assert err.value.channel == 1


def test_encoding_ignores_global_latent_scale(rng):
    model = build_autoencoder(tiny_config(), seed=0)
    x = images(rng, 2, (1, 8, 8))
    a = fpqe_encode(freeze_encoder(model), x)
    for layer in model.encoder[-1:]:
        layer.gamma.data *= 3.0
        layer.beta.data *= 3.0
    b = fpqe_encode(FrozenEncoder(model.config, model.encoder), x)
    assert np.allclose(a, b, atol=1e-12)


def test_reconstruct_is_deterministic_and_bounded(rng):
    model = build_autoencoder(mnist_config(), seed=0)
    x = images(rng, 3)
    r = reconstruct(model, x)
    assert np.array_equal(r, reconstruct(model, x))
    assert r.min() >= 0 and r.max() <= 1
