import json

import numpy as np
import pytest

from deepic.channel import ChannelParams, SeededRng
from deepic.ndgrad import Tensor
from deepic.neural import (
    ArchConfig,
    CheckpointError,
    Interleaver,
    VARIANTS,
    build_variant,
    decode,
    decode_interleaved,
    encode,
    encode_interleaved,
    loads,
    perturbation_response,
    power_normalize,
)
from deepic.neural.checkpoint import dumps

TINY = dict(enc_channels=4, dec_channels=4, dec_layers=2, iterations=2, rnn_hidden=4, rnn_layers=1, ff_hidden=8)


def _model(kind="deepic", K=12, seed=0, **arch):
    cfg = {**TINY, **arch}
    if kind == "ff_ae":
        cfg["block_length"] = K
    model = build_variant(kind, cfg, seed=seed)
    model.calibrate(SeededRng(seed, "calibrate"), K, blocks=200)
    return model


def _single_tap(model):
    # zero every encoder kernel tap except the centre one, so each output depends on one bit
    for name in model.encoder_param_names():
        p = model.params[name]
        if name.endswith(".w") and p.data.shape[-1] > 1:
            centre = p.data.shape[-1] // 2
            keep = p.data[..., centre].copy()
            p.data[...] = 0.0
            p.data[..., centre] = keep
    return model


def test_normalization_example():
    # branch 1 sees {1, 3} across the batch
    x = Tensor(np.array([[[1.0], [0.0], [1.0]], [[3.0], [5.0], [-5.0]]]))
    out, stats = power_normalize(x)
    np.testing.assert_allclose(out.data[:, 0, 0], [-1.0, 1.0])
    assert stats.mean[0] == 2.0 and stats.std[0] == 1.0


def test_batch_normalization_moments():
    model = build_variant("deepic", TINY, seed=1)
    bits = SeededRng(1, "bits").bits((500, 30))
    codes, _ = model.encode(1, bits, mode="batch")
    for branch in range(3):
        vals = codes.data[:, branch, :]
        assert abs(vals.mean()) < 1e-6
        assert abs(vals.var() - 1.0) < 1e-5


def test_batch_mode_needs_two_examples():
    model = build_variant("deepic", TINY)
    with pytest.raises(ValueError, match="J >= 2"):
        model.encode(1, np.zeros((1, 10)), mode="batch")


def test_frozen_mode_is_batch_size_independent():
    model = _model(K=20)
    bits = SeededRng(2, "bits").bits((500, 20))
    full, _ = encode(model, bits)
    for j in (0, 7, 499):
        single, _ = encode(model, bits[j : j + 1])
        np.testing.assert_allclose(single[0], full[j], rtol=0, atol=1e-9)
    again, _ = encode(model, bits)
    np.testing.assert_array_equal(full, again)


def test_frozen_mode_requires_stats():
    model = build_variant("deepic", TINY)
    with pytest.raises(RuntimeError, match="frozen"):
        model.encode(1, np.zeros((2, 10)))


@pytest.mark.parametrize("kind", VARIANTS)
def test_rate_is_one_third(kind):
    K = 12
    model = _model(kind, K=K)
    codes, _ = encode(model, np.zeros((3, K), dtype=np.int8))
    assert codes.shape == (3, 3, K)
    assert codes.size // 3 == 3 * K


@pytest.mark.parametrize("kind", VARIANTS)
def test_decoder_output_shape_and_range(kind):
    K = 12
    model = _model(kind, K=K)
    y = SeededRng(3, "y").normal((3, K), scale=3.0)
    post = decode(model, y[0], y[1], y[2])
    assert post.shape == (K,)
    assert np.all((post > 0) & (post < 1))


def test_posterior_never_saturates():
    model = _model()
    post = decode(model, *(np.full(12, 1e3) for _ in range(3)))
    assert np.all((post > 0) & (post < 1))


def test_same_seed_gives_identical_parameters():
    a, b = build_variant("deepic", TINY, seed=5), build_variant("deepic", TINY, seed=5)
    c = build_variant("deepic", TINY, seed=6)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
    assert any(not np.array_equal(a.params[n].data, c.params[n].data) for n in a.params)


def test_users_and_branches_do_not_share_weights():
    model = build_variant("deepic", TINY, seed=0)
    w = model.params
    assert not np.array_equal(w["u1.enc.b1.conv0.w"].data, w["u2.enc.b1.conv0.w"].data)
    assert not np.array_equal(w["u1.enc.b1.conv0.w"].data, w["u1.enc.b2.conv0.w"].data)


def _deepic_count(a: ArchConfig) -> int:
    # independent count from the layer description
    C, W, L = a.enc_channels, a.enc_kernel, a.enc_layers
    branch = (C * W + C) + (L - 1) * (C * C * W + C) + (C + 1)
    D, Wd, Ld, F = a.dec_channels, a.dec_kernel, a.dec_layers, a.feature_size
    block = (D * (2 + F) * Wd + D) + (Ld - 1) * (D * D * Wd + D) + (F * D + F)
    blocks = 2 if a.shared_iteration_weights else 2 * a.iterations
    per_user = 3 * branch + blocks * block + (F + 1)
    return 2 * per_user


@pytest.mark.parametrize(
    "arch",
    [{}, TINY, {**TINY, "shared_iteration_weights": False}, {"enc_channels": 7, "enc_kernel": 3, "enc_layers": 3}],
)
def test_parameter_count_closed_form(arch):
    model = build_variant("deepic", arch)
    assert model.num_parameters() == _deepic_count(model.arch)


def test_identity_interleaver_matches_plain_paths():
    K = 12
    model = _model(K=K)
    ident = Interleaver.identity(K)
    bits = SeededRng(4, "bits").bits((5, K))
    plain, _ = encode(model, bits)
    inter, _ = encode_interleaved(model, ident, bits)
    np.testing.assert_array_equal(plain, inter)
    y = SeededRng(4, "y").normal((3, 5, K))
    np.testing.assert_array_equal(decode(model, *y), decode_interleaved(model, ident, *y))


def test_interleaved_encoder_changes_only_branch_three():
    K = 12
    model = _model(K=K)
    perm = Interleaver.from_seed(K, 3)
    bits = SeededRng(5, "bits").bits((5, K))
    plain, _ = encode(model, bits)
    inter, _ = encode_interleaved(model, perm, bits)
    np.testing.assert_array_equal(plain[:, :2], inter[:, :2])
    assert not np.array_equal(plain[:, 2], inter[:, 2])
    const = np.ones((2, K), dtype=np.int8)
    np.testing.assert_array_equal(encode(model, const)[0], encode_interleaved(model, perm, const)[0])


def test_interleaver_round_trip():
    perm = Interleaver.from_seed(50, 1)
    q = SeededRng(0, "q").normal((4, 5, 50))
    np.testing.assert_array_equal(perm.interleave(perm.deinterleave(q)), q)
    np.testing.assert_array_equal(perm.deinterleave(perm.interleave(q)), q)
    with pytest.raises(ValueError):
        Interleaver(np.array([0, 0, 1]))


def test_interleaved_variant_uses_its_permutation():
    K = 12
    model = _model("deepic_interleaved", K=K)
    plain = build_variant("deepic", TINY, seed=0)
    plain.frozen_stats = model.frozen_stats
    bits = SeededRng(6, "bits").bits((3, K))
    expected, _ = encode_interleaved(plain, model.net.interleaver(K), bits)
    np.testing.assert_array_equal(encode(model, bits)[0], expected)


def test_single_iteration_decoder_runs_one_pass():
    model = _model(iterations=1)
    names = {n.split(".")[2] for n in model.decoder_param_names(1)}
    assert names == {"phi1", "phi2", "head"}
    y = SeededRng(7, "y").normal((3, 12))
    assert decode(model, *y).shape == (12,)


def test_shift_structure_in_frozen_mode():
    K, s = 40, 3
    model = _model(K=K)
    radius = model.arch.encoder_radius()
    bits = SeededRng(8, "bits").bits((4, K))
    c, _ = encode(model, bits)
    shifted, _ = encode(model, np.roll(bits, s, axis=1))
    interior = slice(radius + s, K - radius)
    np.testing.assert_allclose(
        shifted[:, :, interior], c[:, :, radius : K - radius - s], rtol=0, atol=1e-9
    )


def test_checkpoint_round_trip_is_exact():
    model = _model()
    text = dumps(model)
    back = loads(text)
    assert back.kind == model.kind and back.arch == model.arch
    for n in model.params:
        np.testing.assert_array_equal(back.params[n].data, model.params[n].data)
    for u in (1, 2):
        np.testing.assert_array_equal(back.frozen_stats[u].std, model.frozen_stats[u].std)
    assert dumps(back) == text


def test_checkpoint_round_trip_keeps_float32():
    model = _model().astype(np.float32)
    back = loads(dumps(model))
    assert all(p.data.dtype == np.float32 for p in back.params.values())
    for n in model.params:
        np.testing.assert_array_equal(back.params[n].data, model.params[n].data)


def test_checkpoint_errors():
    text = dumps(_model())
    with pytest.raises(CheckpointError, match="line 1 column"):
        loads(text[:-10])
    doc = json.loads(text)
    with pytest.raises(CheckpointError, match="format_version"):
        loads(json.dumps({**doc, "format_version": 99}))
    with pytest.raises(CheckpointError, match="expected 'rnn_ae'"):
        loads(text, expected_kind="rnn_ae")
    doc["parameters"]["u1.dec.head.b"]["shape"] = [2]
    with pytest.raises(CheckpointError, match="shape"):
        loads(json.dumps(doc))


def test_unknown_variant_and_arch_key():
    with pytest.raises(ValueError, match="unknown variant"):
        build_variant("transformer")
    with pytest.raises(ValueError, match="enc_width"):
        build_variant("deepic", {"enc_width": 3})


def test_perturbation_single_tap_encoder():
    K = 15
    model = _single_tap(_model(K=K))
    resp = perturbation_response(model, K)
    assert resp.delta.shape == (3 * K,)
    assert resp.support == [1, 1, 1]
    assert resp.peaks == [K // 2] * 3
    for i in range(3):
        assert np.count_nonzero(resp.branch(i)) == 1


def test_perturbation_support_is_shift_invariant():
    K = 40
    model = _model(K=K)
    a = perturbation_response(model, K, position=20)
    b = perturbation_response(model, K, position=21)
    assert a.support == b.support
    np.testing.assert_allclose(np.roll(a.delta.reshape(3, K), 1, axis=1), b.delta.reshape(3, K), atol=1e-9)


def test_perturbation_needs_three_positions():
    with pytest.raises(ValueError, match="K >= 3"):
        perturbation_response(_model(K=2), 2)


def test_untrained_model_is_uninformative():
    # one random init can lean either way (negating the head flips every decision),
    # so the 10^4 blocks are spread over 20 initializations
    from deepic.trainer import validate

    bers = []
    for seed in range(20):
        model = _model(K=100, seed=seed)
        point = validate(model, 3.0, 0.8, 500, SeededRng(seed, "untrained"), K=100)
        assert point.blocks == 500
        bers.append((point.ber_user1, point.ber_user2))
    mean = np.mean(bers, axis=0)
    assert np.all(np.abs(mean - 0.5) < 0.02)


def test_rnn_and_ff_share_the_interface():
    for kind in ("rnn_ae", "ff_ae", "cnn_ae"):
        model = _model(kind, K=8)
        c, _ = encode(model, np.ones((2, 8), dtype=np.int8), user=2)
        y = c + 0.0
        assert decode(model, y[:, 0], y[:, 1], y[:, 2], user=2).shape == (2, 8)


def test_ff_ae_rejects_other_lengths():
    model = _model("ff_ae", K=8)
    with pytest.raises(ValueError, match="K=8"):
        encode(model, np.zeros((2, 9)))


def test_channel_params_used_by_models_are_plain():
    # model decoding accepts channel outputs directly
    model = _model()
    c1, _ = encode(model, np.zeros((2, 12), dtype=np.int8), user=1)
    c2, _ = encode(model, np.ones((2, 12), dtype=np.int8), user=2)
    from deepic.channel import transmit

    y1, _ = transmit(c1, c2, ChannelParams(0.5, 0.0))
    assert model.posterior(1, y1).shape == (2, 12)
