"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

The optional full-scale trend check (criterion 8) runs only when the
environment variable DEEPIC_LONG is set.
"""

import csv
import io
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from deepic import cli
from deepic import evalbench as eb
from deepic import trainer as tr
from deepic.channel import ChannelParams, SeededRng, draw_noise, transmit
from deepic.classic import ConvCode, bcjr_decode, conv_encode, make_baseline, viterbi_decode
from deepic.ndgrad import AdamState, precision
from deepic.neural import build_variant, encode

import gradcases
import oracles

TINY = dict(enc_channels=4, dec_channels=4, dec_layers=2, iterations=2)


def _tiny_cfg(**kw):
    base = dict(K=8, epochs=1, batch_size=6, enc_steps=3, dec_steps=4, arch=TINY, val_blocks=20, lr=1e-2)
    return tr.TrainConfig(**{**base, **kw})


def _state(cfg):
    return tr.TrainState(cfg.alpha, AdamState(lr=cfg.lr), AdamState(lr=cfg.lr))


def test_criterion_1_autodiff(acceptance):
    start = time.perf_counter()
    worst = {name: gradcases.worst_error(name, instances=10) for name in sorted(gradcases.CASES)}
    elapsed = time.perf_counter() - start
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = err < 1e-4 and elapsed < 60
    acceptance.record(1, ok, f"{len(worst)} ops x 10 instances, worst rel. err {err:.2e} ({name}), {elapsed:.1f}s")
    assert ok


def test_criterion_2_oracle_equivalence(acceptance):
    start = time.perf_counter()
    K = 8
    rng = np.random.default_rng(20)

    gens = (13, 15, 17)
    code = ConvCode(gens, terminated=True)
    msgs, book = oracles.codebook(gens, K)
    sent = msgs[rng.integers(0, len(msgs), 1000)]
    r = 2.0 * conv_encode(code, sent) - 1.0 + 0.9 * rng.normal(size=(1000, book.shape[1]))
    mismatches = int(np.sum(np.any(viterbi_decode(code, r) != oracles.brute_force_ml(msgs, book, r), axis=1)))

    worst = 0.0
    for terminated in (True, False):
        rsc = ConvCode((13, 15), recursive=True, terminated=terminated)
        msgs, book = oracles.codebook((13, 15), K, recursive=True, terminate=terminated)
        sent = msgs[rng.integers(0, len(msgs), 300)]
        lc = 2.0 * (2.0 * conv_encode(rsc, sent) - 1.0 + rng.normal(size=(300, book.shape[1])))
        la = rng.normal(scale=1.5, size=(300, K))
        post, _ = bcjr_decode(rsc, lc, la)
        worst = max(worst, float(np.max(np.abs(post - oracles.brute_force_map(msgs, book, lc, la)))))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and worst < 1e-8 and elapsed < 300
    acceptance.record(
        2, ok, f"Viterbi mismatches {mismatches}/1000, BCJR max |dLLR| {worst:.1e} at K=8, {elapsed:.1f}s"
    )
    assert ok


def test_criterion_3_channel_statistics(acceptance):
    params = ChannelParams(0.8, 0.7)
    z1, z2 = draw_noise(SeededRng(30, "noise"), (10**6,), params)
    var_err = max(abs(z.var() / params.sigma**2 - 1.0) for z in (z1, z2))

    point = eb.estimate_ber(
        make_baseline("uncoded", 100), ChannelParams(0.0, 1.0), stop=eb.StoppingRule(10**9, 10_000, 1000),
        rng=SeededRng(31, "q"),
    )
    q, n = oracles.q_function(1.0), point.blocks * 100
    z_scores = [abs(b - q) / math.sqrt(q * (1 - q) / n) for b in (point.ber_user1, point.ber_user2)]

    c1, c2 = SeededRng(32, "c").normal((2, 50, 3, 20))
    y1, y2 = transmit(c1, c2, ChannelParams(0.8, 0.0))
    exact = np.array_equal(y1, c1 + 0.8 * c2) and np.array_equal(y2, 0.8 * c1 + c2)

    ok = var_err < 0.01 and max(z_scores) < 3 and exact
    acceptance.record(
        3, ok, f"noise var rel. err {var_err:.1e}; uncoded BER {point.ber_avg:.4f} vs Q(1)={q:.4f} "
        f"(max {max(z_scores):.2f} SE); zero-noise exact: {exact}"
    )
    assert ok


def test_criterion_4_normalization(acceptance):
    model = build_variant("deepic", {}, seed=0)
    bits = SeededRng(40, "bits").bits((500, 100))
    worst_mean = worst_var = 0.0
    for user in (1, 2):
        codes, _ = model.encode(user, bits, mode="batch")
        for branch in range(3):
            vals = codes.data[:, branch, :]
            worst_mean = max(worst_mean, abs(vals.mean()))
            worst_var = max(worst_var, abs(vals.var() - 1.0))

    model.calibrate(SeededRng(41, "calibrate"), 100, 500)
    worst_gap = 0.0
    for user in (1, 2):
        full, _ = encode(model, bits, user)
        for j in range(500):
            single, _ = encode(model, bits[j : j + 1], user)
            worst_gap = max(worst_gap, float(np.max(np.abs(single[0] - full[j]))))
    y = SeededRng(42, "y").normal((500, 3, 100))
    post = model.posterior(1, y)
    post_gap = max(float(np.max(np.abs(model.posterior(1, y[j : j + 1])[0] - post[j]))) for j in range(0, 500, 50))

    ok = worst_mean < 1e-6 and worst_var < 1e-5 and worst_gap < 1e-9 and post_gap < 1e-9
    acceptance.record(
        4, ok, f"|mean| {worst_mean:.1e}, |var-1| {worst_var:.1e}; frozen batch 1 vs 500: "
        f"codewords {worst_gap:.1e}, posteriors {post_gap:.1e}"
    )
    assert ok


def test_criterion_5_training_loop(acceptance, monkeypatch):
    # phase isolation: snapshot at the first decoder step
    cfg = _tiny_cfg()
    model = build_variant("deepic", TINY, seed=0)
    enc, dec = model.encoder_param_names(), model.decoder_param_names()
    before = {n: model.params[n].data.copy() for n in enc + dec}
    boundary = {}
    original = tr.step_stream

    def spy(seed, epoch, phase, step):
        if phase == "dec" and step == 0 and not boundary:
            boundary.update({n: model.params[n].data.copy() for n in enc + dec})
        return original(seed, epoch, phase, step)

    monkeypatch.setattr(tr, "step_stream", spy)
    records, _ = tr.train_epoch(model, cfg, 0, _state(cfg))
    monkeypatch.undo()
    isolated = (
        all(np.array_equal(boundary[n], before[n]) for n in dec)
        and all(np.array_equal(model.params[n].data, boundary[n]) for n in enc)
        and any(not np.array_equal(boundary[n], before[n]) for n in enc)
    )

    alpha_err = max(abs(r.alpha - r.L1 / (r.L1 + r.L2)) for r in records)

    rng = SeededRng(50, "batch")
    z = rng.child("z").normal((2, 6, 3, 8), scale=0.5)
    b1, b2 = rng.child("b1").bits((6, 8)), rng.child("b2").bits((6, 8))
    names = enc + dec
    fresh = build_variant("deepic", TINY, seed=2)

    def grads(a1, a2):
        L1, L2 = tr.compute_losses(fresh, b1, b2, z[0], z[1], 0.8)
        for p in fresh.params.values():
            p.grad = None
        (a1 * L1 + a2 * L2).backward()
        return [np.zeros_like(fresh.params[n].data) if fresh.params[n].grad is None else fresh.params[n].grad for n in names]

    g1, g2 = grads(1.0, 0.0), grads(0.0, 1.0)
    L1, L2 = tr.compute_losses(fresh, b1, b2, z[0], z[1], 0.8)
    combined = tr.weighted_gradients(fresh, L1, L2, 0.3, names)
    identity_err = max(float(np.max(np.abs(c - (0.3 * a + 0.7 * b)))) for c, a, b in zip(combined, g1, g2))

    defaults = tr.TrainConfig()
    counting = _tiny_cfg(K=6, batch_size=2, enc_steps=defaults.enc_steps, dec_steps=defaults.dec_steps,
                         arch=dict(TINY, iterations=1, dec_layers=1))
    log, _ = tr.train_epoch(build_variant("deepic", counting.arch_config), counting, 0, _state(counting))
    rows = list(csv.DictReader(io.StringIO(tr.TrainHistory(log).to_csv())))
    counts = (sum(r["phase"] == "enc" for r in rows), sum(r["phase"] == "dec" for r in rows))
    ordered = [r["phase"] for r in rows] == ["enc"] * counts[0] + ["dec"] * counts[1]

    ok = isolated and alpha_err < 1e-12 and identity_err < 1e-10 and counts == (100, 500) and ordered
    acceptance.record(
        5, ok, f"phase isolation bitwise: {isolated}; alpha err {alpha_err:.1e}; weighted-gradient err "
        f"{identity_err:.1e}; logged steps enc/dec {counts[0]}/{counts[1]}"
    )
    assert ok


def test_criterion_6_baselines(acceptance):
    start = time.perf_counter()
    K, snrs = 100, [0.0, 1.0, 2.0, 3.0, 4.0]
    stop = eb.StoppingRule(min_errors=100, max_blocks=2000, batch_blocks=500)
    turbo = eb.sweep(eb.SweepSpec("turbo_p2p", [0.0], snrs, K, stop, seed=60), make_baseline("turbo_p2p", K))
    uncoded = eb.sweep(eb.SweepSpec("uncoded", [0.0], snrs, K, stop, seed=60), make_baseline("uncoded", K))
    below = all(t.ber_avg + t.ci95 < u.ber_avg - u.ci95 for t, u in zip(turbo, uncoded))
    monotone = all(b.ber_avg <= a.ber_avg + a.ci95 + b.ci95 for a, b in zip(turbo, turbo[1:]))

    # coded errors come in bursts, so agreement is judged with block-level standard errors
    td_agree = tin_agree = True
    for snr in (0.0, 2.0):
        td = [
            eb.block_error_counts(make_baseline("td", K), ChannelParams.from_snr(h, snr), K, 2000, SeededRng(61, f"td{h}/{snr}"))
            for h in (0.3, 0.8)
        ]
        td_agree &= oracles.block_level_agree(td[0].mean(axis=1), td[1].mean(axis=1), K)
    for snr in (0.0, 1.0):
        params = ChannelParams.from_snr(0.0, snr)
        tin = eb.block_error_counts(make_baseline("tin", K), params, K, 2000, SeededRng(62, f"tin/{snr}"))
        p2p = eb.block_error_counts(make_baseline("turbo_p2p", K), params, K, 2000, SeededRng(63, f"p2p/{snr}"))
        tin_agree &= oracles.block_level_agree(tin.mean(axis=1), p2p.mean(axis=1), K)
    elapsed = time.perf_counter() - start

    ok = below and monotone and td_agree and tin_agree and elapsed < 1800
    curve = ", ".join(f"{t.ber_avg:.1e}" for t in turbo)
    acceptance.record(
        6, ok, f"turbo p2p BER 0-4 dB [{curve}] below uncoded: {below}, non-increasing: {monotone}; "
        f"TD h-independent: {td_agree}; TIN(h=0) = p2p: {tin_agree}; {elapsed:.0f}s"
    )
    assert ok


SMOKE = dict(K=30, h=0.8, epochs=10, enc_steps=25, dec_steps=100, batch_size=200, lr=1e-4,
             arch=dict(enc_channels=32, dec_channels=32), dtype="float32", val_blocks=500)


@pytest.mark.slow
def test_criterion_7_smoke_training(acceptance):
    cfg = tr.TrainConfig(**SMOKE)
    start = time.perf_counter()
    result = tr.train(cfg)
    first, last = result.history.epoch_mean_loss(0), result.history.epoch_mean_loss(cfg.epochs - 1)
    with precision(np.float32):
        untrained = build_variant(cfg.variant, cfg.arch_config, cfg.seed)
        untrained.astype(np.float32)
        untrained.calibrate(SeededRng(70, "calibrate"), cfg.K, 1000)
        ber0 = tr.validate(untrained, 6.0, cfg.h, 2000, SeededRng(71, "smoke-6db"), cfg.K).ber_avg
        ber1 = tr.validate(result.last, 6.0, cfg.h, 2000, SeededRng(71, "smoke-6db"), cfg.K).ber_avg
    elapsed = time.perf_counter() - start
    ok = last < 0.7 * first and ber1 < 0.25 * ber0 and elapsed < 7200
    acceptance.record(
        7, ok, f"epoch loss {first:.4f} -> {last:.4f} (ratio {last / first:.3f}); BER at 6 dB untrained {ber0:.4f}, "
        f"trained {ber1:.2e} (ratio {ber1 / ber0:.3f}); {elapsed / 60:.0f} min"
    )
    assert ok


def _long_config(h):
    epochs = int(os.environ.get("DEEPIC_LONG_EPOCHS", "100"))
    return tr.TrainConfig(K=100, h=h, epochs=epochs, seed=80)


@pytest.mark.long
def test_criterion_8_full_scale_trends(acceptance):
    if not os.environ.get("DEEPIC_LONG"):
        acceptance.record(8, None, "optional full-scale run; set DEEPIC_LONG=1 to enable")
        pytest.skip("set DEEPIC_LONG=1 to run the full-scale trend check")
    snrs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    stop = eb.StoppingRule(min_errors=100, max_blocks=20_000)
    curves = {}
    for h in (0.8, 0.3):
        model = tr.train(_long_config(h)).best
        curves[h] = {
            name: eb.sweep(eb.SweepSpec(name, [h], snrs, 100, stop, seed=81), scheme)
            for name, scheme in (
                ("deepic", eb.NeuralScheme(model, 100)),
                ("tin", make_baseline("tin", 100)),
                ("td", make_baseline("td", 100)),
            )
        }
    c = curves[0.8]
    beats = [d.ber_avg < min(t.ber_avg, s.ber_avg) for d, t, s in zip(c["deepic"], c["tin"], c["td"])]
    run = best_run = 0
    for b in beats:
        run = run + 1 if b else 0
        best_run = max(best_run, run)
    weak = curves[0.3]["tin"][-1].ber_avg <= curves[0.3]["deepic"][-1].ber_avg + curves[0.3]["deepic"][-1].ci95
    ok = best_run >= 3 and weak
    acceptance.record(
        8, ok, f"h=0.8: DeepIC below TIN and TD at {best_run} consecutive SNRs; h=0.3: TIN <= DeepIC at 6 dB: {weak}"
    )
    assert ok


def _run_all(root: Path, config: str):
    common = ["--config", config]
    ckpt = str(root / "train" / "checkpoint.json")
    commands = [
        ["train", *common, "--out", str(root / "train")],
        ["eval", *common, "--checkpoint", ckpt, "--out", str(root / "eval")],
        ["baseline", "tin", *common, "--out", str(root / "tin")],
        ["baseline", "td", *common, "--out", str(root / "td")],
        ["perturb", *common, "--checkpoint", ckpt, "--out", str(root / "perturb")],
        ["blocklength", *common, "--out", str(root / "blocklength")],
    ]
    return [cli.main(argv) for argv in commands]


def test_criterion_9_reproducibility(acceptance, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(
        '{"seed": 9, "channel": {"h": 0.8, "snr_db": [0.0, 2.0]},'
        ' "code": {"K": 12, "arch": {"enc_channels": 4, "dec_channels": 4, "dec_layers": 2, "iterations": 2}},'
        ' "training": {"epochs": 2, "batch_size": 8, "enc_steps": 2, "dec_steps": 3, "val_blocks": 20, "dtype": "float64"},'
        ' "evaluation": {"min_errors": 5, "max_blocks": 60, "batch_blocks": 20},'
        ' "blocklength": {"lengths": [10, 12]}}'
    )
    codes = [_run_all(tmp_path / name, str(config)) for name in ("first", "second")]
    a, b = tmp_path / "first", tmp_path / "second"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.suffix == ".csv" or "checkpoint" in str(p.relative_to(a)))
    files = [f for f in files if (a / f).is_file()]
    same = all((a / f).read_bytes() == (b / f).read_bytes() for f in files)
    csvs = sum(f.suffix == ".csv" for f in files)
    ok = codes[0] == codes[1] == [0] * 6 and same and csvs >= 6
    acceptance.record(9, ok, f"{len(files)} artifacts ({csvs} CSVs) byte-identical across reruns: {same}")
    assert ok
