import numpy as np
import pytest
from dataclasses import replace

from ceq.modem import SymbolFrame
from ceq.neuraleq import (
    ARCH_BILSTM,
    ARCH_DEEP_CNN,
    EqArch,
    EvalSet,
    TrainConfig,
    adam_init,
    adam_step,
    build_model,
    evaluate_model_q,
    history_to_csv,
    make_windows,
    train,
    transfer_fit,
)


class TestAdam:
    def test_first_step_bias_corrected(self):
        params = {"w": np.array([1.0])}
        state = adam_init(params)
        adam_step(params, {"w": np.array([1.0])}, state, lr=5e-4, t=1)
        assert params["w"][0] == pytest.approx(1.0 - 5e-4 / (1.0 + 1e-8), rel=1e-9)

    def test_zero_gradient_no_change(self):
        params = {"w": np.array([2.5])}
        state = adam_init(params)
        adam_step(params, {"w": np.array([0.0])}, state, lr=5e-4, t=1)
        assert params["w"][0] == 2.5

    def test_two_steps_match_hand_trace(self):
        # arbitrary-precision trace of two updates with constant g = 1
        from mpmath import mp, mpf, sqrt

        mp.dps = 40
        lr, b1, b2, eps = mpf("0.0005"), mpf("0.9"), mpf("0.999"), mpf("1e-8")
        w = mpf(1)
        m = v = mpf(0)
        for t in (1, 2):
            m = b1 * m + (1 - b1) * 1
            v = b2 * v + (1 - b2) * 1
            w -= lr * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)
        params = {"w": np.array([1.0])}
        state = adam_init(params)
        for t in (1, 2):
            adam_step(params, {"w": np.array([1.0])}, state, lr=5e-4, t=t)
        assert params["w"][0] == pytest.approx(float(w), rel=1e-12)

    def test_non_finite_gradient_rejected(self):
        params = {"w": np.array([1.0])}
        state = adam_init(params)
        with pytest.raises(FloatingPointError):
            adam_step(params, {"w": np.array([np.nan])}, state, lr=1e-3, t=1)

    def test_invalid_timestep(self):
        params = {"w": np.array([1.0])}
        with pytest.raises(ValueError):
            adam_step(params, {"w": np.array([1.0])}, adam_init(params), lr=1e-3, t=0)


def _toy_problem(seed=77, n=4096, isi=0.3):
    """Noiseless linear toy channel: one-tap ISI on both polarizations."""
    frame = SymbolFrame.generate(seed, n)
    rx_x = frame.tx_x + isi * np.roll(frame.tx_x, 1)
    rx_y = frame.tx_y + isi * np.roll(frame.tx_y, 1)
    return frame, rx_x, rx_y


class TestTrain:
    def test_loss_strictly_decreases_on_toy_channel(self):
        frame, rx_x, rx_y = _toy_problem()
        arch = EqArch(kind=ARCH_DEEP_CNN)
        windows = make_windows(rx_x, rx_y, frame.tx_x, arch)[:2]
        val = EvalSet(rx_x, rx_y, frame.tx_x, frame.bits_x, False)
        cfg = TrainConfig(epochs=10, pool_size=4096, epoch_subset=4096, batch=32, seed=1)
        _, hist = train(build_model(arch, 2), windows, val, cfg)
        losses = [l for _, l, _ in hist]
        assert len(losses) == 10
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_zero_epochs_returns_initial_model(self):
        frame, rx_x, rx_y = _toy_problem(n=256)
        arch = EqArch(kind=ARCH_DEEP_CNN)
        windows = make_windows(rx_x, rx_y, frame.tx_x, arch)[:2]
        val = EvalSet(rx_x, rx_y, frame.tx_x, frame.bits_x, False)
        cfg = TrainConfig(epochs=0, pool_size=256, epoch_subset=256, batch=4, seed=1)
        model = build_model(arch, 2)
        before = {k: v.copy() for k, v in model.params.items()}
        out, hist = train(model, windows, val, cfg)
        assert hist == []
        for name in before:
            assert np.array_equal(out.params[name], before[name])

    def test_bit_identical_trajectories_with_same_seed(self):
        frame, rx_x, rx_y = _toy_problem(n=1024)
        arch = EqArch(kind=ARCH_BILSTM)
        windows = make_windows(rx_x, rx_y, frame.tx_x, arch)[:2]
        val = EvalSet(rx_x, rx_y, frame.tx_x, frame.bits_x, False)
        cfg = TrainConfig(epochs=3, pool_size=1024, epoch_subset=512, batch=4, seed=9)
        m1, h1 = train(build_model(arch, 3), windows, val, cfg)
        m2, h2 = train(build_model(arch, 3), windows, val, cfg)
        assert h1 == h2
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])

    def test_one_pol_symmetry(self):
        # training for pol Y with swapped channels == training for pol X on
        # the pol-relabeled dataset, trajectories bit-identical
        frame, rx_x, rx_y = _toy_problem(n=1024)
        arch = EqArch(kind=ARCH_DEEP_CNN)
        cfg = TrainConfig(epochs=3, pool_size=1024, epoch_subset=512, batch=8, seed=4)

        win_y = make_windows(rx_x, rx_y, frame.tx_y, arch, swap=True)[:2]
        val_y = EvalSet(rx_x, rx_y, frame.tx_y, frame.bits_y, True)
        _, hist_y = train(build_model(arch, 5), win_y, val_y, cfg)

        win_rel = make_windows(rx_y, rx_x, frame.tx_y, arch, swap=False)[:2]
        val_rel = EvalSet(rx_y, rx_x, frame.tx_y, frame.bits_y, False)
        _, hist_rel = train(build_model(arch, 5), win_rel, val_rel, cfg)
        assert hist_y == hist_rel

    def test_empty_pool_rejected(self):
        arch = EqArch(kind=ARCH_DEEP_CNN)
        val = EvalSet(np.ones(81, complex), np.ones(81, complex), np.ones(81, complex),
                      np.zeros(4 * 81, np.uint8), False)
        cfg = TrainConfig(epochs=1, pool_size=81, epoch_subset=81, batch=1)
        with pytest.raises(ValueError):
            train(build_model(arch, 0), (np.empty((0, 81, 4)), np.empty((0, 61, 2))), val, cfg)


class TestTransferFit:
    @staticmethod
    @pytest.fixture(scope="class")
    def trained():
        frame, rx_x, rx_y = _toy_problem()
        arch = EqArch(kind=ARCH_DEEP_CNN)
        windows = make_windows(rx_x, rx_y, frame.tx_x, arch)[:2]
        val = EvalSet(rx_x, rx_y, frame.tx_x, frame.bits_x, False)
        cfg = TrainConfig(epochs=25, pool_size=4096, epoch_subset=4096, batch=32, seed=1)
        model, _ = train(build_model(arch, 2), windows, val, cfg)
        return model, val, cfg

    def test_zero_epochs_is_identity(self, trained):
        model, val, cfg = trained
        frame, rx_x, rx_y = _toy_problem(seed=78)
        arch = model.arch
        windows = make_windows(rx_x, rx_y, frame.tx_x, arch)[:2]
        out, hist = transfer_fit(model, windows, val, replace(cfg, epochs=0), max_epochs=0)
        assert hist == []
        for name in model.params:
            assert np.array_equal(out.params[name], model.params[name])

    def test_history_capped_at_five_epochs(self, trained):
        model, val, cfg = trained
        frame, rx_x, rx_y = _toy_problem(seed=79, isi=0.35)
        windows = make_windows(rx_x, rx_y, frame.tx_x, model.arch)[:2]
        new_val = EvalSet(rx_x, rx_y, frame.tx_x, frame.bits_x, False)
        _, hist = transfer_fit(model, windows, new_val, replace(cfg, epochs=50))
        assert len(hist) <= 5

    def test_never_degrades_starting_q(self, trained):
        # adapting on mismatched data must keep the best-so-far weights
        model, val, cfg = trained
        start_q = evaluate_model_q(model, val)
        rng = np.random.default_rng(0)
        junk_x = rng.standard_normal(2048) + 1j * rng.standard_normal(2048)
        junk_y = rng.standard_normal(2048) + 1j * rng.standard_normal(2048)
        frame, _, _ = _toy_problem(seed=80, n=2048)
        windows = make_windows(junk_x, junk_y, frame.tx_x, model.arch)[:2]
        fitted, _ = transfer_fit(model, windows, val, replace(cfg, epochs=5))
        assert evaluate_model_q(fitted, val) >= start_q - 0.05


def test_history_csv_format():
    text = history_to_csv([(0, 0.5, 1.25), (1, 0.25, 2.5)])
    lines = text.strip().split("\n")
    assert lines[0] == "epoch,loss,val_q_db"
    assert lines[1].startswith("0,5.0")
    assert len(lines) == 3
