"""Model assembly tests: construction determinism, parameter audits, the
degenerate equivalences between architectures, full-model gradient checks,
and checkpoint round-trips."""

import numpy as np
import pytest

from esalstm.models import (
    EsaLstmModel,
    ModelConfig,
    build_model,
    load_checkpoint,
    model_backward,
    model_forward,
    save_checkpoint,
)
from esalstm.nn import grad_check, mse_loss
from esalstm.select import SelectConfig


def cfg_for(arch, **kw):
    base = dict(hidden_dim=8, n_heads=4, window_len=10, n_input_channels=3, seed=5)
    base.update(kw)
    return ModelConfig(arch=arch, **base)


class TestBuild:
    def test_vanilla_lstm_parameter_count_audit(self):
        cfg = ModelConfig(arch="lstm", hidden_dim=30, window_len=64,
                          n_input_channels=3, seed=0)
        m = build_model(cfg)
        input_fc = 3 * 30 + 30
        gates = 4 * ((30 + 30) * 30 + 30)
        out_fc = 30 + 1
        assert m.param_count() == input_fc + gates + out_fc == 7471

    def test_same_seed_same_parameters(self):
        a = build_model(cfg_for("esa_lstm", seed=9))
        b = build_model(cfg_for("esa_lstm", seed=9))
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.value, pb.value)

    def test_different_seed_different_parameters(self):
        a = build_model(cfg_for("lstm", seed=1))
        b = build_model(cfg_for("lstm", seed=2))
        assert any(not np.array_equal(pa.value, pb.value)
                   for pa, pb in zip(a.parameters(), b.parameters()))

    def test_d_model_rounds_up_to_head_multiple(self):
        cfg = ModelConfig(arch="esa_lstm", hidden_dim=30, n_heads=8)
        assert cfg.d_model == 32
        cfg = ModelConfig(arch="esa_lstm", hidden_dim=16, n_heads=8)
        assert cfg.d_model == 16

    def test_projections_only_when_widths_differ(self):
        narrow = build_model(cfg_for("esa_lstm", hidden_dim=8, n_heads=4))
        assert narrow.pre_proj is None and narrow.route.out_proj is None
        wide = build_model(cfg_for("esa_lstm", hidden_dim=30, n_heads=8))
        assert wide.pre_proj is not None and wide.route.out_proj is not None

    def test_invalid_arch(self):
        with pytest.raises(ValueError, match="unknown arch"):
            build_model(ModelConfig(arch="transformer"))

    def test_param_count_is_pure_function_of_config(self):
        c1 = cfg_for("esa_lstm", seed=1)
        c2 = cfg_for("esa_lstm", seed=77)
        assert build_model(c1).param_count() == build_model(c2).param_count()


class TestForward:
    def test_zero_weights_pass_output_bias(self):
        for arch in ("esa_lstm", "lstm", "cascaded_lstm", "fcnn"):
            m = build_model(cfg_for(arch))
            for p in m.parameters():
                p.value[...] = 0.0
            m.out_fc.b.value[...] = 0.7
            assert m.forward(np.zeros((10, 3))) == pytest.approx(0.7, abs=1e-15)

    def test_shape_validation(self):
        m = build_model(cfg_for("lstm"))
        with pytest.raises(ValueError, match="does not match"):
            m.forward(np.zeros((9, 3)))
        with pytest.raises(ValueError, match="does not match"):
            m.forward(np.zeros((10, 4)))

    def test_non_finite_input_rejected(self):
        m = build_model(cfg_for("lstm"))
        w = np.zeros((10, 3))
        w[3, 1] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            m.forward(w)

    def test_prediction_is_deterministic(self):
        rng = np.random.default_rng(0)
        m = build_model(cfg_for("esa_lstm"))
        w = rng.standard_normal((10, 3))
        assert m.forward(w) == m.forward(w)

    def test_lstm_family_is_order_sensitive(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal((10, 3))
        for arch in ("lstm", "esa_lstm", "cascaded_lstm"):
            m = build_model(cfg_for(arch))
            assert m.forward(w) != m.forward(w[::-1].copy())

    def test_fcnn_flatten_convention_is_row_major(self):
        rng = np.random.default_rng(2)
        m = build_model(cfg_for("fcnn", fcnn_depth=4))
        w = rng.standard_normal((10, 3))
        a = w.reshape(1, -1)    # row major: sample-by-sample, channels adjacent
        for lin, _ in m.hidden:
            a = np.tanh(a @ lin.W.value + lin.b.value)
        manual = float((a @ m.out_fc.W.value + m.out_fc.b.value)[0, 0])
        assert m.forward(w) == pytest.approx(manual, abs=1e-12)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(3)
        for arch in ("esa_lstm", "lstm", "fcnn"):
            m = build_model(cfg_for(arch))
            ws = rng.standard_normal((6, 10, 3))
            batch = m.forward_batch(ws)
            singles = np.array([m.forward(w) for w in ws])
            np.testing.assert_allclose(batch, singles, atol=1e-12)


class TestDegenerateEquivalences:
    def test_full_selection_equals_vanilla_lstm(self):
        # needs hidden_dim divisible by n_heads so no projections intervene
        esa = build_model(cfg_for("esa_lstm", hidden_dim=16, n_heads=8,
                                  select=SelectConfig(ratio=1.0), seed=11))
        van = build_model(cfg_for("lstm", hidden_dim=16, n_heads=8, seed=11))
        rng = np.random.default_rng(4)
        for _ in range(20):
            w = rng.standard_normal((10, 3))
            assert esa.forward(w) == van.forward(w)

    def test_no_selection_equals_two_fc_path(self):
        esa = build_model(cfg_for("esa_lstm", hidden_dim=16, n_heads=8,
                                  select=SelectConfig(ratio=0.0), seed=12))
        assert isinstance(esa, EsaLstmModel)
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = rng.standard_normal((10, 3))
            pred = esa.forward(w)
            a = esa.input_fc.forward(w[None])
            y = esa.pe.add(a, np.arange(10))
            manual = float(esa.out_fc.forward(y[:, -1, :])[0, 0])
            assert pred == manual

    def test_cascaded_one_layer_equals_vanilla(self):
        casc = build_model(cfg_for("cascaded_lstm", lstm_layers=1, seed=13))
        van = build_model(cfg_for("lstm", seed=13))
        rng = np.random.default_rng(6)
        w = rng.standard_normal((10, 3))
        assert casc.forward(w) == van.forward(w)

    def test_cascaded_two_layers_differ_from_vanilla(self):
        casc = build_model(cfg_for("cascaded_lstm", lstm_layers=2, seed=13))
        van = build_model(cfg_for("lstm", seed=13))
        w = np.random.default_rng(7).standard_normal((10, 3))
        assert casc.forward(w) != van.forward(w)


def model_loss_fn(m, w, target):
    def loss_fn():
        m.zero_grads()
        pred = m.forward_batch(w)
        loss, dpred = mse_loss(pred, target)
        m.backward_batch(dpred)
        return loss
    return loss_fn


class TestGradients:
    def test_zero_upstream_gives_zero_grads(self):
        m = build_model(cfg_for("esa_lstm"))
        m.zero_grads()
        m.forward(np.random.default_rng(8).standard_normal((10, 3)))
        model_backward(m, 0.0)
        for p in m.parameters():
            np.testing.assert_array_equal(p.grad, 0.0)

    @pytest.mark.parametrize("arch,kw", [
        ("lstm", {}),
        ("cascaded_lstm", {"lstm_layers": 2, "hidden_dim": 4, "window_len": 6}),
        ("fcnn", {"fcnn_depth": 4, "hidden_dim": 6, "window_len": 8}),
        ("esa_lstm", {"hidden_dim": 8, "n_heads": 8, "window_len": 8,
                      "select": SelectConfig(ratio=3 / 8)}),
        ("esa_lstm", {"hidden_dim": 6, "n_heads": 4, "window_len": 8,
                      "select": SelectConfig(ratio=0.5)}),   # with projections
        ("esa_lstm", {"hidden_dim": 4, "n_heads": 4, "window_len": 6,
                      "select": SelectConfig(ratio=0.5, mode="gate")}),
    ])
    def test_full_model_matches_finite_differences(self, arch, kw):
        rng = np.random.default_rng(9)
        m = build_model(cfg_for(arch, **kw))
        L = m.config.window_len
        w = rng.standard_normal((1, L, 3))
        target = rng.standard_normal(1)
        assert grad_check(model_loss_fn(m, w, target), m.parameters(), eps=1e-5) < 1e-4

    def test_lstm_grads_insensitive_to_non_selected_inputs(self):
        rng = np.random.default_rng(10)
        m = build_model(cfg_for("esa_lstm", hidden_dim=8, n_heads=4,
                                select=SelectConfig(ratio=0.3)))
        w = rng.standard_normal((1, 10, 3))
        target = np.array([0.2])
        loss_fn = model_loss_fn(m, w, target)
        loss_fn()
        selected = set(m.last_selection[0].tolist())
        grads_before = [p.grad.copy() for p in m.lstm_parameters()]
        # perturb a non-selected, non-final row
        outside = [j for j in range(10) if j not in selected and j != 9]
        w2 = w.copy()
        w2[0, outside[0]] += 1e-4
        loss_fn2 = model_loss_fn(m, w2, target)
        loss_fn2()
        assert set(m.last_selection[0].tolist()) == selected   # unchanged choice
        for p, g in zip(m.lstm_parameters(), grads_before):
            np.testing.assert_array_equal(p.grad, g)


class TestCheckpoint:
    @pytest.mark.parametrize("arch", ["esa_lstm", "lstm", "cascaded_lstm", "fcnn"])
    def test_round_trip_is_value_exact(self, arch, tmp_path):
        m = build_model(cfg_for(arch, seed=21))
        # make values non-trivial
        rng = np.random.default_rng(22)
        for p in m.parameters():
            p.value += rng.standard_normal(p.value.shape) * 0.37
        path = tmp_path / "ckpt.txt"
        save_checkpoint(m, path, extras={"note": "test"})
        loaded, extras = load_checkpoint(path)
        assert extras["note"] == "test"
        assert loaded.config == m.config
        for pa, pb in zip(m.parameters(), loaded.parameters()):
            assert pa.name == pb.name
            np.testing.assert_array_equal(pa.value, pb.value)
        w = rng.standard_normal((10, 3))
        assert model_forward(m, w) == model_forward(loaded, w)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("not a checkpoint\n")
        with pytest.raises(ValueError, match="not a recognized"):
            load_checkpoint(path)
