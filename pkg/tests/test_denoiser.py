"""
Tests for patchification, the denoiser network and its checkpoints.
"""

from __future__ import annotations

import struct
from dataclasses import replace

import numpy as np
import pytest

from src.hoidiff.config import CONFIGS_DIR
from src.hoidiff.config import load_run_config
from src.hoidiff.core import HoiImage
from src.hoidiff.core import project_to_valid
from src.hoidiff.core import slice_softmax
from src.hoidiff.denoiser import Conditioning
from src.hoidiff.denoiser import Denoiser
from src.hoidiff.denoiser import DenoiserConfig
from src.hoidiff.denoiser import count_parameters
from src.hoidiff.denoiser import decode_checkpoint
from src.hoidiff.denoiser import encode_checkpoint
from src.hoidiff.denoiser import load_checkpoint
from src.hoidiff.denoiser import patch_groups
from src.hoidiff.denoiser import save_checkpoint
from src.hoidiff.denoiser import sinusoidal_embedding
from src.hoidiff.denoiser import slice_patchify
from src.hoidiff.errors import CheckpointError
from src.hoidiff.errors import ConfigError
from src.hoidiff.errors import MissingCacheError
from src.hoidiff.errors import NonFiniteError
from src.hoidiff.errors import ShapeMismatchError
from src.hoidiff.errors import StepOverflowError
from src.hoidiff.models import PatchMode
from src.hoidiff.nn.parameters import ParameterStore
from tests.conftest import TINY_D_A
from tests.conftest import TINY_H
from tests.conftest import TINY_STEPS
from tests.conftest import TINY_W
from tests.conftest import pass_through_model

FD_STEP = 1e-5


def random_batch(
    rng: np.random.Generator,
    b: int = 2,
    config: DenoiserConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, w, d_a, n_steps = (
        (config.h, config.w, config.d_a, config.steps)
        if config
        else (TINY_H, TINY_W, TINY_D_A, TINY_STEPS)
    )
    x = slice_softmax(rng.normal(size=(b, h, w, 2)))
    appearance = rng.normal(size=(b, d_a))
    steps = rng.integers(1, n_steps + 1, size=b)
    return x, appearance, steps


def gradient_check(
    model: Denoiser,
    rng: np.random.Generator,
    init: np.ndarray | None = None,
    per_param: int = 2,
) -> None:
    """Compare backward() against central differences on sampled entries."""
    x, appearance, steps = random_batch(rng, config=model.config)
    weights = rng.normal(size=x.shape)

    model.params.zero_grad()
    model.forward(x, appearance, steps, init)
    model.backward(weights)

    def loss() -> float:
        out = model.forward(x, appearance, steps, init, cache=False)
        return float((out * weights).sum())

    for name, param in model.params:
        flat = param.value.reshape(-1)
        grads = param.grad.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_param, flat.size), replace=False)
        for i in picks:
            original = flat[i]
            flat[i] = original + FD_STEP
            plus = loss()
            flat[i] = original - FD_STEP
            minus = loss()
            flat[i] = original
            numeric = (plus - minus) / (2 * FD_STEP)
            np.testing.assert_allclose(
                grads[i], numeric, rtol=1e-4, atol=1e-7, err_msg=f"{name}[{i}]"
            )


class TestPatchify:
    """Tests for slice patchification and patch groups."""

    def test_patch_counts(self):
        """Test that an H x W image yields H + W slice patches."""
        assert slice_patchify(np.full((5, 6, 2), 1 / 10)).count == 11
        assert slice_patchify(np.full((1, 1, 2), 0.5)).count == 2
        config = DenoiserConfig(h=5, w=6, d_a=2, steps=3, d_model=8, heads=2, d_step=4)
        assert config.tokens == 11

    def test_slice_contents(self, rng):
        """Test that slice patches are the image rows and columns."""
        data = rng.uniform(size=(4, 3, 2))
        patches = slice_patchify(HoiImage(data))
        np.testing.assert_array_equal(patches.horizontal[2], data[2])
        np.testing.assert_array_equal(patches.vertical[1], data[:, 1])
        np.testing.assert_array_equal(patches.depatchify(), data)

    def test_not_an_image(self):
        """Test that arrays without a trailing pair axis are rejected."""
        with pytest.raises(ShapeMismatchError):
            slice_patchify(np.zeros((3, 4)))

    @pytest.mark.parametrize(
        "mode,tokens",
        [
            (PatchMode.SLICE, [5, 3]),
            (PatchMode.HORIZONTAL, [5]),
            (PatchMode.VERTICAL, [3]),
            (PatchMode.LOCAL, [6]),
        ],
    )
    def test_group_tokens(self, mode, tokens):
        """Test token counts of each patch mode on a 5 x 3 grid."""
        groups = patch_groups(mode, 5, 3, local_patch=2)
        assert [g.tokens for g in groups] == tokens

    @pytest.mark.parametrize("mode", list(PatchMode))
    def test_assemble_inverts_extract(self, mode, rng):
        """Test that every group covers each pixel once."""
        x = rng.normal(size=(2, 5, 3, 2))
        for group in patch_groups(mode, 5, 3, local_patch=2):
            np.testing.assert_array_equal(group.assemble(group.extract(x)), x)

    @pytest.mark.parametrize("mode", list(PatchMode))
    def test_extract_is_adjoint_of_assemble(self, mode, rng):
        """Test <extract(x), p> == <x, assemble(p)>."""
        x = rng.normal(size=(2, 5, 3, 2))
        for group in patch_groups(mode, 5, 3, local_patch=2):
            p = rng.normal(size=(2, group.tokens, group.patch_len))
            lhs = (group.extract(x) * p).sum()
            rhs = (x * group.assemble(p)).sum()
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_wrong_shape_rejected(self):
        """Test that a group refuses images of another size."""
        group = patch_groups(PatchMode.VERTICAL, 5, 3)[0]
        with pytest.raises(ShapeMismatchError):
            group.extract(np.zeros((1, 4, 3, 2)))


class TestEmbedding:
    """Tests for the step embedding and conditioning."""

    def test_step_zero(self):
        """Test that step 0 embeds as cosines of 1 and sines of 0."""
        np.testing.assert_array_equal(sinusoidal_embedding(0, 8), [1, 1, 1, 1, 0, 0, 0, 0])

    def test_first_frequency(self):
        """Test that the first pair of components is cos(k), sin(k)."""
        emb = sinusoidal_embedding(np.array([1, 2, 3]), 8)
        assert emb.shape == (3, 8)
        np.testing.assert_allclose(emb[:, 0], np.cos([1, 2, 3]))
        np.testing.assert_allclose(emb[:, 4], np.sin([1, 2, 3]))

    def test_conditioning(self):
        """Test that a conditioning carries the embedding of its step."""
        cond = Conditioning.build(np.array([0.5, -1.0]), 3, 8)
        assert cond.step == 3
        np.testing.assert_array_equal(cond.step_embedding, sinusoidal_embedding(3, 8))
        with pytest.raises(NonFiniteError):
            Conditioning.build(np.array([np.nan]), 1, 8)


class TestDenoiserConfig:
    """Tests for DenoiserConfig."""

    def test_invalid_architectures(self):
        """Test head divisibility and step width checks."""
        with pytest.raises(ConfigError):
            DenoiserConfig(h=2, w=2, d_a=1, steps=2, d_model=16, heads=3)
        with pytest.raises(ConfigError):
            DenoiserConfig(h=2, w=2, d_a=1, steps=2, d_step=5)
        with pytest.raises(ConfigError):
            DenoiserConfig(h=0, w=2, d_a=1, steps=2)

    def test_from_run_config(self, tiny_run_config):
        """Test that the architecture follows the run config."""
        config = DenoiserConfig.from_run_config(tiny_run_config)
        assert (config.h, config.w, config.d_a, config.steps) == (3, 2, 4, 5)
        assert (config.d_model, config.blocks, config.heads) == (8, 1, 2)

    def test_parameter_count(self, tiny_denoiser_config, tiny_model):
        """Test that the layout count matches the initialized store."""
        assert count_parameters(tiny_denoiser_config) == tiny_model.params.count
        horizontal = DenoiserConfig(
            h=TINY_H,
            w=TINY_W,
            d_a=TINY_D_A,
            steps=TINY_STEPS,
            d_model=16,
            blocks=1,
            heads=2,
            d_step=8,
            ffn_mult=2,
            patch_mode=PatchMode.HORIZONTAL,
        )
        assert count_parameters(horizontal) < count_parameters(tiny_denoiser_config)


class TestForward:
    """Tests for Denoiser.forward."""

    def test_output_is_valid(self, tiny_model, rng):
        """Test that predictions are valid HOI images."""
        x, appearance, steps = random_batch(rng, b=3)
        out = tiny_model.forward(x, appearance, steps)
        assert out.shape == (3, TINY_H, TINY_W, 2)
        np.testing.assert_allclose(out.sum(axis=(1, 3)), 1.0, atol=1e-12)
        assert out.min() > 0.0

    def test_zero_weights_give_uniform_output(self, tiny_model, rng):
        """Test that an all-zero network predicts 1/(2H) everywhere."""
        for _, param in tiny_model.params:
            param.value[...] = 0.0
        x, appearance, steps = random_batch(rng)
        out = tiny_model.forward(x, appearance, steps)
        np.testing.assert_allclose(out, 1.0 / (2 * TINY_H), atol=1e-15)

    def test_pass_through_equals_projection(self, rng):
        """Test that an identity network outputs project_to_valid(x)."""
        model = pass_through_model(TINY_H, TINY_W)
        raw = rng.normal(size=(2, TINY_H, TINY_W, 2))
        out = model.forward(raw, np.zeros((2, 2)), 1)
        for got, image in zip(out, raw):
            np.testing.assert_allclose(got, project_to_valid(image).data, atol=1e-9)

    def test_step_changes_prediction(self, tiny_model, rng):
        """Test that the step embedding reaches the output."""
        x, appearance, _ = random_batch(rng, b=1)
        first = tiny_model.forward(x, appearance, 1, cache=False)
        last = tiny_model.forward(x, appearance, TINY_STEPS, cache=False)
        assert not np.array_equal(first, last)

    def test_single_image_and_denoise(self, tiny_model, rng):
        """Test the unbatched entry points."""
        x, appearance, _ = random_batch(rng, b=1)
        batched = tiny_model.forward(x, appearance, 2, cache=False)
        single = tiny_model.forward(x[0], appearance, 2, cache=False)
        np.testing.assert_array_equal(batched, single)
        cond = Conditioning.build(appearance[0], 2, tiny_model.config.d_step)
        img = tiny_model.denoise(x[0], cond, 2)
        np.testing.assert_array_equal(img.data, batched[0])

    def test_denoise_uses_conditioning_embedding(self, tiny_model, rng):
        """Test that denoise feeds the conditioning's own step embedding."""
        x, appearance, _ = random_batch(rng, b=1)
        cond = Conditioning.build(appearance[0], 2, tiny_model.config.d_step)
        swapped = replace(cond, step_embedding=sinusoidal_embedding(5, tiny_model.config.d_step))
        expected = tiny_model.forward(x, appearance, 5, cache=False)
        np.testing.assert_array_equal(tiny_model.denoise(x[0], swapped, 2).data, expected[0])
        with pytest.raises(ConfigError):
            tiny_model.denoise(x[0], cond, 3)
        with pytest.raises(ShapeMismatchError):
            tiny_model.denoise(x[0], replace(cond, step_embedding=np.zeros(3)), 2)

    def test_patches_to_tokens(self, tiny_model, rng):
        """Test that a slice patch set embeds like the image it came from."""
        x, _, _ = random_batch(rng, b=1)
        tokens = tiny_model.patches_to_tokens(slice_patchify(x[0]))
        assert tokens.shape == (TINY_H + TINY_W, 16)
        np.testing.assert_array_equal(tokens, tiny_model.embed_patches(x)[0])
        with pytest.raises(ShapeMismatchError):
            tiny_model.patches_to_tokens(slice_patchify(np.full((2, 2, 2), 0.25)))

    def test_input_checks(self, tiny_model, rng):
        """Test shape, width and step range checks."""
        x, appearance, _ = random_batch(rng)
        with pytest.raises(ShapeMismatchError):
            tiny_model.forward(x[:, :2], appearance, 1)
        with pytest.raises(ShapeMismatchError):
            tiny_model.forward(x, appearance[:, :2], 1)
        with pytest.raises(StepOverflowError):
            tiny_model.forward(x, appearance, 0)
        with pytest.raises(StepOverflowError):
            tiny_model.forward(x, appearance, TINY_STEPS + 1)

    def test_init_conditioning_required(self, tiny_denoiser_config, rng):
        """Test that an init-conditioned model needs the init image."""
        config = replace(tiny_denoiser_config, condition_on_init=True)
        model = Denoiser.initialize(config, seed=0)
        x, appearance, steps = random_batch(rng)
        with pytest.raises(ConfigError):
            model.forward(x, appearance, steps)
        assert model.forward(x, appearance, steps, init=x).shape == x.shape

    def test_mismatched_store_rejected(self, tiny_denoiser_config):
        """Test that a store with the wrong layout is refused."""
        store = ParameterStore()
        store.add("embed.horizontal.w1", np.zeros((6, 16)))
        with pytest.raises(ShapeMismatchError):
            Denoiser(tiny_denoiser_config, params=store)

    def test_initialization_is_seeded(self, tiny_denoiser_config):
        """Test that equal seeds give equal parameters."""
        a = Denoiser.initialize(tiny_denoiser_config, seed=1).params.flat_values()
        b = Denoiser.initialize(tiny_denoiser_config, seed=1).params.flat_values()
        c = Denoiser.initialize(tiny_denoiser_config, seed=2).params.flat_values()
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestBackward:
    """Tests for the hand-written backward pass."""

    def test_gradients_slice_mode(self, tiny_model, rng):
        """Test analytic gradients against finite differences."""
        gradient_check(tiny_model, rng)

    @pytest.mark.parametrize(
        "mode", [PatchMode.LOCAL, PatchMode.HORIZONTAL, PatchMode.VERTICAL]
    )
    def test_gradients_other_patch_modes(self, mode, tiny_denoiser_config, rng):
        """Test gradients of the single-orientation and local patch modes."""
        config = replace(tiny_denoiser_config, patch_mode=mode)
        gradient_check(Denoiser.initialize(config, seed=4), rng)

    def test_gradients_with_init_conditioning(self, tiny_denoiser_config, rng):
        """Test gradients through the init-image conditioning branch."""
        config = replace(tiny_denoiser_config, condition_on_init=True)
        init = slice_softmax(rng.normal(size=(2, TINY_H, TINY_W, 2)))
        gradient_check(Denoiser.initialize(config, seed=5), rng, init=init)

    @pytest.mark.slow
    def test_gradients_two_blocks(self, tiny_denoiser_config, rng):
        """Test gradients through a stack of two blocks on every entry sample."""
        config = replace(tiny_denoiser_config, blocks=2)
        gradient_check(Denoiser.initialize(config, seed=6), rng, per_param=6)

    @pytest.mark.slow
    def test_gradients_benchmark_architecture(self, rng):
        """Test gradients of the architecture the benchmark config trains."""
        cfg = load_run_config(CONFIGS_DIR / "default.toml")
        config = DenoiserConfig.from_run_config(cfg)
        gradient_check(Denoiser.initialize(config, seed=7), rng, per_param=3)

    def test_accumulation_and_zero_grad(self, tiny_model, rng):
        """Test that repeated backward passes add up until zero_grad."""
        x, appearance, steps = random_batch(rng)
        weights = rng.normal(size=x.shape)
        tiny_model.forward(x, appearance, steps)
        tiny_model.backward(weights)
        once = tiny_model.params.flat_grads().copy()
        assert np.any(once != 0.0)

        tiny_model.forward(x, appearance, steps)
        tiny_model.backward(weights)
        np.testing.assert_allclose(tiny_model.params.flat_grads(), 2 * once, rtol=1e-12)

        tiny_model.params.zero_grad()
        assert not np.any(tiny_model.params.flat_grads())

    def test_backward_needs_cache(self, tiny_model, rng):
        """Test that backward requires a fresh cached forward pass."""
        x, appearance, steps = random_batch(rng)
        with pytest.raises(MissingCacheError):
            tiny_model.backward(np.zeros_like(x))

        tiny_model.forward(x, appearance, steps)
        tiny_model.backward(np.zeros_like(x))
        with pytest.raises(MissingCacheError):
            tiny_model.backward(np.zeros_like(x))

        tiny_model.forward(x, appearance, steps, cache=False)
        with pytest.raises(MissingCacheError):
            tiny_model.backward(np.zeros_like(x))


class TestParameterStore:
    """Tests for ParameterStore."""

    def test_flat_round_trip(self):
        """Test canonical flattening and reloading."""
        store = ParameterStore()
        store.add("a", np.arange(3.0))
        store.add("b", np.ones((2, 2)))
        assert store.count == 7
        assert store.names() == ["a", "b"]
        flat = store.flat_values() * 2
        store.load_flat(flat)
        np.testing.assert_array_equal(store.value("b"), 2.0)

    def test_errors(self):
        """Test duplicate names, wrong flat sizes and non-finite values."""
        store = ParameterStore()
        store.add("a", np.zeros(2))
        with pytest.raises(ValueError):
            store.add("a", np.zeros(2))
        with pytest.raises(CheckpointError):
            store.load_flat(np.zeros(3))
        store.value("a")[0] = np.inf
        with pytest.raises(NonFiniteError):
            store.check_finite()


class TestCheckpoint:
    """Tests for the binary checkpoint codec."""

    def test_round_trip(self, tiny_model, rng, tmp_path):
        """Test that a saved model reloads bit for bit."""
        path = save_checkpoint(tiny_model, tmp_path / "model.hidf")
        loaded = load_checkpoint(path)
        assert loaded.config == tiny_model.config
        np.testing.assert_array_equal(
            loaded.params.flat_values(), tiny_model.params.flat_values()
        )
        x, appearance, steps = random_batch(rng)
        np.testing.assert_array_equal(
            loaded.forward(x, appearance, steps, cache=False),
            tiny_model.forward(x, appearance, steps, cache=False),
        )
        assert not (tmp_path / "model.hidf.tmp").exists()

    def test_architecture_round_trip(self, tiny_denoiser_config):
        """Test that patch mode and conditioning flags survive encoding."""
        config = replace(
            tiny_denoiser_config,
            patch_mode=PatchMode.LOCAL,
            local_patch=3,
            condition_on_init=True,
        )
        model = Denoiser.initialize(config, seed=0)
        assert decode_checkpoint(encode_checkpoint(model)).config == config

    def test_header_layout(self, tiny_model):
        """Test the magic, version and declared value count."""
        data = encode_checkpoint(tiny_model)
        assert data[:4] == b"HIDF"
        assert struct.unpack_from("<I", data, 4) == (1,)
        assert struct.unpack_from("<Q", data, 56) == (tiny_model.params.count,)
        assert len(data) == 64 + 8 * tiny_model.params.count

    def test_corruption(self, tiny_model):
        """Test that damaged checkpoints are rejected."""
        data = encode_checkpoint(tiny_model)
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:10])
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(b"XXXX" + data[4:])
        with pytest.raises(CheckpointError, match="version"):
            decode_checkpoint(data[:4] + struct.pack("<I", 2) + data[8:])
        with pytest.raises(CheckpointError):
            decode_checkpoint(data[:-8])

    def test_layout_mismatch(self, tiny_model):
        """Test that a header describing another architecture is rejected."""
        data = bytearray(encode_checkpoint(tiny_model))
        struct.pack_into("<I", data, 8, TINY_H + 1)
        with pytest.raises(CheckpointError):
            decode_checkpoint(bytes(data))

    def test_missing_file(self, tmp_path):
        """Test that a missing checkpoint is a CheckpointError."""
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.hidf")
