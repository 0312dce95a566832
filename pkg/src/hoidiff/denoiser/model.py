"""
Slice-patchified transformer denoiser with a hand-written backward pass.

Data flow for a batch ``x`` of shape (B, H, W, 2):

1. every patch group cuts ``x`` into patches; each patch goes through a
   two-layer perceptron (Linear, GELU, Linear) plus a learned positional
   term, giving one token of width ``d_model``
2. the appearance feature and the sinusoidal step embedding are projected to
   ``d_model``, summed (optionally with a projection of the flattened
   initialization image) and passed through SiLU to give the condition ``c``
3. ``blocks`` transformer blocks with adaLN-Zero modulation: ``c`` yields a
   shift, scale and gate for the attention and the feed-forward branch
4. each group's tokens decode through its own linear head back to patches;
   the per-pixel raw prediction is the mean over groups
5. the output is the per-vertical-slice softmax of the raw prediction

The model predicts the clean image. ``forward`` caches activations;
``backward`` consumes the cache and accumulates into the parameter
gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field

import numpy as np

from ..core.hoi_image import HoiImage
from ..core.hoi_image import slice_softmax
from ..errors import ConfigError
from ..errors import MissingCacheError
from ..errors import NonFiniteError
from ..errors import ShapeMismatchError
from ..errors import StepOverflowError
from ..models import PatchMode
from ..models import RunConfig
from ..nn import functional as F
from ..nn.parameters import ParameterStore
from ..rng import STREAM_MODEL_INIT
from ..rng import derive_rng
from .embedding import Conditioning
from .embedding import sinusoidal_embedding
from .patchify import PatchGroup
from .patchify import PatchSet
from .patchify import patch_groups

MODULATION_STD = 0.02
POSITION_STD = 0.02


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture of a denoiser; everything the parameter layout depends on."""

    h: int
    w: int
    d_a: int
    steps: int
    d_model: int = 128
    blocks: int = 4
    heads: int = 4
    d_step: int = 64
    ffn_mult: int = 4
    patch_mode: PatchMode = PatchMode.SLICE
    local_patch: int = 2
    condition_on_init: bool = False

    def __post_init__(self) -> None:
        if min(self.h, self.w, self.d_a, self.steps, self.d_model, self.heads) < 1:
            raise ConfigError("denoiser dimensions must be positive")
        if self.d_model % self.heads:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by heads ({self.heads})"
            )
        if self.d_step % 2:
            raise ConfigError("d_step must be even")

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> DenoiserConfig:
        return cls(
            h=cfg.world.h,
            w=cfg.world.w,
            d_a=cfg.world.d_a,
            steps=cfg.schedule.steps,
            d_model=cfg.model.d_model,
            blocks=cfg.model.blocks,
            heads=cfg.model.heads,
            d_step=cfg.model.d_step,
            ffn_mult=cfg.model.ffn_mult,
            patch_mode=cfg.model.patch_mode,
            local_patch=cfg.model.local_patch,
            condition_on_init=cfg.model.condition_on_init,
        )

    def groups(self) -> list[PatchGroup]:
        return patch_groups(self.patch_mode, self.h, self.w, self.local_patch)

    @property
    def tokens(self) -> int:
        return sum(g.tokens for g in self.groups())


def parameter_layout(config: DenoiserConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """
    Canonical parameter order as ``(name, shape, kind)`` triples.

    ``kind`` selects the initializer: ``dense``, ``modulation``, ``position``
    or ``bias``.
    """
    d = config.d_model
    hidden = config.ffn_mult * d
    layout: list[tuple[str, tuple[int, ...], str]] = []
    for g in config.groups():
        layout += [
            (f"embed.{g.name}.w1", (g.patch_len, d), "dense"),
            (f"embed.{g.name}.b1", (d,), "bias"),
            (f"embed.{g.name}.w2", (d, d), "dense"),
            (f"embed.{g.name}.b2", (d,), "bias"),
            (f"pos.{g.name}", (g.tokens, d), "position"),
        ]
    layout += [
        ("cond.appearance.w", (config.d_a, d), "dense"),
        ("cond.appearance.b", (d,), "bias"),
        ("cond.step.w", (config.d_step, d), "dense"),
        ("cond.step.b", (d,), "bias"),
    ]
    if config.condition_on_init:
        layout += [
            ("cond.init.w", (2 * config.h * config.w, d), "dense"),
            ("cond.init.b", (d,), "bias"),
        ]
    for i in range(config.blocks):
        layout += [
            (f"block.{i}.mod.w", (d, 6 * d), "modulation"),
            (f"block.{i}.mod.b", (6 * d,), "bias"),
            (f"block.{i}.attn.qkv.w", (d, 3 * d), "dense"),
            (f"block.{i}.attn.qkv.b", (3 * d,), "bias"),
            (f"block.{i}.attn.out.w", (d, d), "dense"),
            (f"block.{i}.attn.out.b", (d,), "bias"),
            (f"block.{i}.ff.w1", (d, hidden), "dense"),
            (f"block.{i}.ff.b1", (hidden,), "bias"),
            (f"block.{i}.ff.w2", (hidden, d), "dense"),
            (f"block.{i}.ff.b2", (d,), "bias"),
        ]
    for g in config.groups():
        layout += [
            (f"head.{g.name}.w", (d, g.patch_len), "dense"),
            (f"head.{g.name}.b", (g.patch_len,), "bias"),
        ]
    return layout


def count_parameters(config: DenoiserConfig) -> int:
    """Number of scalar parameters of an architecture."""
    return sum(int(np.prod(shape)) for _, shape, _ in parameter_layout(config))


def init_parameters(config: DenoiserConfig, rng: np.random.Generator) -> ParameterStore:
    """Fresh parameters: dense ~ N(0, 1/fan_in), modulation and positions ~ N(0, 0.02^2)."""
    store = ParameterStore()
    for name, shape, kind in parameter_layout(config):
        if kind == "dense":
            value = rng.standard_normal(shape) / np.sqrt(shape[0])
        elif kind == "modulation":
            value = rng.standard_normal(shape) * MODULATION_STD
        elif kind == "position":
            value = rng.standard_normal(shape) * POSITION_STD
        else:
            value = np.zeros(shape)
        store.add(name, value)
    return store


@dataclass
class _GroupCache:
    patches: np.ndarray
    hidden: np.ndarray
    activated: np.ndarray


@dataclass
class _BlockCache:
    t_in: np.ndarray
    mod: list[np.ndarray]
    ln1: F.LayerNormCache
    attn: F.AttentionCache
    attn_out: np.ndarray
    ln2: F.LayerNormCache
    m2: np.ndarray
    f1: np.ndarray
    g: np.ndarray
    ff_out: np.ndarray


@dataclass
class _ForwardCache:
    appearance: np.ndarray
    step_emb: np.ndarray
    init_flat: np.ndarray | None
    c_pre: np.ndarray
    c: np.ndarray
    groups: list[_GroupCache] = field(default_factory=list)
    blocks: list[_BlockCache] = field(default_factory=list)
    tokens: np.ndarray | None = None
    out: np.ndarray | None = None


class Denoiser:
    """The denoising network ``theta``: noisy HOI image to predicted clean image."""

    def __init__(
        self,
        config: DenoiserConfig,
        params: ParameterStore | None = None,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.config = config
        self.groups = config.groups()
        if params is None:
            params = init_parameters(config, rng or np.random.default_rng(0))
        expected = [name for name, _, _ in parameter_layout(config)]
        if params.names() != expected:
            raise ShapeMismatchError("parameter store does not match the architecture")
        self.params = params
        self._cache: _ForwardCache | None = None

    @classmethod
    def initialize(cls, config: DenoiserConfig, seed: int) -> Denoiser:
        """Fresh model drawn from the model-init stream of ``seed``."""
        return cls(config, rng=derive_rng(seed, STREAM_MODEL_INIT))

    @property
    def parameter_count(self) -> int:
        return self.params.count

    def _p(self, name: str) -> np.ndarray:
        return self.params.value(name)

    def _grad(self, name: str, value: np.ndarray) -> None:
        self.params[name].grad += value

    def _prepare(
        self, x: np.ndarray, appearance: np.ndarray, steps: int | np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[None]
        if x.shape[1:] != (cfg.h, cfg.w, 2):
            raise ShapeMismatchError(
                f"expected images of shape ({cfg.h}, {cfg.w}, 2), got {x.shape[1:]}"
            )
        b = x.shape[0]
        appearance = np.asarray(appearance, dtype=np.float64).reshape(b, -1)
        if appearance.shape[1] != cfg.d_a:
            raise ShapeMismatchError(
                f"appearance width {appearance.shape[1]} does not match d_a={cfg.d_a}"
            )
        steps = np.broadcast_to(np.asarray(steps, dtype=np.int64), (b,))
        if np.any(steps < 1) or np.any(steps > cfg.steps):
            raise StepOverflowError(f"steps must lie in 1..{cfg.steps}")
        return x, appearance, steps

    def embed_patches(self, x: np.ndarray) -> np.ndarray:
        """Tokens (B, N, d_model) of a batch of images, before any block."""
        x = np.asarray(x, dtype=np.float64)
        tokens = []
        for g in self.groups:
            patches = g.extract(x)
            hidden = F.linear(patches, self._p(f"embed.{g.name}.w1"), self._p(f"embed.{g.name}.b1"))
            tok = F.linear(
                F.gelu(hidden), self._p(f"embed.{g.name}.w2"), self._p(f"embed.{g.name}.b2")
            )
            tokens.append(tok + self._p(f"pos.{g.name}"))
        return np.concatenate(tokens, axis=1)

    def patches_to_tokens(self, patches: PatchSet) -> np.ndarray:
        """
        Tokens of one image given as a slice patch set.

        Raises:
            ShapeMismatchError: If the patches do not fit the configured H and W
        """
        cfg = self.config
        if patches.horizontal.shape != (cfg.h, cfg.w, 2) or patches.vertical.shape != (
            cfg.w,
            cfg.h,
            2,
        ):
            raise ShapeMismatchError("patch set does not match the configured H and W")
        return self.embed_patches(patches.depatchify()[None])[0]

    def forward(
        self,
        x: np.ndarray,
        appearance: np.ndarray,
        steps: int | np.ndarray,
        init: np.ndarray | None = None,
        cache: bool = True,
        step_embedding: np.ndarray | None = None,
    ) -> np.ndarray:
        """
        Predict clean images for a batch.

        Args:
            x: Noisy images, (B, H, W, 2) or a single (H, W, 2)
            appearance: Appearance features, (B, d_a)
            steps: Step index per sample (or one for all)
            init: Initialization images; required with ``condition_on_init``
            cache: Keep activations for ``backward``
            step_embedding: Precomputed embeddings of ``steps``, (B, d_step)

        Returns:
            Valid HOI images, (B, H, W, 2)

        Raises:
            NonFiniteError: If the raw prediction is not finite
        """
        cfg = self.config
        x, appearance, steps = self._prepare(x, appearance, steps)
        b = x.shape[0]

        if step_embedding is None:
            step_emb = sinusoidal_embedding(steps, cfg.d_step)
        else:
            step_emb = np.asarray(step_embedding, dtype=np.float64).reshape(b, -1)
            if step_emb.shape[1] != cfg.d_step:
                raise ShapeMismatchError(
                    f"step embedding width {step_emb.shape[1]} does not match d_step={cfg.d_step}"
                )
        c_pre = F.linear(appearance, self._p("cond.appearance.w"), self._p("cond.appearance.b"))
        c_pre = c_pre + F.linear(step_emb, self._p("cond.step.w"), self._p("cond.step.b"))
        init_flat = None
        if cfg.condition_on_init:
            if init is None:
                raise ConfigError("this denoiser conditions on the initialization image")
            init_flat = np.asarray(init, dtype=np.float64).reshape(b, -1)
            c_pre = c_pre + F.linear(init_flat, self._p("cond.init.w"), self._p("cond.init.b"))
        c = F.silu(c_pre)
        fc = _ForwardCache(appearance, step_emb, init_flat, c_pre, c)

        tokens = []
        for g in self.groups:
            patches = g.extract(x)
            hidden = F.linear(patches, self._p(f"embed.{g.name}.w1"), self._p(f"embed.{g.name}.b1"))
            activated = F.gelu(hidden)
            tok = F.linear(activated, self._p(f"embed.{g.name}.w2"), self._p(f"embed.{g.name}.b2"))
            tokens.append(tok + self._p(f"pos.{g.name}"))
            fc.groups.append(_GroupCache(patches, hidden, activated))
        t = np.concatenate(tokens, axis=1)

        for i in range(cfg.blocks):
            t, block_cache = self._block_forward(i, t, c)
            fc.blocks.append(block_cache)
        fc.tokens = t

        raw = np.zeros_like(x)
        offset = 0
        for g in self.groups:
            out_g = F.linear(
                t[:, offset : offset + g.tokens],
                self._p(f"head.{g.name}.w"),
                self._p(f"head.{g.name}.b"),
            )
            raw += g.assemble(out_g)
            offset += g.tokens
        raw /= len(self.groups)
        if not np.all(np.isfinite(raw)):
            raise NonFiniteError("denoiser produced non-finite activations")

        out = slice_softmax(raw)
        fc.out = out
        self._cache = fc if cache else None
        return out

    def _block_forward(
        self, i: int, t: np.ndarray, c: np.ndarray
    ) -> tuple[np.ndarray, _BlockCache]:
        p = f"block.{i}"
        mod = np.split(F.linear(c, self._p(f"{p}.mod.w"), self._p(f"{p}.mod.b")), 6, axis=-1)
        shift1, scale1, gate1, shift2, scale2, gate2 = mod

        n1, ln1 = F.layer_norm(t)
        attn_out, attn = F.attention(
            F.modulate(n1, shift1, scale1),
            self._p(f"{p}.attn.qkv.w"),
            self._p(f"{p}.attn.qkv.b"),
            self._p(f"{p}.attn.out.w"),
            self._p(f"{p}.attn.out.b"),
            self.config.heads,
        )
        t_mid = t + gate1[:, None, :] * attn_out

        n2, ln2 = F.layer_norm(t_mid)
        m2 = F.modulate(n2, shift2, scale2)
        f1 = F.linear(m2, self._p(f"{p}.ff.w1"), self._p(f"{p}.ff.b1"))
        g = F.gelu(f1)
        ff_out = F.linear(g, self._p(f"{p}.ff.w2"), self._p(f"{p}.ff.b2"))
        t_out = t_mid + gate2[:, None, :] * ff_out
        return t_out, _BlockCache(t, mod, ln1, attn, attn_out, ln2, m2, f1, g, ff_out)

    def backward(self, grad_out: np.ndarray) -> None:
        """
        Accumulate parameter gradients for the last cached forward pass.

        Args:
            grad_out: d(loss)/d(output), same shape as the forward output

        Raises:
            MissingCacheError: If no cached forward pass is available
        """
        fc = self._cache
        if fc is None or fc.out is None or fc.tokens is None:
            raise MissingCacheError("backward needs a preceding forward pass with cache=True")
        self._cache = None
        grad_out = np.asarray(grad_out, dtype=np.float64).reshape(fc.out.shape)

        d_raw = F.slice_softmax_backward(grad_out, fc.out) / len(self.groups)
        d_tokens = []
        offset = 0
        for g in self.groups:
            tok_g = fc.tokens[:, offset : offset + g.tokens]
            d_out_g = g.extract(d_raw)
            d_tok, dw, db = F.linear_backward(d_out_g, tok_g, self._p(f"head.{g.name}.w"))
            self._grad(f"head.{g.name}.w", dw)
            self._grad(f"head.{g.name}.b", db)
            d_tokens.append(d_tok)
            offset += g.tokens
        d_t = np.concatenate(d_tokens, axis=1)

        d_c = np.zeros_like(fc.c)
        for i in reversed(range(self.config.blocks)):
            d_t, d_c_block = self._block_backward(i, d_t, fc.c, fc.blocks[i])
            d_c += d_c_block

        offset = 0
        for g, gc in zip(self.groups, fc.groups, strict=True):
            d_tok = d_t[:, offset : offset + g.tokens]
            offset += g.tokens
            self._grad(f"pos.{g.name}", d_tok.sum(axis=0))
            d_act, dw2, db2 = F.linear_backward(d_tok, gc.activated, self._p(f"embed.{g.name}.w2"))
            self._grad(f"embed.{g.name}.w2", dw2)
            self._grad(f"embed.{g.name}.b2", db2)
            d_hidden = F.gelu_backward(d_act, gc.hidden)
            _, dw1, db1 = F.linear_backward(d_hidden, gc.patches, self._p(f"embed.{g.name}.w1"))
            self._grad(f"embed.{g.name}.w1", dw1)
            self._grad(f"embed.{g.name}.b1", db1)

        d_c_pre = F.silu_backward(d_c, fc.c_pre)
        sources = [("appearance", fc.appearance), ("step", fc.step_emb)]
        if fc.init_flat is not None:
            sources.append(("init", fc.init_flat))
        for name, source in sources:
            _, dw, db = F.linear_backward(d_c_pre, source, self._p(f"cond.{name}.w"))
            self._grad(f"cond.{name}.w", dw)
            self._grad(f"cond.{name}.b", db)

    def _block_backward(
        self, i: int, d_t: np.ndarray, c: np.ndarray, bc: _BlockCache
    ) -> tuple[np.ndarray, np.ndarray]:
        p = f"block.{i}"
        shift1, scale1, gate1, shift2, scale2, gate2 = bc.mod

        d_ff = d_t * gate2[:, None, :]
        d_gate2 = (d_t * bc.ff_out).sum(axis=1)
        d_g, dw2, db2 = F.linear_backward(d_ff, bc.g, self._p(f"{p}.ff.w2"))
        self._grad(f"{p}.ff.w2", dw2)
        self._grad(f"{p}.ff.b2", db2)
        d_f1 = F.gelu_backward(d_g, bc.f1)
        d_m2, dw1, db1 = F.linear_backward(d_f1, bc.m2, self._p(f"{p}.ff.w1"))
        self._grad(f"{p}.ff.w1", dw1)
        self._grad(f"{p}.ff.b1", db1)
        d_n2, d_shift2, d_scale2 = F.modulate_backward(d_m2, bc.ln2.normalized, scale2)
        d_mid = d_t + F.layer_norm_backward(d_n2, bc.ln2)

        d_attn = d_mid * gate1[:, None, :]
        d_gate1 = (d_mid * bc.attn_out).sum(axis=1)
        d_m1, dw_qkv, db_qkv, dw_out, db_out = F.attention_backward(
            d_attn,
            bc.attn,
            self._p(f"{p}.attn.qkv.w"),
            self._p(f"{p}.attn.out.w"),
            self.config.heads,
        )
        self._grad(f"{p}.attn.qkv.w", dw_qkv)
        self._grad(f"{p}.attn.qkv.b", db_qkv)
        self._grad(f"{p}.attn.out.w", dw_out)
        self._grad(f"{p}.attn.out.b", db_out)
        d_n1, d_shift1, d_scale1 = F.modulate_backward(d_m1, bc.ln1.normalized, scale1)
        d_in = d_mid + F.layer_norm_backward(d_n1, bc.ln1)

        d_mod = np.concatenate([d_shift1, d_scale1, d_gate1, d_shift2, d_scale2, d_gate2], axis=-1)
        d_c, dw_mod, db_mod = F.linear_backward(d_mod, c, self._p(f"{p}.mod.w"))
        self._grad(f"{p}.mod.w", dw_mod)
        self._grad(f"{p}.mod.b", db_mod)
        return d_in, d_c

    def denoise(
        self,
        img: HoiImage | np.ndarray,
        cond: Conditioning,
        k: int,
        init: HoiImage | np.ndarray | None = None,
    ) -> HoiImage:
        """
        Predict the clean image of one noisy image at step ``k``.

        Raises:
            ConfigError: If ``cond`` was built for another step
        """
        if cond.step != k:
            raise ConfigError(f"conditioning was built for step {cond.step}, not {k}")
        data = img.data if isinstance(img, HoiImage) else np.asarray(img, dtype=np.float64)
        init_data = None
        if init is not None:
            init_data = (init.data if isinstance(init, HoiImage) else np.asarray(init))[None]
        out = self.forward(
            data[None],
            cond.appearance[None],
            k,
            init_data,
            cache=False,
            step_embedding=cond.step_embedding[None],
        )
        return HoiImage(out[0])
