"""Multi-task transformer that analyzes multi-coset sample matrices.

The per-frame sample matrix is unfolded into real/imaginary pairs, embedded
per slot, and prefixed with a learnable sensing [CLS] token.  A first
encoder stack feeds the spectrum-sensing head; for each occupied sub-band
the stage-1 features are replicated, the consumed [CLS] row is replaced by
a fresh classification token, a learnable band-identification token is
appended, and a second encoder stack feeds the modulation head plus one
linear demodulation head per constellation.

Encoders use the residual scaling of DeepNorm: before each layer
normalization the residual branch is multiplied by sqrt(2 * n_layers) with
n_layers the encoder count of the owning stack.  Attention scores are
scaled by 1/sqrt(d_model).  No masking and no dropout anywhere: slots
correlate bidirectionally and the training sets are synthetic and
unbounded.

Demodulation heads emit ``order + 1`` logits (constellation classes plus an
end-of-sequence class at index ``order``), padded with -inf up to the
largest constellation so every replica shares one output tensor; padded
classes therefore carry exactly zero probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor, nn

from .grid import SamplingGrid
from .modulation import SCHEME_NAMES, make_constellation


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 256
    n_heads: int = 8
    d_ff: int = 1024
    n_layers_sense: int = 4
    n_layers_demod: int = 4
    n_slots: int = 20
    n_channels: int = 8
    n_bands: int = 16
    mod_names: tuple[str, ...] = SCHEME_NAMES

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        for name, value in (
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("n_layers_sense", self.n_layers_sense),
            ("n_layers_demod", self.n_layers_demod),
            ("n_slots", self.n_slots),
            ("n_channels", self.n_channels),
            ("n_bands", self.n_bands),
        ):
            if value < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def n_mods(self) -> int:
        return len(self.mod_names)

    @property
    def mod_orders(self) -> tuple[int, ...]:
        return tuple(make_constellation(n).order for n in self.mod_names)

    @property
    def max_order(self) -> int:
        return max(self.mod_orders)

    def eos_class(self, mod_index: int) -> int:
        """Index of the end-of-sequence class inside a demod head's output."""
        return self.mod_orders[mod_index]


def default_config(grid: SamplingGrid, n_encoders: int = 8, **overrides) -> ModelConfig:
    """Config for a grid, splitting the encoders evenly between the sensing
    and demodulation stacks."""
    if n_encoders % 2 != 0:
        raise ValueError("n_encoders must be even (split between two stacks)")
    params = dict(
        n_layers_sense=n_encoders // 2,
        n_layers_demod=n_encoders // 2,
        n_slots=grid.n_slots,
        n_channels=grid.n_channels,
        n_bands=grid.n_bands,
    )
    params.update(overrides)
    return ModelConfig(**params)


def tiny_config(grid: SamplingGrid | None = None, **overrides) -> ModelConfig:
    """Smallest useful model; the gradient-check fixture."""
    params = dict(
        d_model=16,
        n_heads=2,
        d_ff=32,
        n_layers_sense=1,
        n_layers_demod=1,
        n_slots=8,
        n_channels=4,
        n_bands=4,
    )
    if grid is not None:
        params.update(
            n_slots=grid.n_slots, n_channels=grid.n_channels, n_bands=grid.n_bands
        )
    params.update(overrides)
    return ModelConfig(**params)


def unfold_complex(samples: np.ndarray, dtype: torch.dtype = torch.float32) -> Tensor:
    """Unfold complex samples (..., n_slots, n_channels) into an interleaved
    real tensor (..., n_slots, 2 * n_channels): even columns real parts, odd
    columns imaginary parts."""
    arr = np.asarray(samples)
    out = np.empty(arr.shape[:-1] + (2 * arr.shape[-1],), dtype=np.float64)
    out[..., 0::2] = arr.real
    out[..., 1::2] = arr.imag
    return torch.as_tensor(out, dtype=dtype)


class EncoderLayer(nn.Module):
    """Self-attention + feed-forward block with DeepNorm residuals."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int, residual_scale: float):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.score_scale = 1.0 / math.sqrt(d_model)
        self.residual_scale = residual_scale
        self.w_query = nn.Linear(d_model, d_model)
        self.w_key = nn.Linear(d_model, d_model)
        self.w_value = nn.Linear(d_model, d_model)
        self.w_out = nn.Linear(d_model, d_model)
        self.ff_in = nn.Linear(d_model, d_ff)
        self.ff_out = nn.Linear(d_ff, d_model)
        self.norm_attn = nn.LayerNorm(d_model, eps=1e-5)
        self.norm_ff = nn.LayerNorm(d_model, eps=1e-5)

    def attention(self, tokens: Tensor) -> Tensor:
        b, n, d = tokens.shape
        shape = (b, n, self.n_heads, self.d_head)
        q = self.w_query(tokens).view(shape).transpose(1, 2)
        k = self.w_key(tokens).view(shape).transpose(1, 2)
        v = self.w_value(tokens).view(shape).transpose(1, 2)
        scores = (q @ k.transpose(-1, -2)) * self.score_scale
        mixed = torch.softmax(scores, dim=-1) @ v
        return self.w_out(mixed.transpose(1, 2).reshape(b, n, d))

    def forward(self, tokens: Tensor) -> Tensor:
        x = self.norm_attn(tokens * self.residual_scale + self.attention(tokens))
        ff = self.ff_out(nn.functional.gelu(self.ff_in(x)))
        return self.norm_ff(x * self.residual_scale + ff)


@dataclass
class ForwardTrace:
    """Outputs of one forward pass; probability tensors keep their autograd
    history so losses can be evaluated directly on them."""

    s_hat: Tensor                    # (B, n_bands) sigmoid probabilities
    frame_idx: Tensor                # (R,) frame of each band replica
    band_idx: Tensor                 # (R,) analyzed sub-band
    mod_used: Tensor                 # (R,) demodulator applied per replica
    m_hat: Tensor                    # (R, n_mods) softmax probabilities
    y_hat: Tensor                    # (R, n_tokens, max_order + 1) row softmax


@dataclass
class BandReport:
    band_index: int
    mod_name: str
    mod_probs: np.ndarray
    symbols: np.ndarray              # indices emitted before the first EOS


@dataclass
class AnalysisResult:
    """Inference-facing view of a ForwardTrace for a single frame."""

    occupancy: np.ndarray            # (n_bands,) bool
    s_hat: np.ndarray                # (n_bands,) float
    bands: list[BandReport] = field(default_factory=list)


class SignalAnalyzer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.embed = nn.Linear(2 * config.n_channels, d)
        self.positions = nn.Parameter(torch.empty(config.n_slots + 1, d))
        self.cls_sense = nn.Parameter(torch.empty(d))
        self.cls_mod = nn.Parameter(torch.empty(d))
        self.band_tokens = nn.Parameter(torch.empty(config.n_bands, d))
        self.sense_layers = nn.ModuleList(
            EncoderLayer(d, config.n_heads, config.d_ff,
                         math.sqrt(2.0 * config.n_layers_sense))
            for _ in range(config.n_layers_sense)
        )
        self.demod_layers = nn.ModuleList(
            EncoderLayer(d, config.n_heads, config.d_ff,
                         math.sqrt(2.0 * config.n_layers_demod))
            for _ in range(config.n_layers_demod)
        )
        self.head_sense = nn.Linear(d, config.n_bands)
        self.head_mod = nn.Linear(d, config.n_mods)
        self.head_demod = nn.ModuleList(
            nn.Linear(d, order + 1) for order in config.mod_orders
        )
        self._init_parameters()

    def _init_parameters(self):
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                nn.init.zeros_(module.bias)
        for tensor in (self.positions, self.cls_sense, self.cls_mod, self.band_tokens):
            nn.init.trunc_normal_(tensor, std=0.02)

    # ----- stage 1 -----

    def embed_samples(self, x: Tensor) -> Tensor:
        """Unfolded samples (B, n, 2 * n_channels) -> tokens (B, n + 1, d):
        slot embeddings behind a prepended sensing [CLS], plus positions."""
        b, n, width = x.shape
        if width != 2 * self.config.n_channels:
            raise ValueError(f"expected feature width {2 * self.config.n_channels}, got {width}")
        if n > self.config.n_slots:
            raise ValueError(f"frame has {n} slots but positions cover {self.config.n_slots}")
        tokens = self.embed(x)
        cls = self.cls_sense.expand(b, 1, -1)
        return torch.cat([cls, tokens], dim=1) + self.positions[: n + 1]

    def sense_spectrum(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Occupancy probabilities and the stage-1 features they came from."""
        tokens = self.embed_samples(x)
        for layer in self.sense_layers:
            tokens = layer(tokens)
        s_hat = torch.sigmoid(self.head_sense(tokens[:, 0]))
        return s_hat, tokens

    # ----- stage 2 -----

    def _demod_probs(self, rows: Tensor, mod_used: Tensor) -> Tensor:
        """Apply each replica's demodulator to its token rows; pad the logit
        tail with -inf so padded classes get probability exactly 0."""
        n_rep, n_tok, _ = rows.shape
        logits = rows.new_full((n_rep, n_tok, self.config.max_order + 1), -torch.inf)
        for mod_index, head in enumerate(self.head_demod):
            sel = (mod_used == mod_index).nonzero(as_tuple=True)[0]
            if sel.numel():
                width = self.config.mod_orders[mod_index] + 1
                logits[sel, :, :width] = head(rows[sel])
        return torch.softmax(logits, dim=-1)

    def analyze_bands(
        self,
        features: Tensor,
        frame_idx: Tensor,
        band_idx: Tensor,
        mod_idx: Tensor | None = None,
    ) -> tuple[Tensor, Tensor, Tensor]:
        """Run stage 2 for one replica per (frame, band) pair.

        ``mod_idx`` selects each replica's demodulator (teacher forcing);
        when None the argmax of the modulation head is used instead."""
        replicas = features[frame_idx]
        cls = self.cls_mod.expand(len(frame_idx), 1, -1)
        ident = self.band_tokens[band_idx].unsqueeze(1)
        tokens = torch.cat([cls, replicas[:, 1:], ident], dim=1)
        for layer in self.demod_layers:
            tokens = layer(tokens)
        m_hat = torch.softmax(self.head_mod(tokens[:, 0]), dim=-1)
        mod_used = mod_idx if mod_idx is not None else m_hat.argmax(dim=-1)
        y_hat = self._demod_probs(tokens[:, 1:], mod_used)
        return m_hat, y_hat, mod_used

    def analyze_band(
        self, features_one: Tensor, band_index: int, mod_index: int | None = None
    ) -> tuple[Tensor, Tensor]:
        """Single-replica convenience wrapper around `analyze_bands`."""
        idx = torch.zeros(1, dtype=torch.long, device=features_one.device)
        band = torch.full((1,), band_index, dtype=torch.long, device=features_one.device)
        mod = None
        if mod_index is not None:
            mod = torch.full((1,), mod_index, dtype=torch.long, device=features_one.device)
        m_hat, y_hat, _ = self.analyze_bands(features_one.unsqueeze(0), idx, band, mod)
        return m_hat[0], y_hat[0]

    # ----- full pipeline -----

    def forward_full(
        self,
        x: Tensor,
        occupancy: Tensor | None = None,
        mod_idx: Tensor | None = None,
    ) -> ForwardTrace:
        """Stage 1 then one stage-2 replica per occupied band.

        Training: pass ground-truth ``occupancy`` (B, n_bands) and per-replica
        ``mod_idx`` (teacher forcing, replicas ordered by frame then band).
        Inference: leave both None; occupancy is thresholded at 0.5 and the
        demodulator follows the modulation head."""
        s_hat, features = self.sense_spectrum(x)
        occ = occupancy if occupancy is not None else (s_hat > 0.5).to(s_hat.dtype)
        frame_idx, band_idx = occ.nonzero(as_tuple=True)
        if frame_idx.numel() == 0:
            empty = torch.zeros(0, dtype=torch.long, device=s_hat.device)
            return ForwardTrace(
                s_hat=s_hat,
                frame_idx=empty,
                band_idx=empty,
                mod_used=empty,
                m_hat=s_hat.new_zeros((0, self.config.n_mods)),
                y_hat=s_hat.new_zeros((0, features.shape[1], self.config.max_order + 1)),
            )
        m_hat, y_hat, mod_used = self.analyze_bands(features, frame_idx, band_idx, mod_idx)
        return ForwardTrace(
            s_hat=s_hat,
            frame_idx=frame_idx,
            band_idx=band_idx,
            mod_used=mod_used,
            m_hat=m_hat,
            y_hat=y_hat,
        )

    @torch.no_grad()
    def analyze(self, coset_samples: np.ndarray) -> AnalysisResult:
        """Blind analysis of one frame's coset matrix (numpy in/out)."""
        x = unfold_complex(coset_samples[None], dtype=self.positions.dtype)
        x = x.to(self.positions.device)
        trace = self.forward_full(x)
        occupancy = (trace.s_hat[0] > 0.5).cpu().numpy()
        result = AnalysisResult(
            occupancy=occupancy, s_hat=trace.s_hat[0].cpu().numpy()
        )
        for r in range(trace.band_idx.numel()):
            mod_index = int(trace.mod_used[r])
            result.bands.append(
                BandReport(
                    band_index=int(trace.band_idx[r]),
                    mod_name=self.config.mod_names[mod_index],
                    mod_probs=trace.m_hat[r].cpu().numpy(),
                    symbols=emit_symbols(
                        trace.y_hat[r].cpu().numpy(), self.config.eos_class(mod_index)
                    ),
                )
            )
        return result


def emit_symbols(y_rows: np.ndarray, eos_class: int) -> np.ndarray:
    """Per-row argmax decisions cut at the first end-of-sequence hit."""
    picks = np.argmax(y_rows, axis=-1)
    hits = np.nonzero(picks == eos_class)[0]
    end = int(hits[0]) if hits.size else len(picks)
    return picks[:end]


def parameter_count(config: ModelConfig) -> int:
    """Closed-form parameter count; must agree with the instantiated model."""
    d, ff = config.d_model, config.d_ff
    per_layer = 4 * (d * d + d) + (d * ff + ff) + (ff * d + d) + 2 * 2 * d
    n_layers = config.n_layers_sense + config.n_layers_demod
    total = n_layers * per_layer
    total += 2 * config.n_channels * d + d            # sample embedding
    total += (config.n_slots + 1) * d                 # positions
    total += 2 * d                                    # the two [CLS] tokens
    total += config.n_bands * d                       # band-identification tokens
    total += d * config.n_bands + config.n_bands      # sensing head
    total += d * config.n_mods + config.n_mods        # modulation head
    total += sum(d * (m + 1) + (m + 1) for m in config.mod_orders)
    return total
