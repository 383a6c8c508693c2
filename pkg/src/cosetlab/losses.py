"""Multi-task training losses.

Three components, all computed on (clamped) output probabilities:

  - spectrum sensing: focal binary cross-entropy per sub-band, summed over
    bands and averaged over the batch.  The focal weight is
    ``w = S (1 - s_hat) + (1 - S) s_hat`` raised to ``theta``, so confident
    correct predictions are damped.  The conventional BCE pairing
    ``-S ln(s_hat) - (1 - S) ln(1 - s_hat)`` is the default; the swapped
    pairing is available behind a flag for fidelity experiments.
  - modulation classification: cross entropy over occupied-band replicas,
    normalized by the replica count.
  - demodulation: cross entropy over symbol positions 1..n_symbols plus the
    end-of-sequence position, normalized by the total number of scored
    positions; padding positions are excluded entirely.

Empty sub-bands never contribute to the classification or demodulation
terms, so growing the band map with unoccupied bands changes those losses
by exactly zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
from torch import Tensor

from .network import ModelConfig
from .scene import SceneSpec

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.1          # spectrum sensing
    beta: float = 0.1           # modulation classification
    gamma: float = 1.0          # demodulation
    theta: float = 2.0          # focal exponent
    printed_sense_pairing: bool = False

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.theta) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class BatchLabels:
    """Ground truth for one batch, replicas ordered by (frame, band).

    symbol_classes holds, per replica, the constellation index at positions
    0..n_symbols-1, the per-modulation end-of-sequence class at position
    n_symbols, and -1 (padding, excluded from the loss) afterwards."""

    occupancy: Tensor        # (B, n_bands) float 0/1
    frame_idx: Tensor        # (R,) long
    band_idx: Tensor         # (R,) long
    mod_idx: Tensor          # (R,) long
    symbol_classes: Tensor   # (R, n_positions) long, -1 marks padding
    n_symbols: Tensor        # (R,) long

    @property
    def n_replicas(self) -> int:
        return int(self.frame_idx.numel())


def build_labels(
    scenes: list[SceneSpec],
    config: ModelConfig,
    n_positions: int | None = None,
    device: torch.device | str = "cpu",
    dtype: torch.dtype = torch.float32,
) -> BatchLabels:
    """Assemble supervision targets from ground-truth scenes."""
    if n_positions is None:
        n_positions = config.n_slots + 1
    mod_index = {name: i for i, name in enumerate(config.mod_names)}

    occupancy = torch.zeros(len(scenes), config.n_bands, dtype=dtype)
    frame_idx, band_idx, mod_idx, rows, counts = [], [], [], [], []
    for f, scene in enumerate(scenes):
        for band in sorted(scene.bands, key=lambda b: b.band_index):
            n_symb = len(band.symbols)
            if n_symb + 1 > n_positions:
                raise ValueError(
                    f"{n_symb} symbols plus EOS exceed {n_positions} output positions"
                )
            occupancy[f, band.band_index] = 1.0
            frame_idx.append(f)
            band_idx.append(band.band_index)
            m = mod_index[band.modulation]
            mod_idx.append(m)
            row = torch.full((n_positions,), -1, dtype=torch.long)
            row[:n_symb] = torch.as_tensor(band.symbols, dtype=torch.long)
            row[n_symb] = config.eos_class(m)
            rows.append(row)
            counts.append(n_symb)

    as_long = lambda v: torch.as_tensor(v, dtype=torch.long, device=device)
    return BatchLabels(
        occupancy=occupancy.to(device),
        frame_idx=as_long(frame_idx),
        band_idx=as_long(band_idx),
        mod_idx=as_long(mod_idx),
        symbol_classes=(
            torch.stack(rows).to(device)
            if rows
            else torch.zeros(0, n_positions, dtype=torch.long, device=device)
        ),
        n_symbols=as_long(counts),
    )


def _clamped_log(p: Tensor) -> Tensor:
    return torch.log(p.clamp(PROB_EPS, 1.0))


def loss_sense(
    occupancy: Tensor, s_hat: Tensor, theta: float, printed_pairing: bool = False
) -> Tensor:
    """Focal binary cross-entropy, summed over sub-bands, batch-averaged."""
    if occupancy.shape != s_hat.shape:
        raise ValueError("occupancy / prediction shape mismatch")
    if bool((s_hat <= 0).any() or (s_hat >= 1).any()):
        logger.warning("sensing probabilities outside (0, 1); clamping to %g", PROB_EPS)
    p = s_hat.clamp(PROB_EPS, 1.0 - PROB_EPS)
    s = occupancy
    if printed_pairing:
        bce = -(s * torch.log(1.0 - p) + (1.0 - s) * torch.log(p))
    else:
        bce = -(s * torch.log(p) + (1.0 - s) * torch.log(1.0 - p))
    weight = s * (1.0 - p) + (1.0 - s) * p
    return (weight**theta * bce).sum(dim=1).mean()


def loss_mod(m_hat: Tensor, mod_idx: Tensor) -> Tensor:
    """Cross entropy over occupied-band replicas; 0 when there are none."""
    if mod_idx.numel() == 0:
        logger.debug("modulation loss over an empty replica set")
        return m_hat.new_zeros(())
    picked = m_hat.gather(1, mod_idx[:, None]).squeeze(1)
    return -_clamped_log(picked).mean()


def loss_demod(y_hat: Tensor, symbol_classes: Tensor) -> Tensor:
    """Cross entropy over symbol and EOS positions of occupied bands,
    normalized by the number of scored positions; 0 with no replicas."""
    if symbol_classes.numel() == 0:
        logger.debug("demodulation loss over an empty replica set")
        return y_hat.new_zeros(())
    scored = symbol_classes >= 0
    gathered = y_hat.gather(2, symbol_classes.clamp(min=0)[:, :, None]).squeeze(2)
    total = -( _clamped_log(gathered) * scored).sum()
    return total / scored.sum()


def loss_total(
    sense: Tensor, mod: Tensor, demod: Tensor, weights: LossWeights
) -> Tensor:
    return weights.alpha * sense + weights.beta * mod + weights.gamma * demod


def compute_losses(trace, labels: BatchLabels, weights: LossWeights) -> dict[str, Tensor]:
    """All loss components plus the weighted total for one forward trace."""
    sense = loss_sense(
        labels.occupancy, trace.s_hat, weights.theta, weights.printed_sense_pairing
    )
    mod = loss_mod(trace.m_hat, labels.mod_idx)
    n_positions = trace.y_hat.shape[1] if labels.n_replicas else labels.symbol_classes.shape[1]
    demod = loss_demod(trace.y_hat, labels.symbol_classes[:, :n_positions])
    return {
        "sense": sense,
        "mod": mod,
        "demod": demod,
        "total": loss_total(sense, mod, demod, weights),
    }
