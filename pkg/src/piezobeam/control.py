"""Static boundary feedback built from collocated velocity observations.

Every active channel ``i`` applies ``u_i = -k_i * y_i`` with ``y_i = c_i . q'``.
For collocated channels ``c_i`` is the channel's own load vector, so the
closed loop adds the symmetric damping ``k_i * b_i b_i^T`` and the energy
decays at the rate ``-sum k_i y_i^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Sequence

import numpy as np

from .errors import ConfigError
from .models import DiscreteSystem, ModelKind

__all__ = ["FeedbackLaw", "LAW_CHANNELS", "observe", "close_loop"]

# channel order of each named law; this is also the order of ``--gains``
LAW_CHANNELS = {
    ModelKind.FULL: {"full": ("g1", "V", "M", "g")},
    ModelKind.RN_DYNAMIC: {"full": ("g1", "V", "M", "g"), "sliding": ("g1", "V")},
    ModelKind.RN_STATIC: {"full": ("g1", "V", "M", "g"), "reduced": ("g1", "V", "M")},
    ModelKind.MM_DYNAMIC: {"full": ("V",)},
    ModelKind.MM_STATIC: {"pxi": ("V",), "collocated": ("V",)},
}

DEFAULT_VARIANT = {
    ModelKind.FULL: "full",
    ModelKind.RN_DYNAMIC: "full",
    ModelKind.RN_STATIC: "reduced",
    ModelKind.MM_DYNAMIC: "full",
    ModelKind.MM_STATIC: "pxi",
}


@dataclass(frozen=True)
class FeedbackLaw:
    """Gain assignment for one model.

    Parameters
    ----------
    kind : ModelKind
    gains : dict
        Channel name -> nonnegative gain. Channels with zero gain are inactive.
    variant : str
        Named channel set. For the electrostatic sandwich model ``"pxi"``
        (default) feeds back the resolvent of the tip slope rate, and
        ``"collocated"`` feeds back the full collocated observation (the
        resolvent term plus the weighted tip slope rate).
    """

    kind: ModelKind
    gains: Dict[str, float] = field(default_factory=dict)
    variant: str = ""

    def __post_init__(self):
        kind = ModelKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        variant = self.variant or DEFAULT_VARIANT[kind]
        object.__setattr__(self, "variant", variant)
        allowed = LAW_CHANNELS[kind].get(variant)
        if allowed is None:
            raise ConfigError(f"{kind.value} has no feedback variant {variant!r}")
        for ch, k in self.gains.items():
            if ch not in allowed:
                raise ConfigError(f"channel {ch!r} not in {variant} law of {kind.value}")
            if not (np.isfinite(k) and k >= 0):
                raise ConfigError(f"gain for {ch!r} must be >= 0, got {k!r}")

    @classmethod
    def from_list(cls, kind, gains: Sequence[float], variant: str = "") -> "FeedbackLaw":
        """Gains listed in the law's channel order."""
        kind = ModelKind.parse(kind)
        variant = variant or DEFAULT_VARIANT[kind]
        chans = LAW_CHANNELS[kind].get(variant)
        if chans is None:
            raise ConfigError(f"{kind.value} has no feedback variant {variant!r}")
        if len(gains) != len(chans):
            raise ConfigError(f"{kind.value}/{variant} expects {len(chans)} gains "
                              f"({', '.join(chans)}), got {len(gains)}")
        return cls(kind, dict(zip(chans, map(float, gains))), variant)

    @classmethod
    def unit(cls, kind, variant: str = "") -> "FeedbackLaw":
        kind = ModelKind.parse(kind)
        variant = variant or DEFAULT_VARIANT[kind]
        return cls(kind, {ch: 1.0 for ch in LAW_CHANNELS[kind][variant]}, variant)

    @property
    def active(self) -> Dict[str, float]:
        return {ch: k for ch, k in self.gains.items() if k > 0}


def _observation_rows(sys_: DiscreteSystem, law: FeedbackLaw) -> Dict[str, np.ndarray]:
    rows = {}
    for ch in LAW_CHANNELS[law.kind][law.variant]:
        if ch not in sys_.inputs:
            raise ConfigError(f"channel {ch!r} missing from {sys_.kind.value} system")
        if law.kind == ModelKind.MM_STATIC and law.variant == "pxi":
            rows[ch] = sys_.extra["pxi_row"]
        else:
            rows[ch] = sys_.outputs[ch]
    return rows


def observe(sys_: DiscreteSystem, state: np.ndarray, law: FeedbackLaw | None = None) -> Dict[str, float]:
    """Channel readings of a state ``[q, q']``.

    Without a law, every input channel of the system is read collocated.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[0] != sys_.dim:
        raise ValueError(f"state has {state.shape[0]} entries, system needs {sys_.dim}")
    v = state[sys_.n:]
    if law is None:
        rows = sys_.outputs
    else:
        if law.kind != sys_.kind:
            raise ConfigError(f"law for {law.kind.value} applied to {sys_.kind.value}")
        rows = _observation_rows(sys_, law)
    return {ch: float(r @ v) for ch, r in rows.items()}


def close_loop(sys_: DiscreteSystem, law: FeedbackLaw) -> DiscreteSystem:
    """Closed-loop system with ``u = -diag(k) y``.

    Only channels with positive gain alter the damping matrix, so an
    all-zero law returns matrices identical to the open loop.
    """
    if law.kind != sys_.kind:
        raise ConfigError(f"law for {law.kind.value} applied to {sys_.kind.value}")
    rows = _observation_rows(sys_, law)
    D = sys_.D
    active = law.active
    if active:
        D = D.copy()
        for ch, k in active.items():
            D += k * np.outer(sys_.inputs[ch], rows[ch])
    return replace(
        sys_, D=D, gains=dict(active),
        outputs={ch: rows[ch] for ch in rows},
        inputs={ch: sys_.inputs[ch] for ch in rows},
        extra={**sys_.extra, "law": law},
    )
