"""The small sine-activated residual MLP, evaluated from a flat parameter
vector.

The runtime implementation is plain numpy so the 200 Hz filter path carries
no autograd machinery; training mirrors these equations in torch (see
`training`). Parameters are packed layer-major, weights (row-major) then
bias per layer. Hidden layers compute ``sin(omega0 * (W z + b))``; the
output layer is linear, passed through an overflow-safe softplus for the
residual ("orn") variant and left as-is for the direct-value ("on")
ablation.

State inputs are normalized to [-1, 1] per dimension over the boxes carried
by the arch; input gradients are returned in SI units (the chain-rule
factor 2/(hi-lo) is applied internally).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAPER_HIDDEN_WIDTHS = (32, 32, 32, 16, 16, 16, 8, 8, 8)


@dataclass(frozen=True)
class MainNetArch:
    input_dim: int
    hidden_widths: tuple[int, ...] = PAPER_HIDDEN_WIDTHS
    omega0: float = 30.0
    variant: str = "orn"  # "orn": softplus output; "on": linear output
    norm_lo: tuple[float, ...] | None = None
    norm_hi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.variant not in ("orn", "on"):
            raise ValueError(f"unknown variant '{self.variant}'")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        lo = self.norm_lo if self.norm_lo is not None else (-1.0,) * self.input_dim
        hi = self.norm_hi if self.norm_hi is not None else (1.0,) * self.input_dim
        lo, hi = tuple(float(v) for v in lo), tuple(float(v) for v in hi)
        if len(lo) != self.input_dim or len(hi) != self.input_dim:
            raise ValueError("normalization box dims mismatch input_dim")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("normalization box must have hi > lo")
        object.__setattr__(self, "norm_lo", lo)
        object.__setattr__(self, "norm_hi", hi)

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per layer, hidden layers then the output layer."""
        dims = (self.input_dim, *self.hidden_widths, 1)
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]


def param_count(arch: MainNetArch) -> int:
    return sum(o * i + o for o, i in arch.layer_shapes())


def split_params(arch: MainNetArch, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) per layer into the flat vector."""
    theta = np.asarray(theta)
    if theta.ndim != 1 or theta.size != param_count(arch):
        raise ValueError(f"parameter vector must have length {param_count(arch)}, "
                         f"got {theta.shape}")
    out = []
    off = 0
    for o, i in arch.layer_shapes():
        w = theta[off:off + o * i].reshape(o, i)
        off += o * i
        b = theta[off:off + o]
        off += o
        out.append((w, b))
    return out


def init_params(arch: MainNetArch, rng: np.random.Generator) -> np.ndarray:
    """Fan-in-scaled uniform init for sine networks: first layer U(+-1/n),
    deeper layers U(+-sqrt(6/fan_in)/omega0)."""
    chunks = []
    for k, (o, i) in enumerate(arch.layer_shapes()):
        bound = 1.0 / i if k == 0 else np.sqrt(6.0 / i) / arch.omega0
        chunks.append(rng.uniform(-bound, bound, size=o * i))
        chunks.append(rng.uniform(-bound, bound, size=o))
    return np.concatenate(chunks)


def softplus(z):
    """log(1 + exp(z)), overflow-safe on both tails."""
    return np.logaddexp(0.0, np.asarray(z, dtype=np.float64))


def normalize_state(arch: MainNetArch, x: np.ndarray) -> np.ndarray:
    lo = np.asarray(arch.norm_lo)
    hi = np.asarray(arch.norm_hi)
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def _norm_scale(arch: MainNetArch) -> np.ndarray:
    lo = np.asarray(arch.norm_lo)
    hi = np.asarray(arch.norm_hi)
    return 2.0 / (hi - lo)


def main_forward_batch(arch: MainNetArch, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Network output at states x (B, n): residual r >= 0 for "orn",
    raw value for "on"."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    layers = split_params(arch, theta)
    z = normalize_state(arch, x)
    for w, b in layers[:-1]:
        z = np.sin(arch.omega0 * (z @ w.T + b))
    w, b = layers[-1]
    out = (z @ w.T + b)[:, 0]
    if arch.variant == "orn":
        return softplus(out)
    return out


def main_forward(arch: MainNetArch, theta: np.ndarray, x) -> float:
    return float(main_forward_batch(arch, theta, np.asarray(x, dtype=np.float64)[None, :])[0])


def main_input_gradient_batch(arch: MainNetArch, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact reverse-sweep d(output)/dx (B, n), in SI state units."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    layers = split_params(arch, theta)
    z = normalize_state(arch, x)
    pre_acts = []
    for w, b in layers[:-1]:
        a = z @ w.T + b
        pre_acts.append(a)
        z = np.sin(arch.omega0 * a)
    w_out, b_out = layers[-1]
    out_pre = (z @ w_out.T + b_out)[:, 0]

    if arch.variant == "orn":
        g = (1.0 / (1.0 + np.exp(-out_pre)))[:, None] * w_out  # (B, last_width)
    else:
        g = np.broadcast_to(w_out, (x.shape[0], w_out.shape[1])).copy()
    for (w, _), a in zip(reversed(layers[:-1]), reversed(pre_acts)):
        g = (g * (arch.omega0 * np.cos(arch.omega0 * a))) @ w
    return g * _norm_scale(arch)


def main_input_gradient(arch: MainNetArch, theta: np.ndarray, x) -> np.ndarray:
    return main_input_gradient_batch(arch, theta, np.asarray(x, dtype=np.float64)[None, :])[0]
