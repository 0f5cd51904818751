"""Hypernetwork: SDF raster in, main-network parameter vector out.

A small conv encoder (4 stride-2 stages, widths 16/32/64/64, SiLU) feeds
two dense layers whose output is scaled by a 0.01 gain and added to a
learnable base parameter vector initialized like a standalone sine MLP, so
freshly emitted networks start in the well-conditioned small-weight regime.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .dataset import ObservationSpec
from .mainnet import MainNetArch, init_params, param_count

CONV_CHANNELS = (16, 32, 64, 64)
DENSE_HIDDEN = 128
HEAD_GAIN = 0.01


class HyperNet(nn.Module):
    def __init__(self, arch: MainNetArch, obs: ObservationSpec,
                 channels: tuple[int, ...] = CONV_CHANNELS,
                 dense_hidden: int = DENSE_HIDDEN,
                 head_gain: float = HEAD_GAIN, seed: int = 0):
        super().__init__()
        self.arch = arch
        self.obs = obs
        self.channels = tuple(channels)
        self.dense_hidden = dense_hidden
        self.head_gain = head_gain
        n_params = param_count(arch)

        with torch.random.fork_rng():
            torch.manual_seed(seed)
            convs = []
            c_in = 1
            size = obs.size
            for c_out in self.channels:
                convs.append(nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1))
                convs.append(nn.SiLU())
                c_in = c_out
                size = (size + 1) // 2
            self.encoder = nn.Sequential(*convs)
            self.flat_dim = c_in * size * size
            self.dense1 = nn.Linear(self.flat_dim, dense_hidden)
            self.dense2 = nn.Linear(dense_hidden, n_params)
        base = init_params(arch, np.random.default_rng(seed))
        self.theta_base = nn.Parameter(torch.from_numpy(base.astype(np.float32)))

    def forward(self, raster: torch.Tensor) -> torch.Tensor:
        """raster (B, h, w) SDF in meters -> theta (B, n_params)."""
        if raster.shape[-2:] != (self.obs.size, self.obs.size):
            raise ValueError(f"raster shape {tuple(raster.shape[-2:])} != "
                             f"configured {(self.obs.size, self.obs.size)}")
        z = (raster / self.obs.cap).unsqueeze(1)
        z = self.encoder(z).flatten(1)
        z = torch.nn.functional.silu(self.dense1(z))
        return self.theta_base + self.head_gain * self.dense2(z)


def hyper_forward(net: HyperNet, raster: np.ndarray) -> np.ndarray:
    """Deterministic single-raster inference; returns the flat parameter
    vector for the numpy main-network runtime."""
    with torch.no_grad():
        t = torch.from_numpy(np.ascontiguousarray(raster, dtype=np.float32))
        theta = net(t.unsqueeze(0))[0]
    return theta.numpy().astype(np.float64)


# ---------------------------------------------------------------------------
# HNET1 model container

_HNET_MAGIC = b"HNET1"
_VARIANTS = {"orn": 0, "on": 1}
_VARIANTS_BACK = {v: k for k, v in _VARIANTS.items()}


def save_hypernet(net: HyperNet, path, model_name: str) -> None:
    arch, obs = net.arch, net.obs
    with open(path, "wb") as fh:
        fh.write(_HNET_MAGIC)
        name = model_name.encode()
        fh.write(struct.pack("<B", len(name)))
        fh.write(name)
        fh.write(struct.pack("<II", arch.input_dim, len(arch.hidden_widths)))
        for w in arch.hidden_widths:
            fh.write(struct.pack("<I", w))
        fh.write(struct.pack("<fB", arch.omega0, _VARIANTS[arch.variant]))
        for lo, hi in zip(arch.norm_lo, arch.norm_hi):
            fh.write(struct.pack("<dd", lo, hi))
        fh.write(struct.pack("<Idd", obs.size, obs.resolution, obs.cap))
        fh.write(struct.pack("<I", len(net.channels)))
        for c in net.channels:
            fh.write(struct.pack("<I", c))
        fh.write(struct.pack("<If", net.dense_hidden, net.head_gain))
        for tensor in net.state_dict().values():
            fh.write(tensor.detach().numpy().astype("<f4").tobytes())


def load_hypernet(path) -> tuple[HyperNet, str]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != _HNET_MAGIC:
        raise ValueError("missing HNET1 magic")
    off = 5
    (name_len,) = struct.unpack_from("<B", blob, off)
    off += 1
    model_name = blob[off:off + name_len].decode()
    off += name_len
    input_dim, n_hidden = struct.unpack_from("<II", blob, off)
    off += 8
    widths = []
    for _ in range(n_hidden):
        (w,) = struct.unpack_from("<I", blob, off)
        widths.append(w)
        off += 4
    omega0, variant_tag = struct.unpack_from("<fB", blob, off)
    off += 5
    lo, hi = [], []
    for _ in range(input_dim):
        l, h = struct.unpack_from("<dd", blob, off)
        lo.append(l)
        hi.append(h)
        off += 16
    size, resolution, cap = struct.unpack_from("<Idd", blob, off)
    off += struct.calcsize("<Idd")
    (n_ch,) = struct.unpack_from("<I", blob, off)
    off += 4
    channels = []
    for _ in range(n_ch):
        (c,) = struct.unpack_from("<I", blob, off)
        channels.append(c)
        off += 4
    dense_hidden, head_gain = struct.unpack_from("<If", blob, off)
    off += 8
    arch = MainNetArch(input_dim=input_dim, hidden_widths=tuple(widths),
                       omega0=omega0, variant=_VARIANTS_BACK[variant_tag],
                       norm_lo=tuple(lo), norm_hi=tuple(hi))
    net = HyperNet(arch, ObservationSpec(size, resolution, cap),
                   channels=tuple(channels), dense_hidden=dense_hidden,
                   head_gain=head_gain)
    state = net.state_dict()
    for key, tensor in state.items():
        n = tensor.numel()
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
        if arr.size != n:
            raise ValueError("HNET1 weight payload truncated")
        off += 4 * n
        state[key] = torch.from_numpy(arr.copy()).view(tensor.shape)
    if off != len(blob):
        raise ValueError("HNET1 trailing bytes")
    net.load_state_dict(state)
    net.eval()
    return net, model_name
