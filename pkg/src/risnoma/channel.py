"""Node placement, path loss, and spatially correlated block-fading channels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import complex_normal


class GeometryError(ValueError):
    """Raised for physically meaningless geometry (e.g. distance below d0)."""


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.z])):
            raise GeometryError(f"non-finite position {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class PathLossParams:
    c0_db: float = -30.0
    alpha_direct: float = 3.5
    alpha_bs_ris: float = 2.2
    alpha_ris_user: float = 2.2
    d0: float = 1.0

    def __post_init__(self):
        if min(self.alpha_direct, self.alpha_bs_ris, self.alpha_ris_user) <= 0:
            raise GeometryError("path-loss exponents must be positive")
        if self.d0 != 1.0:
            raise GeometryError("reference distance d0 is fixed at 1 m")


def path_loss(d, alpha: float, c0_db: float, d0: float = 1.0):
    """Linear power gain ``10^(c0/10) * (d/d0)^-alpha``; ``d`` may be an array."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < d0):
        raise GeometryError(f"distance below reference distance {d0} m: {d}")
    out = 10.0 ** (c0_db / 10.0) * (d_arr / d0) ** (-alpha)
    return float(out) if out.ndim == 0 else out


def grid_positions(m: int, spacing: float) -> np.ndarray:
    """Element coordinates (in wavelengths) on a near-square rectangular grid."""
    cols = int(np.ceil(np.sqrt(m)))
    idx = np.arange(m)
    return np.stack([idx % cols, idx // cols], axis=1) * spacing


def correlation_matrix(m: int, spacing: float) -> np.ndarray:
    """Isotropic-scattering correlation ``R[m,n] = sinc(2 d_mn)`` with
    distances in wavelengths.

    The kernel is real, so the (Hermitian) matrix is returned as float.
    """
    if m < 1:
        raise GeometryError(f"element count must be >= 1, got {m}")
    if not spacing > 0:
        raise GeometryError(f"element spacing must be positive, got {spacing}")
    pos = grid_positions(m, spacing)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    return np.sinc(2.0 * dist)  # np.sinc(x) = sin(pi x)/(pi x)


def psd_sqrt(r: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, clamping negative eigenvalues."""
    r = 0.5 * (r + r.conj().T)
    w, v = np.linalg.eigh(r)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def place_users(k: int, rng: np.random.Generator, bs: np.ndarray, ris: np.ndarray,
                r_min: float = 200.0, r_max: float = 500.0) -> np.ndarray:
    """Drop ``k`` ground users at distance U[r_min, r_max] from the BS on the
    far side of the RIS (x beyond the RIS x coordinate).

    Users are drawn one at a time, so the first ``k`` users of a larger
    draw are identical for the same generator state.
    """
    users = []
    while len(users) < k:
        r = rng.uniform(r_min, r_max)
        ang = rng.uniform(-np.pi / 2, np.pi / 2)
        p = bs + np.array([r * np.cos(ang), r * np.sin(ang), 0.0])
        p[2] = 0.0
        if p[0] >= ris[0]:
            users.append(p)
    return np.array(users).reshape(k, 3)


@dataclass
class ChannelRealization:
    """One block-fading draw: direct ``(K,)``, BS->RIS ``(M,)``, RIS->user ``(K, M)``."""

    h_direct: np.ndarray
    h_bs_ris: np.ndarray
    h_ris_user: np.ndarray

    def __post_init__(self):
        k, m = self.h_ris_user.shape
        if self.h_direct.shape != (k,) or self.h_bs_ris.shape != (m,):
            raise ValueError("channel dimensions are inconsistent")

    @property
    def k(self) -> int:
        return self.h_direct.shape[0]

    @property
    def m(self) -> int:
        return self.h_bs_ris.shape[0]


class ChannelModel:
    """Precomputed large-scale gains and correlation root for one geometry."""

    def __init__(self, bs, ris, users, n_elements: int, pl: PathLossParams = PathLossParams(),
                 element_spacing: float = 0.25, element_area: float = 1.0):
        self.bs = np.asarray(bs, dtype=float)
        self.ris = np.asarray(ris, dtype=float)
        self.users = np.asarray(users, dtype=float)
        if self.ris[2] <= 0:
            raise GeometryError("RIS must be mounted above ground (z > 0)")
        self.m = n_elements
        self.k = len(self.users)
        d_bk = np.linalg.norm(self.users - self.bs, axis=1)
        d_bs = np.linalg.norm(self.ris - self.bs)
        d_sk = np.linalg.norm(self.users - self.ris, axis=1)
        self.gain_direct = path_loss(d_bk, pl.alpha_direct, pl.c0_db, pl.d0)
        self.gain_bs_ris = element_area * path_loss(d_bs, pl.alpha_bs_ris, pl.c0_db, pl.d0)
        self.gain_ris_user = element_area * path_loss(d_sk, pl.alpha_ris_user, pl.c0_db, pl.d0)
        self.correlation = correlation_matrix(n_elements, element_spacing)
        self.corr_root = psd_sqrt(self.correlation)


def sample_channels(rng: np.random.Generator, model: ChannelModel,
                    ris_rng: np.random.Generator | None = None) -> ChannelRealization:
    """Draw one fading block.

    Direct links come from ``rng``; RIS links come from ``ris_rng`` (falls
    back to ``rng``). Keeping them on separate streams makes the direct
    links independent of the RIS size.
    """
    ris_rng = rng if ris_rng is None else ris_rng
    h_direct = np.sqrt(model.gain_direct) * complex_normal(rng, model.k)
    w_bs = complex_normal(ris_rng, model.m)
    w_sk = complex_normal(ris_rng, (model.k, model.m))
    h_bs_ris = np.sqrt(model.gain_bs_ris) * (model.corr_root @ w_bs)
    h_ris_user = np.sqrt(model.gain_ris_user)[:, None] * (w_sk @ model.corr_root.T)
    return ChannelRealization(h_direct, h_bs_ris, h_ris_user)
