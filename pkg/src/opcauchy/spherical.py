"""Spherical-mean realization of the sine-type propagator in three dimensions.

On a periodic grid the mean of u over the sphere of radius R centered at x
is a weighted sum of translates u(x + R s_i); translation of a band-limited
field is exact in spectral space.  This route never touches the scalar
sinh multiplier, so it cross-checks the spectral path independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .multiplier import Field
from .symbol_poly import wavevectors

FULL_SOLID_ANGLE = 4.0 * np.pi


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Positive-weight nodes on the unit sphere; weights sum to 4 pi."""

    nodes: np.ndarray  # (M, 3) unit vectors
    weights: np.ndarray  # (M,)
    order: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - FULL_SOLID_ANGLE) > 1e-10 * FULL_SOLID_ANGLE:
            raise ValueError("weights must sum to the full solid angle")

    @classmethod
    def gauss_product(cls, order):
        """Gauss-Legendre in cos(theta) times a uniform azimuthal rule.

        Exact for spherical harmonics up to the given degree.
        """
        order = int(order)
        n_theta = (order + 2) // 2
        n_phi = order + 1
        ct, wt = np.polynomial.legendre.leggauss(n_theta)
        st = np.sqrt(1.0 - ct * ct)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        nodes = np.stack(
            [
                np.outer(st, np.cos(phi)).ravel(),
                np.outer(st, np.sin(phi)).ravel(),
                np.outer(ct, np.ones(n_phi)).ravel(),
            ],
            axis=1,
        )
        weights = np.outer(wt, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
        return cls(nodes, weights, order)


def _require_3d(u: Field):
    if u.dim != 3:
        raise ValueError("spherical means are implemented for 3-D fields only")


def sphere_mean(u: Field, center, radius, q: SphereQuadrature):
    """Mean of u over the sphere of given center and radius (periodic wrap).

    Off-grid samples use trigonometric interpolation, exact for band-limited
    fields.  radius = 0 returns the interpolated value at the center.
    """
    _require_3d(u)
    center = np.asarray(center, dtype=float)
    uhat = (np.fft.fftn(u.data) / u.data.size).ravel()
    kmesh = wavevectors(u.shape)
    kflat = np.stack([k.ravel() for k in kmesh], axis=1)  # (modes, 3)
    if radius == 0:
        phase = np.exp(1j * 2 * np.pi * kflat @ (center / np.asarray(u.box)))
        return complex(uhat @ phase)
    pts = center[None, :] + radius * q.nodes  # (M, 3)
    scaled = 2 * np.pi * pts / np.asarray(u.box)[None, :]
    phases = np.exp(1j * (kflat @ scaled.T))  # (modes, M)
    vals = uhat @ phases
    return complex(np.sum(q.weights * vals) / FULL_SOLID_ANGLE)


def sinhc_spherical(u: Field, a, t, q: SphereQuadrature) -> Field:
    """t times the spherical mean of u at radius a t, at every grid point.

    This is the three-dimensional integral realization of the sine-type
    propagator applied to u.
    """
    _require_3d(u)
    if a <= 0:
        raise ValueError("propagation speed a must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    uhat = np.fft.fftn(u.data)
    kmesh = wavevectors(u.shape)
    mult = np.zeros(u.shape, dtype=complex)
    box = np.asarray(u.box)
    for s, w in zip(q.nodes, q.weights):
        shift = a * t * s
        arg = sum(2 * np.pi * kmesh[d] * (shift[d] / box[d]) for d in range(3))
        mult += w * np.exp(1j * arg)
    mult *= t / FULL_SOLID_ANGLE
    return Field(u.shape, u.box, np.fft.ifftn(uhat * mult))
