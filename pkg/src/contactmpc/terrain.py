"""Terrain height profiles for planar contact simulation.

A terrain is a 1D height field z = height(x). Three kinds are supported:
flat, sinusoidal, and piecewise-linear. All profiles are defined for every
x (piecewise profiles clamp to their end segments) and expose the local
slope dheight/dx used by gap-row Jacobians.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TerrainProfile", "flat", "sinusoidal", "piecewise_linear"]


@dataclass(frozen=True)
class TerrainProfile:
    kind: str
    offset: float = 0.0
    amplitude: float = 0.0
    wavelength: float = 1.0
    phase: float = 0.0
    # piecewise-linear data: breakpoints (ascending x) and heights at them
    xs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ys: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def height(self, x):
        if self.kind == "flat":
            return self.offset * np.ones_like(np.asarray(x, dtype=float))
        if self.kind == "sinusoidal":
            x = np.asarray(x, dtype=float)
            return self.offset + self.amplitude * np.sin(
                2.0 * np.pi * x / self.wavelength + self.phase
            )
        if self.kind == "piecewise_linear":
            # np.interp clamps outside the breakpoint range, keeping the
            # profile defined (and continuous) for all x
            return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)
        raise ValueError(f"unknown terrain kind {self.kind!r}")

    def slope(self, x):
        if self.kind == "flat":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "sinusoidal":
            x = np.asarray(x, dtype=float)
            k = 2.0 * np.pi / self.wavelength
            return self.amplitude * k * np.cos(k * x + self.phase)
        if self.kind == "piecewise_linear":
            x = np.asarray(x, dtype=float)
            idx = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 2)
            dx = self.xs[idx + 1] - self.xs[idx]
            s = (self.ys[idx + 1] - self.ys[idx]) / dx
            # clamp regions outside the breakpoints are constant
            s = np.where((x < self.xs[0]) | (x > self.xs[-1]), 0.0, s)
            return s
        raise ValueError(f"unknown terrain kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "offset": self.offset}
        if self.kind == "sinusoidal":
            out.update(
                amplitude=self.amplitude, wavelength=self.wavelength, phase=self.phase
            )
        if self.kind == "piecewise_linear":
            out.update(xs=list(map(float, self.xs)), ys=list(map(float, self.ys)))
        return out

    @staticmethod
    def from_dict(d: dict) -> "TerrainProfile":
        kind = d["kind"]
        if kind == "flat":
            return flat(d.get("offset", 0.0))
        if kind == "sinusoidal":
            return sinusoidal(
                amplitude=d["amplitude"],
                wavelength=d["wavelength"],
                phase=d.get("phase", 0.0),
                offset=d.get("offset", 0.0),
            )
        if kind == "piecewise_linear":
            return piecewise_linear(d["xs"], d["ys"])
        raise ValueError(f"unknown terrain kind {kind!r}")


def flat(offset: float = 0.0) -> TerrainProfile:
    return TerrainProfile(kind="flat", offset=offset)


def sinusoidal(
    amplitude: float, wavelength: float, phase: float = 0.0, offset: float = 0.0
) -> TerrainProfile:
    return TerrainProfile(
        kind="sinusoidal",
        amplitude=amplitude,
        wavelength=wavelength,
        phase=phase,
        offset=offset,
    )


def piecewise_linear(xs, ys) -> TerrainProfile:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
        raise ValueError("piecewise terrain needs matching 1D breakpoint/height arrays")
    if not np.all(np.diff(xs) > 0):
        raise ValueError("breakpoints must be strictly increasing")
    return TerrainProfile(kind="piecewise_linear", xs=xs, ys=ys)
