"""Uniformly sampled functions on a periodic box [-L, L)^d, d in {1, 2}."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"KTGRID1\x00"
_HEADER = struct.Struct("<8sIIdI4x")  # magic, d, N, L, dtype flag; 32 bytes


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridFunction:
    d: int
    L: float
    N: int
    samples: np.ndarray

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"d must be 1 or 2, got {self.d}")
        if self.N < 8 or self.N & (self.N - 1):
            raise GridError(f"N must be a power of two >= 8, got {self.N}")
        if not (self.L > 0.0):
            raise GridError(f"L must be positive, got {self.L}")
        arr = np.asarray(self.samples)
        if arr.shape != (self.N,) * self.d:
            raise GridError(f"samples shape {arr.shape} != {(self.N,) * self.d}")
        if not np.all(np.isfinite(arr)):
            raise GridError("samples must be finite")
        if arr.dtype not in (np.float64, np.complex128):
            arr = arr.astype(np.float64)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    # -- geometry ------------------------------------------------------------

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    def axis(self) -> np.ndarray:
        """Sample coordinates along one axis: -L, -L+h, ..., L-h."""
        return -self.L + self.h * np.arange(self.N)

    def grid(self):
        if self.d == 1:
            return (self.axis(),)
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")

    def xi_axis(self) -> np.ndarray:
        """Angular frequencies pi*k/L in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    def lam_grid(self) -> np.ndarray:
        """|xi|^2 for every mode, same shape as samples."""
        xi = self.xi_axis()
        if self.d == 1:
            return xi * xi
        return (xi * xi)[:, None] + (xi * xi)[None, :]

    def norm2(self) -> float:
        """L2 norm with the cell-volume weight."""
        return float(np.sqrt(self.h**self.d * np.sum(np.abs(self.samples) ** 2)))

    def with_samples(self, samples: np.ndarray) -> "GridFunction":
        return GridFunction(self.d, self.L, self.N, samples)

    @classmethod
    def from_function(cls, fn, d: int, L: float, N: int) -> "GridFunction":
        g = cls(d, L, N, np.zeros((N,) * d))
        if d == 1:
            vals = fn(g.axis())
        else:
            vals = fn(*g.grid())
        return cls(d, L, N, np.asarray(vals, dtype=np.float64))

    # -- serialization -------------------------------------------------------

    def to_csv(self) -> str:
        cols = ",".join(f"index{i}" for i in range(self.d))
        lines = [f"{cols},value"]
        flat = self.samples.reshape(-1)
        if self.d == 1:
            for i, v in enumerate(flat):
                lines.append(f"{i},{_fmt(v)}")
        else:
            for idx, v in enumerate(flat):
                lines.append(f"{idx // self.N},{idx % self.N},{_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, L: float) -> "GridFunction":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        d = len(header) - 1
        if header != [f"index{i}" for i in range(d)] + ["value"]:
            raise GridError(f"bad CSV header {lines[0]!r}")
        vals = [complex(ln.rsplit(",", 1)[1]) for ln in lines[1:]]
        n = round(len(vals) ** (1.0 / d))
        arr = np.asarray(vals).reshape((n,) * d)
        if np.all(arr.imag == 0.0):
            arr = arr.real
        return cls(d, L, n, arr)

    def to_bytes(self) -> bytes:
        complex_flag = 1 if np.iscomplexobj(self.samples) else 0
        head = _HEADER.pack(_MAGIC, self.d, self.N, self.L, complex_flag)
        body = np.ascontiguousarray(self.samples).astype(
            "<c16" if complex_flag else "<f8").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        magic, d, n, L, flag = _HEADER.unpack(blob[:_HEADER.size])
        if magic != _MAGIC:
            raise GridError(f"bad magic {magic!r}")
        dtype = "<c16" if flag else "<f8"
        arr = np.frombuffer(blob[_HEADER.size:], dtype=dtype).reshape((n,) * d)
        return cls(d, L, n, arr.astype(np.complex128 if flag else np.float64))


def _fmt(v) -> str:
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        if v.imag == 0.0:
            return f"{v.real:.17g}"
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{float(v):.17g}"
