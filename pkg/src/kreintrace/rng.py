"""Counter-based random streams for reproducible, order-independent sampling.

Every variate is a pure function of (seed, purpose, path, counter), so path
simulations can be chunked across any number of workers and still produce
bit-identical results.  The generator is a keyed sequence of splitmix64
finalizer rounds; normals come from the AS241 rational approximation to the
inverse normal CDF applied to one 53-bit uniform per draw.

The integer pipeline is frozen: the compiled kernels implement the exact same
recipe, and `tests/test_rng.py` pins known-answer values.
"""

from __future__ import annotations

import numpy as np

U64 = 0xFFFFFFFFFFFFFFFF

# stream-derivation keys (arbitrary odd constants, fixed forever)
_K_SEED = 0x243F6A8885A308D3
_K_PURPOSE = 0x9E3779B97F4A7C15
_K_PATH = 0xD1B54A32D192ED03
_K_CTR = 0xA0761D6478BD642F

# purpose tags, one per independent family of draws
PURPOSE_TRACE = 0
PURPOSE_HIT = 1
PURPOSE_BESSEL = 2
PURPOSE_WALK = 3
PURPOSE_BOOTSTRAP = 4
PURPOSE_PILOT = 5


def mix64(z: int) -> int:
    """splitmix64 finalizer (Stafford mix 13) on a 64-bit integer."""
    z &= U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64
    return z ^ (z >> 31)


def stream_key(seed: int, purpose: int, path: int) -> int:
    """Per-(seed, purpose, path) base key; draws hash a counter against it."""
    r = mix64((seed & U64) ^ _K_SEED)
    r = mix64(r ^ ((purpose * _K_PURPOSE) & U64))
    return mix64(r ^ ((path * _K_PATH) & U64))


def raw_u64(key: int, ctr: int) -> int:
    """One 64-bit draw for counter `ctr` under a stream key."""
    return mix64(mix64(key ^ ((ctr * _K_CTR) & U64)))


def u64_to_unit(x: int) -> float:
    """Map a 64-bit integer to the open interval (0, 1).

    The odd-numerator form (2k+1)/2^53 with k the top 52 bits is exactly
    representable and can never round to 0.0 or 1.0."""
    return ((x >> 12) * 2 + 1) * 2.0**-53


# ---------------------------------------------------------------------------
# vectorized variants (numpy uint64); identical bit streams to the scalar ones
# ---------------------------------------------------------------------------

def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_keys_np(seed: int, purpose: int, paths: np.ndarray) -> np.ndarray:
    r = mix64((seed & U64) ^ _K_SEED)
    r = mix64(r ^ ((purpose * _K_PURPOSE) & U64))
    keys = np.uint64(r) ^ (paths.astype(np.uint64) * np.uint64(_K_PATH))
    return _mix64_np(keys)


def raw_u64_np(keys: np.ndarray, ctrs) -> np.ndarray:
    # asarray so scalar counters take the (silently wrapping) array path
    ctrs = np.asarray(ctrs, dtype=np.uint64)
    x = keys ^ (ctrs * np.uint64(_K_CTR))
    return _mix64_np(_mix64_np(x))


def unit_np(x: np.ndarray) -> np.ndarray:
    k = (x >> np.uint64(12)) * np.uint64(2) + np.uint64(1)
    return k.astype(np.float64) * 2.0**-53


# ---------------------------------------------------------------------------
# AS241 (Wichura): double-precision inverse of the standard normal CDF.
# Shared coefficient tables; the compiled core replicates the same Horner
# evaluation so both backends agree bit-for-bit in the central branch.
# ---------------------------------------------------------------------------

A_CENT = (3.3871328727963666080e0, 1.3314166789178437745e2,
          1.9715909503065514427e3, 1.3731693765509461125e4,
          4.5921953931549871457e4, 6.7265770927008700853e4,
          3.3430575583588128105e4, 2.5090809287301226727e3)
B_CENT = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
          5.3941960214247511077e3, 2.1213794301586595867e4,
          3.9307895800092710610e4, 2.8729085735721942674e4,
          5.2264952788528545610e3)
C_MID = (1.42343711074968357734e0, 4.63033784615654529590e0,
         5.76949722146069140550e0, 3.64784832476320460504e0,
         1.27045825245236838258e0, 2.41780725177450611770e-1,
         2.27238449892691845833e-2, 7.74545014278341407640e-4)
D_MID = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
         6.89767334985100004550e-1, 1.48103976427480074590e-1,
         1.51986665636164571966e-2, 5.47593808499534494600e-4,
         1.05075007164441684324e-9)
E_TAIL = (6.65790464350110377720e0, 5.46378491116411436990e0,
          1.78482653991729133580e0, 2.96560571828504891230e-1,
          2.65321895265761230930e-2, 1.24266094738807843860e-3,
          2.71155556874348757815e-5, 2.01033439929228813265e-7)
F_TAIL = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
          1.48753612908506148525e-2, 7.86869131145613259100e-4,
          1.84631831751005468180e-5, 1.42151175831644588870e-7,
          2.04426310338993978564e-15)

_SPLIT1 = 0.425
_CONST1 = 0.180625
_SPLIT2 = 5.0
_CONST2 = 1.6


def _poly8(coef, x):
    """Degree-7 polynomial in Estrin form.

    The grouping is part of the reproducibility contract: the compiled core
    evaluates the same expression tree, so both backends round identically.
    """
    c0, c1, c2, c3, c4, c5, c6, c7 = coef
    x2 = x * x
    x4 = x2 * x2
    return ((c0 + c1 * x) + x2 * (c2 + c3 * x)
            + x4 * ((c4 + c5 * x) + x2 * (c6 + c7 * x)))


def ndtri(p: float) -> float:
    """Inverse standard normal CDF, AS241 double-precision branch."""
    q = p - 0.5
    if abs(q) <= _SPLIT1:
        r = _CONST1 - q * q
        return q * _poly8(A_CENT, r) / _poly8(B_CENT, r)
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= _SPLIT2:
        r = r - _CONST2
        x = _poly8(C_MID, r) / _poly8(D_MID, r)
    else:
        r = r - _SPLIT2
        x = _poly8(E_TAIL, r) / _poly8(F_TAIL, r)
    return -x if q < 0.0 else x


def ndtri_np(p: np.ndarray) -> np.ndarray:
    """Vectorized AS241, same branch structure and evaluation order."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    central = np.abs(q) <= _SPLIT1

    r_c = _CONST1 - q * q
    x = q * _poly8(A_CENT, r_c) / _poly8(B_CENT, r_c)

    pr = np.where(q < 0.0, p, 1.0 - p)
    # clamp so the masked-out lanes do not generate log warnings
    pr = np.where(central, 0.25, pr)
    r = np.sqrt(-np.log(pr))
    mid = r <= _SPLIT2
    r_m = r - _CONST2
    x_m = _poly8(C_MID, r_m) / _poly8(D_MID, r_m)
    r_t = r - _SPLIT2
    x_t = _poly8(E_TAIL, r_t) / _poly8(F_TAIL, r_t)
    x_tail = np.where(mid, x_m, x_t)
    x_tail = np.where(q < 0.0, -x_tail, x_tail)
    return np.where(central, x, x_tail)


def normals_np(seed: int, purpose: int, paths: np.ndarray,
               ctr0: int, n: int) -> np.ndarray:
    """Standard normals, shape (len(paths), n), draw j uses counter ctr0+j."""
    keys = stream_keys_np(seed, purpose, paths)[:, None]
    ctrs = (np.uint64(ctr0) + np.arange(n, dtype=np.uint64))[None, :]
    u = unit_np(raw_u64_np(keys, np.broadcast_to(ctrs, (len(paths), n))))
    return ndtri_np(u)


def normal(seed: int, purpose: int, path: int, ctr: int) -> float:
    """Scalar reference path for the same stream (used in tests)."""
    return float(ndtri(u64_to_unit(raw_u64(stream_key(seed, purpose, path), ctr))))
