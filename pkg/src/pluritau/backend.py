"""Kernel backend selection.

The env flag ``PLURITAU_BACKEND`` picks ``numba`` (default when importable)
or ``numpy``.  ``set_backend`` overrides at runtime, mainly for tests and
the benchmark script.
"""

import os

from . import _kernels_numpy

_active = None
_name = None


def _resolve(name: str):
    if name == "numpy":
        return _kernels_numpy, "numpy"
    if name == "numba":
        from . import _kernels_numba
        return _kernels_numba, "numba"
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")


def _default_name() -> str:
    env = os.environ.get("PLURITAU_BACKEND", "").strip().lower()
    if env:
        return env
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


def set_backend(name: str) -> None:
    global _active, _name
    _active, _name = _resolve(name)


def backend_name() -> str:
    if _name is None:
        set_backend(_default_name())
    return _name


def kernels():
    if _active is None:
        set_backend(_default_name())
    return _active


def eval_jet_batch(Z, mu, nu, coef):
    return kernels().eval_jet_batch(Z, mu, nu, coef)


def eval_holo_batch(Z, expo, coef):
    return kernels().eval_holo_batch(Z, expo, coef)


def ray_first_crossing(p, dirs, mu, nu, coef, level, t_hi, n_coarse, n_bisect):
    return kernels().ray_first_crossing(p, dirs, mu, nu, coef, level, t_hi,
                                        n_coarse, n_bisect)
