"""Numerical tolerances, kept in one record so a run is reproducible from its config."""

from __future__ import annotations

import contextlib
import dataclasses
from contextvars import ContextVar


@dataclasses.dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12          # relative to 1 + max|entry|
    trace: float = 1e-10
    psd: float = 1e-10
    cutoff_rel: float = 1e-12         # p_i + p_j below cutoff_rel * max(p) is treated as zero
    rhs_consistency: float = 1e-8
    derivative_trace: float = 1e-8
    fd_step: float = 1e-5
    prob_floor: float = 1e-12
    singular_outcome: float = 1e-6
    povm_completeness: float = 1e-9
    qfi_condition: float = 1e-10
    weight_min: float = 1e-12
    classify: float = 1e-8
    gram_drop: float = 1e-10
    sdp_tol: float = 1e-9
    sdp_max_iter: int = 200
    holevo_gap: float = 1e-5
    jacobian_det: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()

_current: ContextVar[Tolerances] = ContextVar("qest_tolerances", default=DEFAULT_TOLERANCES)


def get_tolerances() -> Tolerances:
    return _current.get()


def parse_overrides(items) -> dict:
    """Turn ``["key=value", ...]`` into typed keyword overrides for :class:`Tolerances`."""
    fields = {f.name: f.type for f in dataclasses.fields(Tolerances)}
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in fields:
            raise KeyError(key)
        out[key] = int(float(value)) if fields[key] in (int, "int") else float(value)
    return out


@contextlib.contextmanager
def tolerances(**overrides):
    """Temporarily replace tolerance fields, e.g. ``with tolerances(classify=1e-6): ...``."""
    token = _current.set(dataclasses.replace(_current.get(), **overrides))
    try:
        yield _current.get()
    finally:
        _current.reset(token)
