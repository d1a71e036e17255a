import threading

import pytest

from qest.config import DEFAULT_TOLERANCES, get_tolerances, parse_overrides, tolerances
from qest.parallel import ordered_map


def test_defaults():
    t = get_tolerances()
    assert t is DEFAULT_TOLERANCES
    assert t.classify == 1e-8 and t.sdp_max_iter == 200 and t.prob_floor == 1e-12


def test_override_scope():
    with tolerances(classify=1e-6) as t:
        assert t.classify == 1e-6 and get_tolerances().classify == 1e-6
    assert get_tolerances().classify == 1e-8


def test_parse_overrides_types():
    out = parse_overrides(["classify=1e-6", "sdp_max_iter=50"])
    assert out == {"classify": 1e-6, "sdp_max_iter": 50}
    assert isinstance(out["sdp_max_iter"], int)
    with pytest.raises(KeyError):
        parse_overrides(["nonsense=1"])
    with pytest.raises(KeyError):
        parse_overrides(["classify"])
    with pytest.raises(ValueError):
        parse_overrides(["classify=abc"])


def test_overrides_reach_worker_threads():
    with tolerances(classify=3e-3):
        got = ordered_map(lambda _: get_tolerances().classify, range(8), threads=4)
    assert got == [3e-3] * 8


def test_ordered_map_keeps_order():
    seen = set()

    def f(x):
        seen.add(threading.get_ident())
        return x * x

    assert ordered_map(f, range(50), threads=4) == [x * x for x in range(50)]
    assert ordered_map(f, [], threads=4) == []
