import numpy as np
import pytest

from fingeo import invariants as inv
from fingeo.adnum import DomainError

from conftest import SHIPPED, probes, scenario


@pytest.mark.parametrize("name", SHIPPED)
def test_probe_checks_pass(name):
    s = scenario(name)
    x, y = probes(name, 1)[0]
    rows = inv.probe_checks(s, x, y, level=2)
    failed = [r for r in rows if not r.passed]
    assert not failed, failed
    ids = {r.id for r in rows}
    assert {"spray.route_spread", "curvature.ricci_routes", "maxwell.bianchi"} <= ids


def test_level_one_skips_curvature():
    s = scenario("coupled_weakfield")
    x, y = probes("coupled_weakfield", 1)[0]
    ids = {r.id for r in inv.probe_checks(s, x, y, level=1)}
    assert not any(i.startswith(("curvature.ricci", "maxwell.")) for i in ids)


def test_spacelike_probe_raises_domain_error():
    s = scenario("flat_vacuum")
    with pytest.raises(DomainError):
        inv.probe_checks(s, np.zeros(4), np.array([0.1, 1.0, 0, 0]), level=1)


def test_summarize_keeps_worst_and_failures():
    rows = [inv.Check.le("a", 1e-12, 1e-10), inv.Check.le("a", 1e-11, 1e-10),
            inv.Check.le("b", 1e-3, 1e-10), inv.Check.le("b", 1e-14, 1e-10)]
    table = {r.id: r for r in inv.summarize(rows)}
    assert table["a"].measured == 1e-11 and table["a"].passed
    assert not table["b"].passed


def test_rel_falls_back_to_absolute():
    assert inv.rel(np.array([1e-3]), np.zeros(1)) == 1e-3
    assert inv.rel(np.array([1e-3]), np.array([2.0])) == 5e-4
