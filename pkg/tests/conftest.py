import numpy as np
import pytest

from mems_galerkin import BoundaryCondition, Interval, OperatorSpec, build_grid, compute_spectrum


def make_basis(bc="navier", tau=0.0, N=256, K=16, domain=None, dim_n=1, beta=1.0, order=4):
    domain = domain or Interval(1.0)
    spec = OperatorSpec(beta, tau, 0.0, domain, bc, dim_n)
    return compute_spectrum(spec, build_grid(domain, dim_n, N), K, order)


@pytest.fixture(scope="session")
def navier():
    return make_basis()


@pytest.fixture(scope="session")
def navier_spec(navier):
    return navier.spec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance results: criterion -> list of (part, passed, detail)
ACCEPTANCE: dict = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance {criterion}{'/' + part if part else ''}] {status} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name + ': ' if name else ''}{'ok' if p else 'FAIL'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
