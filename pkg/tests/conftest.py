import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion, printed after the run

_ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    def record(criterion: int, passed: bool, detail: str):
        _ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[k]
        ok = all(p for p, _ in parts)
        if len(parts) > 3:
            failing = [d for p, d in parts if not p]
            detail = f"{len(parts) - len(failing)}/{len(parts)} sub-checks pass"
            if failing:
                detail += "; failing: " + "; ".join(failing)
        else:
            detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
