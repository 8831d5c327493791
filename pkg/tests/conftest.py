import pytest

from sparse_ubi import datagen, subspace_id


@pytest.fixture(scope="session")
def noiseless_35():
    """Noiseless m=3, n=5, k=2, T=2000 instance shared by several modules."""
    cfg = datagen.GenConfig(m=3, n=5, T=2000, sigma_off=0.0, seed=11)
    return datagen.generate(cfg)


@pytest.fixture(scope="session")
def noiseless_35_ocs(noiseless_35):
    return subspace_id.identify_ocs(noiseless_35.X, 5, 2, seed=3)


# Acceptance verdicts, printed once at the end of the session.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
