import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def box_muller(rng, n):
    """Independent Gaussian generator for oracle comparisons."""
    u1 = rng.random(n // 2 + 1)
    u2 = rng.random(n // 2 + 1)
    r = np.sqrt(-2 * np.log1p(-u1))
    return np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]


def hill_estimator(x, k):
    """Hill tail-index estimate from the k largest order statistics."""
    s = np.sort(np.abs(np.asarray(x)))[::-1]
    return 1.0 / np.mean(np.log(s[:k] / s[k]))


def gaussian_blob_map(h=192, w=256, ratio=9.0, sigma=20.0):
    yy, xx = np.mgrid[:h, :w]
    return (ratio * np.exp(-((xx - w / 4) ** 2 + (yy - h / 2) ** 2) / (2 * sigma ** 2))
            + np.exp(-((xx - 3 * w / 4) ** 2 + (yy - h / 2) ** 2) / (2 * sigma ** 2)))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
