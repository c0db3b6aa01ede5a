import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES = []


_GRIDS = {}


def _grid(n, C):
    key = (n, C)
    if key not in _GRIDS:
        axis = np.arange(0.0, 1.0 + 1e-9, 1e-3 if n == 2 else 0.01)
        pts = np.array(list(itertools.product(axis, repeat=n))) if n > 2 else \
            np.stack([a.ravel() for a in np.meshgrid(axis, axis, indexing="ij")], axis=1)
        _GRIDS[key] = pts[pts.sum(axis=1) <= C + 1e-12]
    return _GRIDS[key]


def grid_projection(v, C):
    """Brute-force projection oracle for N in {2, 3}.

    A grid search locates the minimizer to within the grid step; the KKT
    candidates from every active set then give the exact point, and the grid
    value acts as a sanity check on the candidate.
    """
    v = np.asarray(v, dtype=float)
    pts = _grid(v.size, C)
    best = pts[np.argmin(((pts - v) ** 2).sum(axis=1))]
    exact = kkt_projection(v, C)
    assert ((exact - v) ** 2).sum() <= ((best - v) ** 2).sum() + 1e-12
    return exact


def kkt_projection(v, C):
    """Nearest point among the KKT candidates of all lower/upper/free splits."""
    v = np.asarray(v, dtype=float)
    best, dist = None, np.inf
    for split in itertools.product((0, 1, 2), repeat=v.size):
        split = np.array(split)
        free = split == 2
        for shifted in (False, True):
            y = np.where(split == 1, 1.0, 0.0)
            if free.any():
                y[free] = v[free]
                if shifted:
                    y[free] -= (y.sum() - C) / free.sum()
            ok = np.all(y >= -1e-12) and np.all(y <= 1 + 1e-12) and y.sum() <= C + 1e-9
            d = ((y - v) ** 2).sum()
            if ok and d < dist:
                best, dist = np.clip(y, 0, 1), d
    return best


@pytest.fixture
def acceptance():
    def record(number, passed, detail=""):
        line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
