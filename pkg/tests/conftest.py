import numpy as np
import pytest

from romkit.skeleton import BONES, finger_chain


def random_frames(n, seed=0, scale=60.0):
    """n random (21, 3) joint sets whose bones, palm plane and phalanx
    projections are all comfortably non-degenerate."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        j = rng.normal(0.0, scale, size=(21, 3)) + rng.uniform(-300, 300, size=3)
        w = j[0]
        if np.linalg.norm(np.cross(j[5] - w, j[17] - w)) < 100.0:
            continue
        if min(np.linalg.norm(j[b] - j[a]) for a, b in BONES) < 1.0:
            continue
        nrm = np.cross(j[5] - w, j[17] - w)
        nrm /= np.linalg.norm(nrm)
        ok = True
        for f in range(1, 6):
            _, mcp, pip, _, _ = finger_chain(f)
            v = j[pip] - j[mcp]
            if np.linalg.norm(v - np.dot(v, nrm) * nrm) < 1.0:
                ok = False
        if ok:
            out.append(j)
    return np.array(out)


@pytest.fixture
def flat_hand():
    """Straight fingers lying in the z=0 plane, each continuing its metacarpal."""
    j = np.zeros((21, 3))
    dirs = {1: (0.6, 0.8), 2: (0.3, 1.0), 3: (0.0, 1.0), 4: (-0.25, 1.0), 5: (-0.5, 1.0)}
    for f, d in dirs.items():
        d = np.array([d[0], d[1], 0.0])
        d /= np.linalg.norm(d)
        chain = finger_chain(f)
        for k, dist in enumerate((60.0, 100.0, 130.0, 150.0)):
            j[chain[k + 1]] = d * dist
    return j


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
