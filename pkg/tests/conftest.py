import numpy as np
import pytest

from signbench.harness.synthetic import make_sign_dataset, write_dataset


@pytest.fixture(scope="session")
def tiny_signs():
    """Three sign classes, 12 images each, at 64 x 64."""
    return make_sign_dataset(12, 3, seed=1, size=64)


@pytest.fixture(scope="session")
def tiny_signs_dir(tmp_path_factory):
    """Two small class-per-directory datasets on disk: (train_root, test_root)."""
    base = tmp_path_factory.mktemp("signs")
    train = write_dataset(make_sign_dataset(6, 3, seed=2, size=32), base / "train", "ppm")
    test = write_dataset(make_sign_dataset(3, 3, seed=3, size=32), base / "test", "png")
    return train, test


def tree_bytes(root):
    """``{relative path: bytes}`` for every file under ``root``."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, summary):
    """``ok`` is True, False or None (not run)."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {number}: {status} - {summary}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
