import numpy as np
import pytest

from graphcl_dta.config import RunConfig
from graphcl_dta.data import load_dataset
from graphcl_dta.synthetic import davis_like, write_dataset
from graphcl_dta.train import TrainState, evaluate, fit

OVERFIT_EPOCHS = 300


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture64_paths(tmp_path_factory):
    """64-sample Davis-shaped fixture (8 drugs x 8 targets)."""
    return write_dataset(tmp_path_factory.mktemp("fx64"), *davis_like(8, 8, seed=0))


@pytest.fixture(scope="session")
def fixture64(fixture64_paths):
    p = fixture64_paths
    return load_dataset(p["drugs"], p["targets"], p["affinities"], name="fx64")


@pytest.fixture(scope="session")
def small_paths(tmp_path_factory):
    """48 samples with short proteins, for quick training-loop tests."""
    return write_dataset(tmp_path_factory.mktemp("small"), *davis_like(8, 6, seed=3, min_len=60, max_len=120))


@pytest.fixture(scope="session")
def small_ds(small_paths):
    p = small_paths
    return load_dataset(p["drugs"], p["targets"], p["affinities"], name="small")


def quick_config(**kw) -> RunConfig:
    base = dict(epochs=3, batch_size=16, max_protein_length=100, drug_dim=16, target_dim=16, embed_dim=16,
                conv_channels=[8, 8, 8], kernel_size=5)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def overfit_run(fixture64):
    """The default-config overfit run on the 64-sample fixture; shared because it takes ~1.5 min."""
    import time

    cfg = RunConfig(epochs=OVERFIT_EPOCHS)
    state = TrainState.fresh(cfg)
    idx = np.arange(len(fixture64))
    t0 = time.perf_counter()
    fit(state, fixture64, idx)
    seconds = time.perf_counter() - t0
    report = evaluate(state.model, fixture64, idx, cfg, label="train")
    return state, report, seconds


def chain_smiles(i: int, length: int = 6) -> str:
    """Distinct acyclic chain SMILES; base-4 digits of ``i`` pick C/N/O/S."""
    out = []
    for _ in range(length):
        out.append("CNOS"[i % 4])
        i //= 4
    return "C" + "".join(out)


def benchmark_rows(n_drugs: int, n_targets: int, n_samples: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    drugs = [(f"D{i}", chain_smiles(i)) for i in range(n_drugs)]
    targets = [(f"T{j}", "".join(rng.choice(list("ACDEFGHIKLMNPQRSTVWY"), 40))) for j in range(n_targets)]
    total = n_drugs * n_targets
    keep = np.arange(total) if n_samples == total else np.sort(rng.choice(total, n_samples, replace=False))
    aff = [(f"D{k // n_targets}", f"T{k % n_targets}", round(float(v), 3))
           for k, v in zip(keep, rng.uniform(5, 10.8, len(keep)))]
    return drugs, targets, aff


@pytest.fixture(scope="session")
def davis_scale_paths(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("davis_scale"), *benchmark_rows(68, 442, 30056))


@pytest.fixture(scope="session")
def kiba_scale_paths(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("kiba_scale"), *benchmark_rows(2111, 229, 118254))


_GATE: list[tuple[str, bool, str]] = []


class Gate:
    """Collects one pass/fail line per acceptance criterion."""

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        _GATE.append((name, bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def gate():
    return Gate()


def pytest_terminal_summary(terminalreporter):
    if not _GATE:
        return
    terminalreporter.section("acceptance")
    for name, ok, detail in _GATE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
