import hashlib
import time
from pathlib import Path

import pytest

from mdforge.config import PipelineConfig
from mdforge.pipeline import cmd_dataset, cmd_eval, cmd_report, cmd_synth, cmd_train

ACCEPTANCE_SEEDS = (11, 22, 33)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            n, text = value
            prev = _criteria.get(n, (text, True))
            _criteria[n] = (text, prev[1] and report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, ok = _criteria[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")


@pytest.fixture
def criterion(request):
    def mark(n, text):
        request.node.user_properties.append(("criterion", (n, text)))

    return mark


def run_pipeline(cfg, out):
    timings = {}
    for name, stage in (
        ("synth", lambda: cmd_synth(cfg, out)),
        ("dataset", lambda: cmd_dataset(cfg, out)),
        ("train", lambda: cmd_train(cfg, out)),
        ("eval", lambda: cmd_eval(cfg, out)),
        ("report", lambda: cmd_report(Path(out) / "history.csv", out)),
    ):
        t0 = time.perf_counter()
        result = stage()
        timings[name] = time.perf_counter() - t0
        if name == "eval":
            metrics = result
    return metrics, timings


def tree_hashes(root):
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory):
    """Full default pipeline for each acceptance seed: ``{seed: (out_dir, metrics, timings)}``."""
    runs = {}
    for seed in ACCEPTANCE_SEEDS:
        out = tmp_path_factory.mktemp(f"run{seed}")
        cfg = PipelineConfig().with_seed(seed)
        metrics, timings = run_pipeline(cfg, out)
        runs[seed] = (out, metrics, timings)
    return runs
