import shutil
from pathlib import Path

import pytest

from nqr.config import AppConfig
from nqr.kb import load_kb
from nqr.pipeline import build_backends, embed_kb, save_prior_traces

DATA_DIR = Path(__file__).parent / "data"


def prepare_env(root: Path, kb_name: str = "kb.jsonl") -> AppConfig:
    """Copy a fixture KB into root and build its store and prior traces."""
    kb_path = root / "kb.jsonl"
    shutil.copy(DATA_DIR / kb_name, kb_path)
    config = AppConfig(
        kb_path=str(kb_path),
        embedding_store_path=str(root / "embeddings.bin"),
    )
    records = load_kb(kb_path)
    backends = build_backends(
        config, kb_texts=[q.text for q in records], need=("lm", "embedder")
    )
    store, priors, _ = embed_kb(records, backends.embedder, backends.lm)
    store.save(config.embedding_store_path)
    save_prior_traces(config.priors_path, backends.lm.name, priors)
    return config


@pytest.fixture(scope="session")
def fixture_env(tmp_path_factory) -> AppConfig:
    """Read-only artifact directory built from the 50-quote fixture KB."""
    return prepare_env(tmp_path_factory.mktemp("env"))


_criterion_outcomes: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    failed_setup = report.when == "setup" and report.outcome != "passed"
    if report.when == "call" or failed_setup:
        _criterion_outcomes.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_outcomes:
        return
    try:
        import test_acceptance
    except ImportError:
        test_acceptance = None
    terminalreporter.section("shipping criteria")
    for name, outcome in _criterion_outcomes:
        func = getattr(test_acceptance, name, None) if test_acceptance else None
        doc = func.__doc__.strip().splitlines()[0] if func and func.__doc__ else name
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"[{status}] {doc}")
