import hashlib
import json
import os
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pytest

import icascope
from icascope import synthgen as S
from icascope.nn.network import CATEGORIES, build_architecture
from icascope.nn.serialize import load_model, save_model
from icascope.nn.train import History, TrainConfig, train

# desk-scale table1-preset corpus used by the acceptance suite
CORPUS_SCALE = 0.25
CORPUS_SEED = 7
TRAIN_CFG = TrainConfig(max_epochs=100, patience=5, seed=0)
CACHE_DIR = Path(__file__).parent / ".model_cache"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    # anything touching the trained CNNs or the full corpus is slow on a cold cache
    for item in items:
        if {"trained", "registry", "table1_corpus"} & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)


def _source_digest():
    """Hash of the package sources and assets plus the training setup."""
    h = hashlib.sha256()
    root = Path(icascope.__file__).parent
    for p in sorted(root.rglob("*")):
        if p.suffix in (".py", ".csv"):
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    h.update(repr((CORPUS_SCALE, CORPUS_SEED, asdict(TRAIN_CFG))).encode())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def table1_corpus():
    imgs, labels, archetypes = S.render_corpus(S.table1_counts(CORPUS_SCALE), seed=CORPUS_SEED)
    return imgs.transpose(0, 3, 1, 2), labels, archetypes


@pytest.fixture(scope="session")
def trained(table1_corpus):
    """The three CNNs trained on the table1-preset corpus: {category: (model, history, seconds)}.

    Results are cached under tests/.model_cache keyed by the package source
    hash; set ICASCOPE_RETRAIN=1 to ignore the cache.
    """
    imgs, labels, _ = table1_corpus
    cache = CACHE_DIR / _source_digest()
    use_cache = os.environ.get("ICASCOPE_RETRAIN") != "1"
    out = {}
    for cat in CATEGORIES:
        mpath, hpath = cache / f"{cat}.model", cache / f"{cat}.json"
        if use_cache and mpath.exists() and hpath.exists():
            meta = json.loads(hpath.read_text())
            out[cat] = (load_model(mpath), History(**meta["history"]), meta["seconds"])
            continue
        idx, y = S.one_vs_rest(labels, cat, seed=0)
        t0 = time.perf_counter()
        model, hist = train(build_architecture(cat), imgs[idx], y, TRAIN_CFG, cat)
        seconds = time.perf_counter() - t0
        cache.mkdir(parents=True, exist_ok=True)
        save_model(model, mpath)
        hpath.write_text(json.dumps({"history": asdict(hist), "seconds": seconds}))
        # the float32 file is what later sessions see, so hand out the reloaded copy
        out[cat] = (load_model(mpath), hist, seconds)
    return out


@pytest.fixture(scope="session")
def registry(trained):
    from icascope.framework import Registry
    reg = Registry()
    for cat, (model, _, _) in trained.items():
        reg = reg.register(model, cat)
    return reg


# ----------------------------------------------------------- acceptance report

_criteria = {}


@pytest.fixture
def report(request):
    """Attach a one-line measurement summary to an acceptance criterion."""
    def note(text):
        request.node.user_properties.append(("detail", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "ran": False,
                                          "detail": [], "duration": 0.0})
    if rep.when in ("setup", "call"):
        # setup time counts too: it includes training for the classification criterion
        entry["duration"] += rep.duration
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry["ran"] = True
        entry["passed"] &= rep.passed
        entry["detail"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["ran"] and e["passed"] else ("FAIL" if e["ran"] else "NOT RUN")
        detail = "; ".join(e["detail"])
        terminalreporter.write_line(
            f"[{status}] {number}. {e['title']} ({e['duration']:.1f} s){': ' + detail if detail else ''}")
