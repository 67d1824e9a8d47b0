import json
import time

import numpy as np
import pytest

from etconsensus import bounds as bounds_mod
from etconsensus import engine
from etconsensus.cli import demo_paper_path, load_scenario_dict


def paper_scenario_dict(**overrides):
    raw = json.loads(demo_paper_path().read_text())
    raw.update(overrides)
    return raw


def make_scenario(**overrides):
    return load_scenario_dict(paper_scenario_dict(**overrides))


def chain_scenario_dict(**overrides):
    """Two agents, 1 -> 2, lossless and delay-free by default."""
    raw = {
        "adjacency": [[0, 0], [1, 0]],
        "x0": [[1.0], [-1.0]],
        "beta": 1.0, "lambda": 0.1, "delta_bar": 1.0, "gamma_d": 1.0,
        "rho": 2, "drop_prob": 0.0, "delay_min": 0.0, "delay_max": 0.0,
        "mode": "theorem", "consistency": "non-consistent",
        "t_final": 20.0, "tau_s": 0.01, "seed": 1,
    }
    raw.update(overrides)
    return raw


def pair_scenario_dict(**overrides):
    """Undirected two-agent pair, consistent channel (average-mode ready)."""
    raw = chain_scenario_dict(adjacency=[[0, 1], [1, 0]], mode="average",
                              consistency="consistent")
    raw.update(overrides)
    return raw


@pytest.fixture(scope="session")
def paper_run():
    """One full run of the bundled six-agent scenario: (scenario, bounds, trace)."""
    s = load_scenario_dict(paper_scenario_dict())
    report = bounds_mod.certify(s)
    trace = engine.run(s)
    return s, report, trace


@pytest.fixture(scope="session")
def demo_cli_run(tmp_path_factory):
    """Timed demo-paper CLI invocation: (out_dir, exit_code, elapsed_seconds)."""
    from etconsensus.cli import main
    out = tmp_path_factory.mktemp("demo")
    start = time.perf_counter()
    code = main(["demo-paper", "--out", str(out)])
    elapsed = time.perf_counter() - start
    return out, code, elapsed
