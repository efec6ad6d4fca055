"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into an "acceptance criteria" section of the summary.
"""

from __future__ import annotations

import copy
import ipaddress
import json
import socket
import time

import numpy as np
import pytest

from tests.oracles import (
    WORKED,
    WORKED_PHI,
    brute_force_shapley,
    random_game,
    set_to_mask,
    symmetrized,
    with_null_player,
)
from tests.stubserver import StubServer
from toolshap.agents import LiveAgentConfig, ResponseCache, ScriptedAgent, run_tool_loop
from toolshap.analysis import EstimatorChoice, analyze
from toolshap.cli import main
from toolshap.errors import MaxTurnsExceeded
from toolshap.experiments import (
    ExperimentConfig,
    PromptSuite,
    run_consistency,
    run_cross_domain,
    run_faithfulness,
    run_injection,
)
from toolshap.report import dumps, report_to_dict
from toolshap.shapley import ValueTable, build_plan, exact_shapley, permutation_mc_shapley

_elapsed: dict[str, float] = {}


@pytest.fixture(autouse=True)
def loopback_only(monkeypatch, request):
    """Refuse any connection that leaves the machine, and time each criterion."""
    real_connect = socket.socket.connect

    def connect(self, address):
        host = address[0] if isinstance(address, tuple) else None
        if host is not None and not ipaddress.ip_address(socket.gethostbyname(host)).is_loopback:
            raise OSError(f"network access blocked during acceptance run: {host}")
        return real_connect(self, address)

    monkeypatch.setattr(socket.socket, "connect", connect)
    start = time.perf_counter()
    yield
    _elapsed[request.node.name] = time.perf_counter() - start


def phi(v) -> np.ndarray:
    return exact_shapley(ValueTable.from_array(v))


def suite_config(full_catalog, name: str, estimator: str = "subset_mc") -> ExperimentConfig:
    suite = PromptSuite.bundled(name)
    extra = {"distractors": suite.distractors} if suite.distractors else {}
    return ExperimentConfig(
        experiment=name,
        prompt_suite=suite.prompts,
        catalog=full_catalog.subset(suite.tools),
        estimator=EstimatorChoice(estimator),
        rho=0.5,
        **extra,
    )


@pytest.fixture
def factory(script):
    return lambda catalog: ScriptedAgent(catalog, script)


def test_criterion_01_axioms(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = {"efficiency": 0.0, "symmetry": 0.0, "null": 0.0, "linearity": 0.0}
    for n in range(2, 9):
        for _ in range(100):
            v = random_game(rng, n)
            p = phi(v)
            worst["efficiency"] = max(worst["efficiency"], abs(p.sum() - (v[-1] - v[0])))

            i, j = rng.choice(n, size=2, replace=False)
            ps = phi(symmetrized(v, i, j))
            worst["symmetry"] = max(worst["symmetry"], abs(ps[i] - ps[j]))

            k = int(rng.integers(n))
            worst["null"] = max(worst["null"], abs(phi(with_null_player(v, k))[k]))

            w = random_game(rng, n)
            a, b = rng.uniform(-2, 2, size=2)
            worst["linearity"] = max(worst["linearity"], np.abs(phi(a * v + b * w) - (a * p + b * phi(w))).max())
    runtime = time.perf_counter() - start
    ok = all(x <= 1e-9 for x in worst.values()) and runtime < 10
    detail = ", ".join(f"{k} {x:.1e}" for k, x in worst.items())
    verdict(1, ok, f"axioms on 700 tables: max error {detail}; {runtime:.2f}s")


def test_criterion_02_oracle_equivalence(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(1, 7):
        for _ in range(20):
            v = random_game(rng, n)
            oracle = brute_force_shapley(lambda s: v[set_to_mask(s)], n)
            worst = max(worst, np.abs(phi(v) - oracle).max())
    worked = exact_shapley(ValueTable(3, dict(WORKED)))
    worked_err = np.abs(worked - np.array([0.6667, 0.2667, 0.0667])).max()
    frozen_err = np.abs(worked - np.array(WORKED_PHI)).max()
    ok = worst <= 1e-9 and worked_err <= 1e-4 and frozen_err <= 1e-12
    verdict(2, ok, f"120 games n<=6 max |exact-oracle| {worst:.1e}; worked game phi={np.round(worked, 4).tolist()}")


def test_criterion_03_permutation_convergence(verdict):
    # Value tables are drawn on [0, 1], the range of similarity scores.
    start = time.perf_counter()
    default_mae, sampled_mae = [], []
    for g in range(20):
        v = np.random.default_rng(1000 + g).uniform(0.0, 1.0, 2**5)
        truth = phi(v)
        est = permutation_mc_shapley(v.__getitem__, 5, permutations=10_000, seed=g)
        sampled = permutation_mc_shapley(v.__getitem__, 5, permutations=10_000, seed=g, exhaustive=False)
        default_mae.append(np.abs(est - truth).mean())
        sampled_mae.append(np.abs(sampled - truth).mean())
    runtime = time.perf_counter() - start
    ok = max(default_mae) < 0.01 and max(sampled_mae) < 0.01 and runtime < 30
    verdict(3, ok, f"20 games n=5, 10k permutations: worst MAE {max(default_mae):.1e} "
                   f"(sampled orderings {max(sampled_mae):.4f}); {runtime:.2f}s")


def test_criterion_04_plan_arithmetic(verdict):
    big = build_plan(8, 0.5, seed=0)
    small = build_plan(3, 1.0, seed=0)
    ok = (
        len(big) == 132
        and big.baseline == 0xFF
        and big.baseline in big.masks
        and len(set(big.masks)) == 132
        and sorted(small.masks) == list(range(8))
    )
    verdict(4, ok, f"n=8 rho=0.5 -> {len(big)} coalitions; n=3 rho=1.0 -> {len(set(small.masks))} of 8 subsets")


def test_criterion_05_scripted_consistency(verdict, full_catalog, factory):
    cfg = suite_config(full_catalog, "consistency")
    m = run_consistency(cfg, factory)
    ok = len(set(cfg.seeds)) == 3 and m.top1_accuracy == 1.0 and m.mean_stability >= 0.99
    verdict(5, ok, f"seeds {list(cfg.seeds)}: top-1 {m.top1_accuracy:.0%}, "
                   f"mean SHAP-vector cosine {m.mean_stability:.4f} (need >= 0.99)")


def test_criterion_06_scripted_faithfulness(verdict, full_catalog, factory):
    m = run_faithfulness(suite_config(full_catalog, "faithfulness"), factory)
    ok = (
        abs(m.quality_drop_high - 1.0) <= 1e-12
        and abs(m.quality_drop_low) <= 1e-12
        and m.quality_drop_high > m.quality_drop_low
    )
    verdict(6, ok, f"drop_high {m.quality_drop_high:.4f}, drop_low {m.quality_drop_low:.4f}")


def test_criterion_07_scripted_injection(verdict, full_catalog, factory):
    cfg = suite_config(full_catalog, "injection", estimator="exact")
    exact = run_injection(cfg, factory)
    sub = run_injection(suite_config(full_catalog, "injection"), factory)
    worst_distractor = max(abs(x) for row in exact.per_prompt for x in row["distractor_phi"].values())
    min_gap = min(row["gap"] for row in exact.per_prompt)
    ok = (
        len(cfg.distractors) == 4
        and worst_distractor <= 1e-12
        and min_gap > 0
        and sub.top1_accuracy == 1.0
    )
    verdict(7, ok, f"exact: max |distractor phi| {worst_distractor:.1e}, min gap {min_gap:.4f}; "
                   f"subset_mc top-1 {sub.top1_accuracy:.0%}")


def test_criterion_08_scripted_cross_domain(verdict, full_catalog, factory):
    m = run_cross_domain(suite_config(full_catalog, "cross_domain"), factory)
    expected = {c.domain_label: c.expected_tool for c in PromptSuite.bundled("cross_domain").prompts}
    margins = {
        d: row[expected[d]] - max(v for t, v in row.items() if t != expected[d])
        for d, row in m.domain_tool_matrix.items()
    }
    ok = len(margins) == 3 and all(x > 0 for x in margins.values()) and m.top1_accuracy == 1.0
    shown = ", ".join(f"{d} {x:+.3f}" for d, x in margins.items())
    verdict(8, ok, f"diagonal margin per domain: {shown}; top-1 {m.top1_accuracy:.0%}")


def test_criterion_09_determinism(verdict, tmp_path, core_catalog, script):
    # Library path: scripted agent behind a persistent response cache.
    cache_file = tmp_path / "responses.jsonl"
    texts, calls = [], []
    for _ in range(2):
        agent = ScriptedAgent(core_catalog, script)
        report = analyze(agent, "Calculate (5+6)*3", rho=0.5, seed=5,
                         estimator=EstimatorChoice("subset_mc"), cache=ResponseCache(cache_file))
        texts.append(dumps(report_to_dict(report)))
        calls.append(agent.calls)
    scripted_ok = texts[0] == texts[1] and calls[0] > 0 and calls[1] == 0

    # CLI path: live agent and embedding backend against a local stub.
    def reply(body):
        names = [t["function"]["name"] for t in body.get("tools", [])]
        text = "The answer is 33." if "Calculator" in names else "I do not know."
        return {"choices": [{"message": {"role": "assistant", "content": text}}]}

    with StubServer(reply) as server:
        cfg = {
            "prompt": "Calculate (5+6)*3", "rho": 0.5, "seed": 5, "output_dir": "out",
            "response_cache": "cache/responses.jsonl",
            "agent": {"mode": "live", "base_url": server.base_url, "model": "m", "max_retries": 0},
            "backend": {"kind": "embedding", "base_url": server.base_url, "model": "e",
                        "cache_path": "cache/emb.jsonl", "max_retries": 0},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        assert main(["analyze", "--config", str(path)]) == 0
        first = (tmp_path / "out" / "report.json").read_bytes()
        cold = len(server.requests)
        assert main(["analyze", "--config", str(path)]) == 0
        warm = len(server.requests) - cold
    same_bytes = (tmp_path / "out" / "report.json").read_bytes() == first
    live_ok = same_bytes and cold > 0 and warm == 0

    verdict(9, scripted_ok and live_ok,
            f"scripted: identical={texts[0] == texts[1]}, warm agent calls {calls[1]}; "
            f"live+embedding: identical={same_bytes}, cold requests {cold}, warm requests {warm}")


def test_criterion_10_wire_protocol(verdict, wire_fixture, core_catalog):
    exchanges = wire_fixture["exchanges"]
    with StubServer([copy.deepcopy(x["response"]) for x in exchanges]) as server:
        cfg = LiveAgentConfig(base_url=server.base_url, model="gpt-4o-mini", max_retries=0)
        r = run_tool_loop(cfg, "What is 2+2?", [core_catalog["Calculator"]])
    bodies = server.paths("/chat/completions")
    two_turn = (
        r.turns == 2
        and r.text == "2 + 2 = 4."
        and [c.name for c in r.tool_calls_made] == ["Calculator"]
        and r.tool_calls_made[0].result == "4"
        and len(bodies) == 2
        and bodies[1]["messages"][-1]["role"] == "tool"
    )

    tool_call = exchanges[0]["response"]
    with StubServer(lambda body: copy.deepcopy(tool_call)) as server:
        cfg = LiveAgentConfig(base_url=server.base_url, model="gpt-4o-mini", max_retries=0, max_turns=3)
        try:
            run_tool_loop(cfg, "What is 2+2?", [core_catalog["Calculator"]])
            capped = False
        except MaxTurnsExceeded:
            capped = True
        posts = len(server.paths("/chat/completions"))
    capped = capped and posts == 3

    earlier = [k for k in _elapsed if not k.startswith("test_criterion_10")]
    ci_time = sum(_elapsed.values())
    timed = len(earlier) == 9 and ci_time < 120
    verdict(10, two_turn and capped and timed,
            f"two-turn exchange {'ok' if two_turn else 'broken'}; max_turns=3 stopped after {posts} posts; "
            f"criteria 1-9 took {ci_time:.1f}s over {len(earlier)} tests")
