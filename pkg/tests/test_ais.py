import random
import statistics
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from aisinv import (
    AisConfig, Antibody, BudgetExhausted, InvariantTemplate, MemoryPool, OracleRejected, ShapeVector, affinity,
    default_pool, encode, extract_fragments, fragment_oracle, hypermutate, parse_template, receptor_edit, respond,
    train,
)
from aisinv.ais import ADDITIVE, DOUBLE_EXP, MULTIPLICATIVE, oracle_counterexample, training_fragment


def frag(src):
    return training_fragment(src)


@pytest.mark.parametrize("src, template, ok", [
    ("x := x + 2", "x = x0 + 2*n", True),
    ("x := x + 2", "x = x0 + 3*n", False),
    ("x := x - y", "x = x0 - y*n", True),
    ("z := x * z", "z = z0 * x^n", True),
    ("y := y / 2", "y = y0 * (1/2)^n", True),
    ("x := x * x", "x = exp(x0, exp(2, n))", True),
    ("x := x * x", "x = x0 * x^n", False),
    ("x := x + 2", "y = y0 + 2*n", False),
])
def test_oracle_examples(src, template, ok):
    assert fragment_oracle(frag(src), parse_template(template)) is ok


def test_oracle_counterexample_reports_first_n():
    failure = oracle_counterexample(frag("x := x + 2"), parse_template("x = x0 + 3*n"))
    assert failure.n == 1


@pytest.mark.parametrize("text", [
    "x = x0 + 2*n", "x = x0 - y*n", "z = z0 * x^n", "y = y0 * (1/2)^n", "x = exp(x0, exp(2, n))",
])
def test_template_text_and_json_round_trip(text):
    t = parse_template(text)
    assert str(t) == text
    assert InvariantTemplate.from_dict(t.to_dict()) == t


def test_train_dedups_and_rejects():
    pool = default_pool()
    assert len(pool) == 1
    train(pool, frag("x := x + 2"), parse_template("x = x0 + 2*n"))
    assert len(pool) == 1
    with pytest.raises(OracleRejected, match="n=1"):
        train(pool, frag("x := x + 2"), parse_template("x = x0 + 5*n"))


def test_affinity():
    ab = default_pool().cells[0]
    assert affinity(ab, ab.pattern) == 1
    assert affinity(ab, encode(frag("t := t + 2"))) == Fraction(1, 2)


def test_hypermutation_can_reach_the_gcd_cells():
    """Random mutation of the seed cell eventually produces x := x - y / x = x0 - y*n."""
    seed = default_pool().cells[0]
    target = encode(frag("x := x - y"))
    rng = random.Random(0)
    found = None
    for _ in range(2000):
        child = hypermutate(seed, rng, 0.6, scope=("x", "y", "u", "v"))
        if child.pattern == target:
            found = child
            break
    assert found is not None
    assert found.template == parse_template("x = x0 - y*n")


@given(st.integers(0, 10_000), st.floats(0.05, 1.0))
def test_hypermutation_keeps_pattern_and_template_paired(seed, rate):
    ab = default_pool().cells[0]
    child = hypermutate(ab, random.Random(seed), rate, scope=("x", "y", "z"))
    assert child.template.lhs == child.pattern.lhs_id
    if child.pattern.term_kind == "var":
        assert child.template.term == child.pattern.term_id


def test_hypermutation_rate_bounds():
    with pytest.raises(ValueError):
        hypermutate(default_pool().cells[0], random.Random(0), 0.0)


def test_receptor_edit_jumps_to_the_antigen():
    ag = encode(frag("x := x * x"))
    ab = default_pool().cells[0]
    edited = receptor_edit(ab, ag, random.Random(1))
    assert edited.pattern == ag
    assert edited.template.kind in (DOUBLE_EXP, MULTIPLICATIVE)
    # the multiplicative guess already failed on this exact pattern: the edit must switch kind
    failed = Antibody(ag, InvariantTemplate(MULTIPLICATIVE, "x", 1, "x"))
    assert receptor_edit(failed, ag, random.Random(1)).template.kind == DOUBLE_EXP


@pytest.mark.parametrize("src, expected", [
    ("x := x - y", "x = x0 - y*n"),
    ("v := v + u", "v = v0 + u*n"),
    ("z := x * z", "z = z0 * x^n"),
    ("y := y / 2", "y = y0 * (1/2)^n"),
    ("x := x * x", "x = exp(x0, exp(2, n))"),
    ("y := 2 * y", "y = y0 * 2^n"),
    ("y := y - 1", "y = y0 - 1*n"),
])
def test_respond_examples(src, expected):
    pool = default_pool()
    template, stats, pool = respond(pool, frag(src))
    assert template == parse_template(expected)
    assert not stats.memory_hit and stats.iterations >= 0
    again, stats2, _ = respond(pool, frag(src))
    assert again == template and stats2.memory_hit and stats2.iterations == 0


def test_respond_on_every_corpus_fragment(gcd, power, multiply):
    for p in (gcd, power, multiply):
        pool = default_pool()
        for f in extract_fragments(p):
            if f.in_loop:
                t, _, _ = respond(pool, f)
                assert fragment_oracle(f, t)


def test_respond_is_deterministic(gcd):
    def run_once():
        pool = default_pool(AisConfig(seed=7))
        out = [respond(pool, f, AisConfig(seed=7))[1].iterations for f in extract_fragments(gcd) if f.in_loop]
        return out, pool.to_json()
    assert run_once() == run_once()


def test_budget_exhausted():
    # multiplicative templates carry no sign, so division by a variable has no closed form here
    with pytest.raises(BudgetExhausted):
        respond(default_pool(), frag("x := x / y"), AisConfig(max_generations=20))


def test_respond_rejects_loop_free_fragments(gcd):
    outside = next(f for f in extract_fragments(gcd) if not f.in_loop)
    with pytest.raises(ValueError):
        respond(default_pool(), outside)


def test_pool_capacity_and_eviction():
    pool = MemoryPool(capacity=3)
    for i in range(5):
        pool.insert(Antibody(ShapeVector("x", "add", "const", i, "additive"),
                             InvariantTemplate(ADDITIVE, "x", 1, Fraction(i)), hits=1 if i == 0 else 0,
                             created_at=pool.tick()))
        assert len(pool) <= 3
    # the oldest zero-hit cells go first; the cell with a hit survives
    assert [c.pattern.term_id for c in pool.cells] == [0, 3, 4]


def test_pool_json_round_trip_is_byte_identical(tmp_path, gcd):
    pool = default_pool()
    for f in extract_fragments(gcd):
        if f.in_loop:
            respond(pool, f)
    path = tmp_path / "m.json"
    pool.save(path)
    first = path.read_bytes()
    MemoryPool.load(path).save(path)
    assert path.read_bytes() == first
    assert MemoryPool.from_json("").cells == []


def test_secondary_response_is_faster():
    near, far = frag("x := x + 3"), frag("x := x - y")
    assert encode(near) != encode(far)
    iters = {"near": [], "far": []}
    for seed in range(10):
        cfg = AisConfig(seed=seed)
        iters["near"].append(respond(default_pool(cfg), near, cfg)[1].iterations)
        iters["far"].append(respond(default_pool(cfg), far, cfg)[1].iterations)
    assert statistics.median(iters["near"]) < statistics.median(iters["far"])
