import itertools

import numpy as np
import pytest

from freeza import circuits
from freeza.circuits import (BlockKind, CircuitDag, CircuitError, CnfFormula, Gate, GridCircuit, RefusedError,
                             block_gadget, cnf_brute_force, crossing_gadget, embed, evaluate, evaluate_gadget,
                             evaluate_wire, is_satisfiable, lift_assignment, normalize_circuit, restrict,
                             satisfiable_sat, wire_gadget)
from tables import EMBED_EXAMPLE, CROSSING_TABLE


def grid(*rows):
    return GridCircuit(np.array([list(r) for r in rows]))


def random_circuit(rng, n, symbols="&|CNWS01"):
    blocks = np.array(list(symbols))[rng.integers(0, len(symbols), size=(n, n))]
    blocks[0, :] = "0"
    blocks[:, 0] = "0"
    return GridCircuit(blocks)


def test_evaluate_and_cross():
    c = grid("011", "1&C", "0|0")
    v = evaluate(c, ())
    assert tuple(v[1, 1]) == (1, 1)
    # cross at (1,2): north 1 from (0,2), west 1 from the And
    assert tuple(v[1, 2]) == (1, 1)
    c2 = grid("010", "0C0", "000")
    assert tuple(evaluate(c2, ())[1, 1]) == (0, 1)
    zero = grid("000", "000", "000")
    assert not evaluate(zero, ()).any()


def test_selector_outputs():
    c = grid("000", "0S0", "000")
    assert tuple(evaluate(c, (1,))[1, 1]) == (1, 0)
    assert tuple(evaluate(c, (0,))[1, 1]) == (0, 1)
    with pytest.raises(CircuitError):
        evaluate(c, ())


def test_is_satisfiable_examples():
    c = grid("000", "0S|", "000")
    ok, u = is_satisfiable(c, (1, 2))
    assert ok and u == (1,)
    assert is_satisfiable(c, (2, 2)) == (False, None)
    contra = grid("000", "0S|", "0|&")
    assert not is_satisfiable(contra, (2, 2))[0]


def test_selector_cap_refusal():
    blocks = np.full((6, 6), "S")
    blocks[0, :] = "0"
    blocks[:, 0] = "0"
    c = GridCircuit(blocks)
    with pytest.raises(RefusedError):
        is_satisfiable(c, (5, 5), cap=24)


def test_is_satisfiable_workers(rng):
    for _ in range(10):
        c = random_circuit(rng, 5)
        t = (4, 4)
        ref = is_satisfiable(c, t, chunk_bits=1)
        assert is_satisfiable(c, t, workers=4, chunk_bits=1) == ref
        assert is_satisfiable(c, t) == ref


def test_circuit_serialization(rng):
    c = random_circuit(rng, 6)
    assert GridCircuit.loads(c.dumps()) == c
    with pytest.raises(CircuitError):
        GridCircuit.loads("gridcircuit n=2\n00\n0X\n")
    with pytest.raises(CircuitError):
        grid("00", "&0")


def test_dimacs_round_trip():
    phi = CnfFormula.from_dimacs("c demo\np cnf 3 2\n1 -2 0\n2 3\n-1 0\n")
    assert phi.num_vars == 3 and phi.clauses == ((1, -2), (2, 3, -1))
    assert CnfFormula.from_dimacs(phi.to_dimacs()) == phi
    with pytest.raises(CircuitError):
        CnfFormula(1, ((2,),))


def test_cnf_brute_force():
    assert cnf_brute_force(CnfFormula(1, ((1,), (-1,)))) == (False, None)
    ok, u = cnf_brute_force(CnfFormula(2, ((1, 2),)))
    assert ok and u == (1, 0)
    with pytest.raises(RefusedError):
        cnf_brute_force(CnfFormula(30, ((30,),)))


def test_normalize_examples():
    dag = normalize_circuit(CnfFormula(1, ((1,),)))
    assert [g.op for g in dag.gates] == ["input", "or"]
    neg = normalize_circuit(CnfFormula(1, ((-1,),)))
    assert [g.op for g in neg.gates] == ["input", "not"]
    assert neg.provenance["clauses"] == {0: 2}


def test_normalize_degrees(rng):
    for _ in range(30):
        m = int(rng.integers(1, 5))
        clauses = [tuple(int(v) * (1 if rng.random() < 0.5 else -1) for v in rng.integers(1, m + 1, size=3))
                   for _ in range(int(rng.integers(1, 6)))]
        phi = CnfFormula(m, clauses)
        dag = normalize_circuit(phi)
        succ = dag.successors()
        assert all(len(s) <= 2 for s in succ.values())
        assert all(len(g.inputs) <= 2 for g in dag.gates)
        for g in dag.gates:
            if g.op == "not":
                assert dag.gate(g.inputs[0]).op == "input"
        for u in itertools.product((0, 1), repeat=m):
            assert dag.evaluate(u)[dag.output] == int(phi.evaluate(u))


def test_embed_nine_gate_example():
    gates = [Gate(1, "input", var=1), Gate(2, "input", var=2), Gate(3, "not", (1,)), Gate(4, "or", (1,)),
             Gate(5, "not", (2,)), Gate(6, "or", (1,)), Gate(7, "and", (3, 4)), Gate(8, "or", (4, 5)),
             Gate(9, "and", (5, 6))]
    gc, mapping = embed(CircuitDag(gates, 9))
    assert ["".join(r) for r in gc.blocks] == list(EMBED_EXAMPLE)
    assert mapping[9] == (9, 9)


def test_embed_single_gate():
    gc, mapping = embed(CircuitDag([Gate(1, "input", var=1)], 1))
    assert gc.n == 2 and ["".join(r) for r in gc.blocks] == ["00", "0S"]


def test_embed_matches_dag(rng):
    for _ in range(20):
        m = int(rng.integers(1, 4))
        clauses = [tuple(int(v) * (1 if rng.random() < 0.5 else -1) for v in rng.integers(1, m + 1, size=2))
                   for _ in range(int(rng.integers(1, 4)))]
        dag = normalize_circuit(CnfFormula(m, clauses))
        gc, mapping = embed(dag)
        for u in itertools.product((0, 1), repeat=len(dag.inputs())):
            full = [0] * m
            for g, b in zip(dag.inputs(), u):
                full[g.var - 1] = b
            vals = dag.evaluate(full)
            out = evaluate(gc, u)
            for gid, (i, j) in mapping.items():
                if dag.gate(gid).op != "input":
                    assert out[i, j, 1] == vals[gid]


def test_crossing_table():
    g = crossing_gadget()
    assert g.shape == (8, 8) and set(np.unique(g)) <= circuits.RESTRICTED
    for (a, b, s1, s2), expected in CROSSING_TABLE.items():
        assert evaluate_gadget(g, a, b, (s2, s1)) == expected
    for a, b in itertools.product((0, 1), repeat=2):
        assert CROSSING_TABLE[(a, b, 1 - b, a)] == (a, b)


@pytest.mark.parametrize("kind", list("&|CNWS01"))
def test_block_gadgets(kind):
    g = block_gadget(kind)
    assert g.shape == (8, 8) and set(np.unique(g)) <= circuits.RESTRICTED
    sels = list(zip(*np.nonzero(g == "S")))
    for west, north in itertools.product((0, 1), repeat=2):
        outs = {evaluate_gadget(g, west, north, u) for u in itertools.product((0, 1), repeat=len(sels))}
        if kind == "S":
            assert outs == {(1, 0), (0, 1)}
            continue
        if kind == "C":
            assert (west, north) in outs
            continue
        v = {"&": west & north, "|": west | north, "N": north, "W": west, "0": 0, "1": 1}[kind]
        assert (v, v) in outs
        assert all(e <= v and s <= v for e, s in outs)


def test_or_gadget_baseline():
    assert evaluate_gadget(block_gadget(BlockKind.OR), 1, 0) == (1, 1)
    assert evaluate_gadget(block_gadget("0"), 1, 1) == (0, 0)


def test_wires():
    straight = wire_gadget((3, 0), (3, 7))
    assert "".join(straight[3]) == "||||||||" and (straight == "|").sum() == 8
    bent = wire_gadget((0, 3), (4, 7))
    for src, dst, g in [((3, 0), (3, 7), straight), ((0, 3), (4, 7), bent)]:
        assert evaluate_wire(g, src, dst, 1) == 1
        assert evaluate_wire(g, src, dst, 0) == 0
    for src, dst in [((3, 3), (7, 7)), ((0, 3), (7, 2)), ((0, 9), (7, 9)), ((3, 0), (2, 7))]:
        with pytest.raises(CircuitError):
            wire_gadget(src, dst)


def test_restrict_all_fixed():
    rc, mapping = restrict(grid("00", "00"))
    assert rc.is_restricted() and not evaluate(rc, ()).any()
    assert set(mapping) == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_restrict_preserves_values(rng):
    for _ in range(6):
        n = int(rng.integers(2, 4))
        gc = random_circuit(rng, n)
        rc, mapping = restrict(gc)
        assert rc.is_restricted() and rc.n == n * circuits.meta_size(n)
        m = len(gc.selectors())
        for u in itertools.product((0, 1), repeat=m):
            src = evaluate(gc, u)
            dst = evaluate(rc, lift_assignment(gc, u))
            for b, t in mapping.items():
                assert dst[t][1] == src[b][1]


def test_restrict_dominance(rng):
    gc = random_circuit(rng, 3)
    rc, mapping = restrict(gc)
    m = len(gc.selectors())
    rsels = rc.selectors()
    src_pos = [rsels.index(p) for p in circuits.selector_map(gc).values()]
    for _ in range(50):
        ru = tuple(int(b) for b in rng.integers(0, 2, size=len(rsels)))
        u = tuple(ru[k] for k in src_pos)
        src = evaluate(gc, u)
        dst = evaluate(rc, ru)
        for b, t in mapping.items():
            assert dst[t][1] <= src[b][1]
    assert m == len(src_pos)


def test_satisfiable_sat_agrees(rng):
    for _ in range(40):
        c = random_circuit(rng, 4)
        for t in [(3, 3), (2, 3), (3, 1)]:
            ok, u = satisfiable_sat(c, t)
            assert ok == is_satisfiable(c, t)[0]
            if ok:
                assert evaluate(c, u)[t][1] == 1
