"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v -s`.  Expensive results
are cached at module level so criterion 10 can reuse the 1-worker runs.
"""

import functools
import hashlib
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from freeza import circuits, oracle, s22kit, solvers
from freeza.circuits import CnfFormula, GridCircuit
from freeza.engine import (Configuration, Schedule, desynchronize, random_configuration, random_independent_blocks,
                           random_sweeps, run, synchronous_fixed_point)
from freeza.fca import ALL_RULE_NAMES, BINARY, Rule1D, parse_rule_name
from freeza.topology import GridSpec, cells
from tables import CROSSING_TABLE

SEED = 20240611
WORKER_COUNTS = (1, 2, 8)


def report(capsys, k: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")


def pmap(fn, items, workers: int) -> list:
    """Ordered map; a thread pool when workers > 1."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------- criterion 1

C1_RULES = tuple(n for n in ALL_RULE_NAMES if n != "S22")
C1_SIZES = (4, 5)
C1_CONFIGS = 500


@functools.cache
def c1_instances() -> tuple:
    out = []
    for r, name in enumerate(C1_RULES):
        rule = parse_rule_name(name)
        for n in C1_SIZES:
            spec = GridSpec(rule.kind, n)
            rng = np.random.default_rng([SEED, r, n])
            out.extend((name, n, k, random_configuration(spec, rng)) for k in range(C1_CONFIGS))
    return tuple(out)


@functools.cache
def c1_oracle() -> tuple:
    return tuple(oracle.explore(parse_rule_name(name), cfg) for name, _, _, cfg in c1_instances())


def _c1_decide(job):
    (name, _, _, cfg), workers = job
    rule = parse_rule_name(name)
    rows = []
    for u in cells(cfg.spec):
        if not cfg[u]:
            ans, method, witness = solvers.decide(rule, cfg, u, workers=workers)
            rows.append([list(u), ans, method, None if witness is None else witness.dumps()])
    return rows


@functools.cache
def c1_decisions(workers: int) -> tuple:
    return tuple(pmap(_c1_decide, [(inst, workers) for inst in c1_instances()], workers))


def test_criterion_1_oracle_equivalence(capsys):
    t0 = time.time()
    checked = mismatches = truncated = undecided = bad_witness = 0
    for (name, _, _, cfg), rep, rows in zip(c1_instances(), c1_oracle(), c1_decisions(1)):
        truncated += rep.budget_exhausted
        unstable = set(rep.unstable_cells)
        rule = parse_rule_name(name)
        for u, ans, method, witness in rows:
            u = tuple(u)
            checked += 1
            undecided += ans is None
            mismatches += ans != (u in unstable)
            if witness is not None:
                bad_witness += not run(rule, cfg, Schedule.loads(witness)).iterates(u)
    ok = checked > 0 and mismatches == truncated == undecided == bad_witness == 0
    report(capsys, 1, ok, f"{len(C1_RULES)} rules x {len(C1_SIZES)} sizes x {C1_CONFIGS} configs, "
                          f"{checked} cells, mismatches={mismatches}, truncated={truncated}, "
                          f"bad witnesses={bad_witness}, {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 2




def binary_freezing_tables() -> list:
    free = list(itertools.product((0, 1), repeat=2))
    rules = []
    for bits in itertools.product((0, 1), repeat=len(free)):
        table = {(l, s, r): 1 if s else bits[free.index((l, r))] for l, s, r in itertools.product((0, 1), repeat=3)}
        rules.append(Rule1D(BINARY, table))
    return rules


def three_state_rule() -> Rule1D:
    # 0 -> 1 next to a 1, 0/1 -> 2 between two non-zero cells, 2 is absorbing
    def f(l, s, r):
        if s == 2:
            return 2
        if l and r:
            return 2
        if s == 0 and 1 in (l, r):
            return 1
        return s
    return Rule1D.from_function((0, 1, 2), f)


def _check_1d(rule, cfg) -> tuple:
    rep = oracle.explore(rule, cfg)
    checked = bad = 0
    for u in range(cfg.spec.n):
        if rule.order.is_top(cfg[u]):
            continue
        ok, w = solvers.decide_1d(rule, cfg, u, with_witness=True)
        checked += 1
        bad += ok != (u in rep.unstable_cells) or (ok and not run(rule, cfg, w).iterates(u))
    return checked, bad + rep.budget_exhausted


def test_criterion_2_one_dimensional(capsys):
    t0 = time.time()
    spec = GridSpec("ring", 6)
    checked = bad = 0
    rules = binary_freezing_tables()
    for rule in rules:
        for bits in itertools.product((0, 1), repeat=6):
            c, b = _check_1d(rule, Configuration(spec, bits))
            checked, bad = checked + c, bad + b
    rule3 = three_state_rule()
    rng = np.random.default_rng([SEED, 2])
    for _ in range(200):
        c, b = _check_1d(rule3, Configuration(spec, rng.integers(0, 3, size=6)))
        checked, bad = checked + c, bad + b
    ok = checked > 0 and bad == 0
    report(capsys, 2, ok, f"{len(rules)} binary tables x 64 configs + 3-state rule x 200 configs, "
                          f"{checked} cells, disagreements={bad}, {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 3


def test_criterion_3_desynchronization(capsys):
    t0 = time.time()
    total = bad = 0
    for r, name in enumerate(ALL_RULE_NAMES):
        rule = parse_rule_name(name)
        spec = GridSpec(rule.kind, 5)
        rng = np.random.default_rng([SEED, 3, r])
        for _ in range(200):
            cfg = random_configuration(spec, rng)
            sched = random_independent_blocks(spec, rng, 12)
            seq = desynchronize(sched, rule, cfg)
            total += 1
            bad += not seq.is_sequential or run(rule, cfg, seq).final != run(rule, cfg, sched).final
    ok = bad == 0
    report(capsys, 3, ok, f"{len(ALL_RULE_NAMES)} rules x 200 block schedules on G(5), "
                          f"differing finals={bad}/{total}, {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 4


def test_criterion_4_monotone_fixed_point(capsys):
    t0 = time.time()
    total = bad = 0
    for r, name in enumerate(("T23", "S24", "S34")):
        rule = parse_rule_name(name)
        spec = GridSpec(rule.kind, 5)
        rng = np.random.default_rng([SEED, 4, r])
        for _ in range(100):
            cfg = random_configuration(spec, rng)
            target = synchronous_fixed_point(rule, cfg)
            for _ in range(50):
                traj = run(rule, cfg, random_sweeps(spec, rng, spec.size))
                total += 1
                bad += not traj.fixed_point or traj.final != target
    ok = bad == 0
    report(capsys, 4, ok, f"T23/S24/S34 x 100 configs x 50 sweep schedules on G(5), "
                          f"differing finals={bad}/{total}, {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 5


def c5_table(workers: int) -> list:
    g = circuits.crossing_gadget()
    rows = sorted(CROSSING_TABLE)
    outs = pmap(lambda row: circuits.evaluate_gadget(g, row[0], row[1], (row[3], row[2])), rows, workers)
    return [[list(row), list(out)] for row, out in zip(rows, outs)]


def test_criterion_5_crossing_table(capsys):
    t0 = time.time()
    table = c5_table(1)
    wrong = [row for row, out in table if CROSSING_TABLE[tuple(row)] != tuple(out)]
    gray = all(CROSSING_TABLE[(a, b, 1 - b, a)] == (a, b) for a, b in itertools.product((0, 1), repeat=2))
    ok = len(table) == 16 and not wrong and gray
    report(capsys, 5, ok, f"16 rows, wrong={wrong}, gray rows restore (a,b)={gray}, {time.time() - t0:.2f}s")
    assert ok


# ---------------------------------------------------------------- criteria 6 and 7


@functools.cache
def cnf_corpus() -> tuple:
    """Every CNF with <= 3 variables and <= 3 distinct clauses, then 100 random 4-variable CNFs."""
    clauses = []
    for signs in itertools.product((0, 1, -1), repeat=3):
        c = tuple(s * (v + 1) for v, s in enumerate(signs) if s)
        if c:
            clauses.append(c)
    out = []
    for k in (1, 2, 3):
        for combo in itertools.combinations(clauses, k):
            out.append(CnfFormula(max(abs(l) for c in combo for l in c), combo))
    rng = np.random.default_rng([SEED, 6])
    for _ in range(100):
        combo = []
        for _ in range(int(rng.integers(1, 7))):
            width = int(rng.integers(1, 4))
            vs = rng.choice(4, size=width, replace=False) + 1
            combo.append(tuple(int(v) * (1 if rng.random() < 0.5 else -1) for v in vs))
        out.append(CnfFormula(4, tuple(combo)))
    return tuple(out)


def _pipeline(phi):
    dag = circuits.normalize_circuit(phi)
    gc, gate_block = circuits.embed(dag)
    return dag, gc, gate_block[dag.output]


def _c6_one(job):
    phi, workers = job
    dag, gc, out = _pipeline(phi)
    sat, u = circuits.is_satisfiable(gc, out, workers=workers, chunk_bits=1)
    ref, _ = circuits.cnf_brute_force(phi)
    witness_ok = True
    if sat:
        full = [0] * phi.num_vars
        for g, b in zip(dag.inputs(), u):
            full[g.var - 1] = b
        witness_ok = phi.evaluate(full)
    return [phi.to_dimacs(), sat, None if u is None else list(u), ref, witness_ok]


@functools.cache
def c6_results(workers: int) -> tuple:
    return tuple(pmap(_c6_one, [(phi, workers) for phi in cnf_corpus()], workers))


def test_criterion_6_cnf_pipeline(capsys):
    t0 = time.time()
    res = c6_results(1)
    wrong = [r[0] for r in res if r[1] != r[3] or not r[4]]
    nsat = sum(r[1] for r in res)
    ok = len(res) == len(cnf_corpus()) and not wrong
    report(capsys, 6, ok, f"{len(res)} CNFs ({nsat} satisfiable), disagreements={len(wrong)}, "
                          f"{time.time() - t0:.0f}s")
    assert ok


def test_criterion_7_restriction(capsys):
    t0 = time.time()
    formulas = sat_mismatch = incomplete = dominated_fail = 0
    random_checks = 0
    for idx, phi in enumerate(cnf_corpus()):
        dag, gc, out = _pipeline(phi)
        rc, mapping = circuits.restrict(gc)
        src_blocks = list(mapping)
        dst_blocks = [mapping[b] for b in src_blocks]
        m = len(gc.selectors())
        rsel = rc.selectors()
        pos = {p: k for k, p in enumerate(rsel)}
        proj = [pos[p] for p in circuits.selector_map(gc).values()]
        src_assign = list(itertools.product((0, 1), repeat=m))
        lifted = np.array([circuits.lift_assignment(gc, u) for u in src_assign], dtype=np.uint8)
        rng = np.random.default_rng([SEED, 7, idx])
        random_lanes = rng.integers(0, 2, size=(1000, len(rsel)), dtype=np.uint8)
        lanes = np.vstack([lifted, random_lanes])
        dst = circuits.values_for(rc, lanes, dst_blocks)
        src = circuits.values_for(gc, lanes[:, proj], src_blocks)
        k = len(src_assign)
        incomplete += not np.array_equal(dst[:k], src[:k])
        dominated_fail += bool((dst[k:] > src[k:]).any())
        random_checks += len(random_lanes)
        out_col = src_blocks.index(out)
        src_sat = bool(src[:k, out_col].any())
        if src_sat:
            # a lifted lane is a satisfying restricted assignment
            rc_sat = bool(dst[:k, out_col].any())
        else:
            rc_sat, _ = circuits.satisfiable_sat(rc, mapping[out])
        sat_mismatch += rc_sat != src_sat or src_sat != circuits.cnf_brute_force(phi)[0]
        formulas += 1
    ok = sat_mismatch == incomplete == dominated_fail == 0
    report(capsys, 7, ok, f"{formulas} CNFs: SAT mismatches={sat_mismatch}, lifted lanes not exact={incomplete}, "
                          f"dominance violations={dominated_fail} over {random_checks} random assignments, "
                          f"{time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 8


@functools.cache
def pattern_reports() -> dict:
    lib = s22kit.default_library()
    return {kind: s22kit.verify(lib.pattern(kind), budget=10**6) for kind in s22kit.KINDS}


def test_criterion_8_pattern_certificates(capsys):
    t0 = time.time()
    lib = s22kit.default_library()
    lines, ok = [], True
    for kind, rep in pattern_reports().items():
        hash_ok = lib.certificates.get(kind) == rep.certificate_hash() and lib.verified.get(kind)
        states = max((c.get("states", 0) for c in rep.cases), default=0)
        lines.append(f"{kind}={rep.verdict}{'' if hash_ok else ' (hash mismatch)'} max states={states}")
        ok = ok and rep.passed and bool(hash_ok)
    report(capsys, 8, ok, "; ".join(lines) + f", budget 1e6, {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 9

ORACLE_BUDGET = 10**6
ORACLE_MEMORY_LIMIT = 4 * 2**30  # bytes a packed 1e6-state search may use


def test_criterion_9_reduction_smoke(capsys):
    t0 = time.time()
    sat_phi = CnfFormula(1, ((1,),))
    unsat_phi = CnfFormula(1, ((1,), (-1,)))
    cfg_s, cell_s, prov_s = s22kit.reduce_sat(sat_phi)
    cfg_u, cell_u, prov_u = s22kit.reduce_sat(unsat_phi)
    # the packed search stores every visited configuration as a size-bit integer
    need = min(cfg_s.spec.size, cfg_u.spec.size) // 8 * ORACLE_BUDGET
    downgraded = need > ORACLE_MEMORY_LIMIT
    notes = [f"instances G({cfg_s.spec.n}) and G({cfg_u.spec.n})"]
    if not downgraded:
        v_s = oracle.decide_unstable(s22kit.S22, cfg_s, cell_s, ORACLE_BUDGET)[0]
        v_u = oracle.decide_unstable(s22kit.S22, cfg_u, cell_u, ORACLE_BUDGET)[0]
        ok = v_s is True and v_u is False
        report(capsys, 9, ok, f"exact: oracle verdicts {v_s}/{v_u}; " + ", ".join(notes))
        assert ok
        return
    notes.append(f"a 1e6-configuration search needs >= {need / 2**30:.0f} GiB, over the "
                 f"{ORACLE_MEMORY_LIMIT / 2**30:.0f} GiB limit")
    # per-meta-block oracle verification
    blocks_ok = all(rep.passed for rep in pattern_reports().values())
    notes.append(f"pattern certificates {'pass' if blocks_ok else 'FAIL'}")
    # restricted-circuit satisfiability of the compiled circuits
    sat_s, u_s = circuits.satisfiable_sat(prov_s["restricted"], prov_s["target_block"])
    sat_u, _ = circuits.satisfiable_sat(prov_u["restricted"], prov_u["target_block"])
    notes.append(f"restricted SAT {sat_s}/{sat_u}")
    # compositional witness replay on the satisfiable instance
    replay_ok = False
    if sat_s:
        order = s22kit.assemble_witness(prov_s["restricted"], u_s)
        replay_ok = s22kit.replay_witness(cfg_s, order, cell_s)
        notes.append(f"stage-wise witness of {len(order)} updates iterates the decision cell: {replay_ok}")
    # oracle on the smallest composed instance (selector feeding an or block)
    tiny = GridCircuit(np.array([list("000"), list("0S|"), list("000")]))
    cfg_t, cell_t = s22kit.compile_configuration(tiny, (1, 2))
    v_t, w_t = oracle.decide_unstable(s22kit.S22, cfg_t, cell_t, ORACLE_BUDGET)
    tiny_ok = v_t is True and s22kit.replay_witness(cfg_t, w_t.cells(), cell_t)
    notes.append(f"oracle on composed G(30) selector+or instance: {v_t}")
    ok = blocks_ok and sat_s is True and sat_u is False and replay_ok and tiny_ok
    report(capsys, 9, ok, "[DOWNGRADED to per-pattern oracle verification plus compositional witness replay] "
                          + "; ".join(notes) + f", {time.time() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- criterion 10


def test_criterion_10_determinism(capsys):
    t0 = time.time()
    digests = {name: [digest(list(fn(w))) for w in WORKER_COUNTS]
               for name, fn in (("1", c1_decisions), ("5", c5_table), ("6", c6_results))}
    same = {name: len(set(ds)) == 1 for name, ds in digests.items()}
    ok = all(same.values())
    detail = ", ".join(f"criterion {k} {'identical' if v else 'DIFFERENT'} ({digests[k][0][:12]})"
                       for k, v in same.items())
    report(capsys, 10, ok, f"workers {WORKER_COUNTS}: {detail}, {time.time() - t0:.0f}s")
    assert ok
