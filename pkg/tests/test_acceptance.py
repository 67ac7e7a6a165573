"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; a pytest failure in any test is that criterion's FAIL.
"""

import math
import random
import time

import numpy as np
import pytest

from netvec.dataset import (UpdateEvent, generate_synthetic, parse_network,
                            run_update_stream)
from netvec.oracle import (blackhole_events, interval_partition, looped_headers,
                           simulate_all)
from netvec.prefixes import Prefix
from netvec.rectify import path_quality, rectify
from netvec.trie import HeaderTrie
from netvec.vectors import (ForwardingVector, StateVector, basis_matrix,
                            least_squares_reference, project)
from netvec.verify import (NetworkState, batch_update, merge_affected,
                           verify_reachability)

from conftest import (RECT_NETWORK, TOY_NETWORK, headers_of, naive_lpm, pfx,
                      random_small_network)


def note(criterion: int, detail: str) -> None:
    print(f"[criterion {criterion:2d}] PASS - {detail}")


def order_bits(vec, session, order):
    index = {str(p): j for j, p in enumerate(session.classes)}
    return [(vec.bits >> index[name]) & 1 for name in order]


# ----------------------------------------------------------------------
# 1. golden toy network

def test_c01_golden_toy_network():
    t0 = time.perf_counter()
    spec = parse_network(TOY_NETWORK)
    state = NetworkState.from_spec(spec)
    state.apply_update(UpdateEvent("insert", "Q", pfx("0/1"), 0, 0))
    affected = state.affected_for(pfx("0/1"))
    assert {str(p) for p in affected.classes} == {"000/3", "001/3", "01/2"}

    session = state.session(affected=affected)
    order = ["001/3", "000/3", "01/2"]     # the worked example's coordinates
    b_init = session.all_ones()
    b_y = project(session.fwd_vectors[("Y", 0)], b_init)
    assert order_bits(b_y, session, order) == [1, 1, 0]
    b_u = project(session.fwd_vectors[("U", 0)], b_y)
    assert order_bits(b_u, session, order) == [0, 1, 0]

    report = verify_reachability(session, "Y", "R")
    assert {str(p) for p in report.reachable} == {"000/3"}
    (path,) = report.per_path
    assert path.path == ("Y", "U", "R")
    assert path.b_final == b_u
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    note(1, f"s_affected/b_Y/b_U/reachable exact in {elapsed * 1000:.0f} ms")


# ----------------------------------------------------------------------
# 2. transformation worked example

def test_c02_transform_matrix_entries():
    spec = parse_network(TOY_NETWORK + "RULE Q 0/1 0\nXFORM U 01/2 -> 00/2\n")
    state = NetworkState.from_spec(spec)
    session = state.session()
    assert [str(p) for p in session.classes] == ["000/3", "001/3", "01/2", "1/1"]
    printed = np.array([[1, 0, 1, 0],
                        [0, 1, 1, 0],
                        [0, 0, 0, 0],
                        [0, 0, 0, 1]])
    got = session.transforms["U"].to_dense()
    assert (got == printed).all()
    note(2, "U's 4x4 rewrite matrix matches entry-for-entry")


# ----------------------------------------------------------------------
# 3. rectification golden test

def test_c03_rectification_golden():
    spec = parse_network(RECT_NETWORK)
    state = NetworkState.from_spec(spec)
    result = rectify(state, "Y", "R", {pfx("01/2")})
    assert [(f.router, str(f.prefix), f.port) for f in result.fixes] == \
        [("Q", "01/2", 1)]
    assert {str(p) for p in result.achieved} == {"01/2"}
    arrivals = [r for r in result.report.per_path if r.path[-1] == "R"]
    assert arrivals and arrivals[0].b_final.to_bits() == [0, 1, 0]
    note(3, "fix (Q, 01/2, port 1) emitted; post-fix b_Q = [0,1,0], R reachable")


# ----------------------------------------------------------------------
# 4. oracle equivalence: reachability

def test_c04_reachability_equals_oracle():
    t0 = time.perf_counter()
    rng = random.Random(0)
    pairs_checked = 0
    for seed in range(100):
        extras = seed % 10 < 3               # ACLs + rewrites in 30% of runs
        spec = random_small_network(seed, gap_fraction=0.25,
                                    n_acls=2 if extras else 0,
                                    n_transforms=1 if extras else 0)
        assert spec.rule_count <= 200 and len(spec.routers) <= 16
        state = NetworkState.from_spec(spec)
        session = state.session()
        for _ in range(5):
            src, dst = rng.sample(spec.routers, 2)
            got = headers_of(verify_reachability(session, src, dst).reachable,
                             spec.width)
            want = simulate_all(spec, src, dst).reachable
            assert got == want, (seed, src, dst)
            pairs_checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    note(4, f"{pairs_checked} (src,dst) pairs over 100 networks, "
            f"0 mismatches in {elapsed:.1f} s")


# ----------------------------------------------------------------------
# 5. oracle equivalence: loops + blackholes

def test_c05_loops_and_blackholes_equal_oracle():
    from netvec.verify import detect_blackhole, detect_loop

    rng = random.Random(1)
    loops_seen = 0
    holes_seen = 0
    for seed in range(100):
        spec = random_small_network(seed, gap_fraction=0.3,
                                    back_edges=rng.randint(0, 3),
                                    n_acls=1 if seed % 4 == 0 else 0)
        state = NetworkState.from_spec(spec)
        session = state.session()
        src = spec.routers[seed % len(spec.routers)]
        sim = simulate_all(spec, src, None)

        found = detect_loop(session, src).found
        assert found == bool(looped_headers(sim)), seed
        loops_seen += found

        got = set()
        for rep in detect_blackhole(session, src):
            for h in headers_of(rep.headers, spec.width):
                got.add((rep.router, h))
        covered = headers_of(session.classes, spec.width)
        want = {(r, h) for r, h in blackhole_events(sim) if h in covered}
        assert got == want, seed
        holes_seen += len(got)
    assert loops_seen > 0 and holes_seen > 0
    note(5, f"loop presence matched on 100 networks ({loops_seen} loops); "
            f"{holes_seen} blackhole events matched exactly")


# ----------------------------------------------------------------------
# 6. projection = least squares

def test_c06_projection_equals_normal_equations():
    rng = random.Random(2)
    for trial in range(10000):
        m = rng.randint(1, 64)
        v = ForwardingVector(rng.getrandbits(m), m, ("X", 0))
        b = StateVector(rng.getrandbits(m), m)
        dense = least_squares_reference(basis_matrix(v),
                                        np.array(b.to_bits(), float))
        got = project(v, b).to_bits()
        assert got == [int(x) for x in np.rint(dense["projection"])], trial
    note(6, "10000 random projections match the dense solver bitwise")


# ----------------------------------------------------------------------
# 7. partition correctness

def test_c07_partition_bijection_and_size_bound():
    rng = random.Random(3)
    for trial in range(1000):
        width = rng.choice([6, 8])
        n = rng.randint(1, 20)
        prefixes = set()
        while len(prefixes) < n:
            length = rng.randint(1, width)
            prefixes.add(Prefix(rng.getrandbits(length), length))
        trie = HeaderTrie(width)
        for i, p in enumerate(sorted(prefixes, key=lambda p: (p.value, p.length))):
            trie.insert_header(p, (f"r{i % 5}", i % 4))
        leaves = [p.range(width) for p, _, _ in trie.leaf_entries()]
        cells = interval_partition(prefixes, width)
        assert sorted(leaves) == cells, trial
        assert trie.iatomic_count <= width * len(prefixes), trial
    note(7, "1000 rule sets: leaves biject with interval cells; "
            "iatomic count within L x rules")


# ----------------------------------------------------------------------
# 8. non-interference of rectification

def test_c08_rectification_non_interference():
    rng = random.Random(4)
    scenarios = 0
    regressions = 0
    seed = 0
    while scenarios < 50:
        seed += 1
        assert seed < 1000, "scenario generation stalled"
        spec = random_small_network(seed, max_nodes=10)
        state = NetworkState.from_spec(spec)
        src, dst = spec.routers[0], spec.routers[-1]
        base = verify_reachability(state.session(), src, dst)
        if not base.reachable:
            continue
        target = sorted(base.reachable, key=lambda p: (p.value, p.length))[0]
        broken = None
        for router in base.per_path[0].path[:-1]:
            port = state.tables[router].get(target)
            if port is not None:
                broken = (router, target, port)
                break
        if broken is None:
            continue
        router, prefix, port = broken
        state.apply_update(UpdateEvent("delete", router, prefix, port, 0))
        # a genuine break: the victim now drops the class entirely; when a
        # covering aggregate reroutes it instead, stealing it back would
        # disturb live traffic and refusing the fix is the correct outcome
        if naive_lpm(state.tables, spec.width, router,
                     target.range(spec.width)[0]) is not None:
            continue
        post_break = verify_reachability(state.session(), src, dst)
        if target in post_break.reachable:
            continue

        pairs = [(a, b) for a in spec.routers for b in spec.routers if a != b]
        before = {(a, b): simulate_all(state.spec, a, b).reachable
                  for a, b in pairs}
        result = rectify(state, src, dst, {target})
        assert target in result.achieved, seed
        for (a, b), had in before.items():
            now = simulate_all(state.spec, a, b).reachable
            lost = had - now
            if lost:
                regressions += 1
        scenarios += 1
    assert regressions == 0
    note(8, "50 break-one-rule scenarios: every previously reachable "
            "(src, dst, header) triple still reachable")


# ----------------------------------------------------------------------
# 9. desk-scale performance (Table II proxy)

def test_c09_desk_scale_performance():
    spec = generate_synthetic(1000, 100000, 1000, seed=42, width=32)
    assert spec.rule_count >= 900_000
    rng = random.Random(7)
    all_keys = [(r, p) for r in spec.routers for p in spec.rules[r]]
    sample = rng.sample(all_keys, 600)
    events = []
    for r, p in sample[:300]:
        port = spec.rules[r].pop(p)
        events.append(UpdateEvent("insert", r, p, port, len(events)))
    for r, p in sample[300:]:
        events.append(UpdateEvent("delete", r, p, spec.rules[r][p], len(events)))

    records, summary = run_update_stream(spec, events, seed=1)
    times = sorted(rec.verify_us for rec in records)
    frac_fast = sum(1 for t in times if t <= 2500.0) / len(times)
    assert summary.p50_us <= 1000.0, summary
    assert frac_fast >= 0.70, frac_fast
    note(9, f"1000 nodes / 100k links / {spec.rule_count + 300} rules: "
            f"median {summary.p50_us:.0f} us, {frac_fast:.0%} <= 2.5 ms "
            f"across {len(records)} updates (load excluded)")


# ----------------------------------------------------------------------
# 10. linear scaling across rule doublings

def test_c10_linear_scaling():
    sizes = [256, 512, 1024, 2048]
    medians = []
    for n_prefixes in sizes:
        spec = generate_synthetic(120, 480, n_prefixes, seed=5, width=32)
        rng = random.Random(11)
        all_keys = [(r, p) for r in spec.routers for p in spec.rules[r]]
        events = []
        for r, p in rng.sample(all_keys, 150):
            port = spec.rules[r].pop(p)
            events.append(UpdateEvent("insert", r, p, port, len(events)))
        _, summary = run_update_stream(spec, events, seed=3)
        medians.append(summary.p50_us)
    ratios = [b / a for a, b in zip(medians, medians[1:])]
    assert all(r <= 2.5 for r in ratios), (medians, ratios)
    xs = [math.log2(s) for s in sizes]
    ys = [math.log2(m) for m in medians]
    n = len(xs)
    slope = ((n * sum(x * y for x, y in zip(xs, ys)) - sum(xs) * sum(ys))
             / (n * sum(x * x for x in xs) - sum(xs) ** 2))
    assert slope <= 1.33, (medians, slope)
    note(10, f"medians {['%.0f' % m for m in medians]} us across doublings; "
             f"ratios {['%.2f' % r for r in ratios]}, log-log slope {slope:.2f}")


# ----------------------------------------------------------------------
# 11. batch equivalence

def test_c11_batch_equals_sequential():
    rng = random.Random(6)
    for trial in range(50):
        spec = random_small_network(trial + 500, gap_fraction=0.2)
        prefixes = sorted({p for t in spec.rules.values() for p in t},
                          key=lambda p: (p.value, p.length))
        events = []
        working = spec.copy()
        for i in range(rng.randint(2, 8)):
            router = rng.choice(spec.routers)
            if rng.random() < 0.4 and working.rules[router]:
                p, port = rng.choice(sorted(working.rules[router].items(),
                                            key=lambda kv: (kv[0].value,
                                                            kv[0].length)))
                events.append(UpdateEvent("delete", router, p, port, i))
                del working.rules[router][p]
            else:
                p = rng.choice(prefixes)
                port = rng.randrange(4)
                events.append(UpdateEvent("insert", router, p, port, i))
                working.rules[router][p] = port
        src, dst = spec.routers[0], spec.routers[-1]

        batch_state = NetworkState.from_spec(spec)
        batch_report, affected = batch_update(batch_state, events, src, dst)

        seq_state = NetworkState.from_spec(spec)
        for ev in events:
            seq_state.apply_update(ev)
        seq_affected = merge_affected(
            [seq_state.affected_for(ev.prefix) for ev in events])
        seq_report = verify_reachability(
            seq_state.session(affected=seq_affected), src, dst)

        assert batch_state.trie.snapshot() == seq_state.trie.snapshot(), trial
        assert batch_report.reachable_vector == seq_report.reachable_vector, trial
        assert batch_report.reachable == seq_report.reachable, trial

    # wall-time: one batched verification beats per-update on >= 100 updates;
    # best of three repetitions filters out GC pauses inside a timed window
    import gc

    def stream_events():
        spec = generate_synthetic(60, 240, 400, seed=9, width=32)
        picker = random.Random(10)
        keys = [(r, p) for r in spec.routers for p in spec.rules[r]]
        evs = []
        for r, p in picker.sample(keys, 120):
            port = spec.rules[r].pop(p)
            evs.append(UpdateEvent("insert", r, p, port, len(evs)))
        return spec, evs

    def timed(mode):
        best = math.inf
        for _ in range(3):
            spec, evs = stream_events()
            gc.collect()
            recs, _ = run_update_stream(spec, evs, mode=mode,
                                        batch_size=len(evs), seed=2)
            best = min(best, sum(r.verify_us for r in recs))
        return best

    t_seq = timed("per-update")
    t_bat = timed("batch")
    assert t_bat <= t_seq, (t_bat, t_seq)
    note(11, f"50 batches equal sequential bitwise; 120-update batch wall "
             f"time {t_bat:.0f} us <= sequential {t_seq:.0f} us")


# ----------------------------------------------------------------------
# 12. path-quality trend

def test_c12_path_quality_trend():
    rng = random.Random(8)
    samples = 0
    wins = 0
    seed = 0
    while samples < 200:
        seed += 1
        assert seed < 500, "sample generation stalled"
        nodes = rng.randint(10, 24)
        edges = min(nodes * (nodes - 1) // 2, int(nodes * 1.8))
        spec = generate_synthetic(nodes, edges, nodes, seed=seed, width=16,
                                  mask_distribution={6: 1, 8: 3, 10: 2})
        state = NetworkState.from_spec(spec)
        session = state.session()
        leaf_classes = set(session.classes)
        homes = [(p, r) for p, r in state.homes.items() if p in leaf_classes]
        if not homes:
            continue
        for _ in range(4):
            if samples >= 200:
                break
            target, dst = homes[rng.randrange(len(homes))]
            src = rng.choice([r for r in spec.routers if r != dst])
            b0 = session.query_vector([target])
            if b0.is_zero():
                continue
            qualities = path_quality(session, src, dst, b_init=b0,
                                     max_paths=4000)
            shortest = min(len(q.path) for q in qualities)
            window = [q for q in qualities if len(q.path) <= shortest + 2]
            best = min(q.cumulative_l2 for q in window)
            attained = any(len(q.path) == shortest
                           and q.cumulative_l2 == best for q in window)
            samples += 1
            wins += attained
    assert wins / samples >= 0.95, (wins, samples)
    note(12, f"shortest path attains the minimum cumulative error in "
             f"{wins}/{samples} samples")
