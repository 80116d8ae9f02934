"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

The heavy runs go through the command-line runner so that the determinism
check and the physics checks read the very same CSV bytes.
"""

import csv
import hashlib
import json
import math
import time

import numpy as np
import pytest

from pointscatter import cli
from pointscatter import lattice_arith as la
from pointscatter.observables import MomentumObservable, gram_matrix, momentum_matrix_element, weyl_sum
from pointscatter.scar_hunt import boost_pair_scan, solve_candidate
from pointscatter.spectral_core import SpectralProblem, gaps_between, solve_gap
from pointscatter.wavefunction import eigenstate

from oracles import brute_r2_table

WORKERS = (1, 4, 16)
EIG_ARGS = ["eigenvalues", "--dim", "2", "--weak", "--rhs", "0", "--max", "2000"]
SCAR3D_ARGS = ["scar3d", "--l", "1", "2", "5", "--k-min", "3", "--k-max", "8", "--lmax", "4",
               "--radius", "0.05"]
SCAR2D_ARGS = ["scar2d", "--K", "13", "--x-min", "0", "--x-max", "30000", "--r-cap", "32",
               "--min-ratio", "16", "--radius", "0.05"]


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _run(args, out, workers):
    t0 = time.perf_counter()
    code = cli.main([*args, "--workers", str(workers), "--out", str(out)])
    assert code == 0
    name = args[0]
    data = (out / f"{name}.csv").read_bytes()
    return {"sha": hashlib.sha256(data).hexdigest(), "rows": _rows(out / f"{name}.csv"),
            "manifest": json.loads((out / f"{name}.manifest.json").read_text()),
            "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def eig_runs(tmp_path_factory):
    return {w: _run(EIG_ARGS, tmp_path_factory.mktemp(f"eig{w}"), w) for w in WORKERS}


@pytest.fixture(scope="module")
def scar3d_runs(tmp_path_factory):
    return {w: _run(SCAR3D_ARGS, tmp_path_factory.mktemp(f"s3d{w}"), w) for w in WORKERS}


@pytest.fixture(scope="module")
def scar2d_run(tmp_path_factory):
    return _run(SCAR2D_ARGS, tmp_path_factory.mktemp("s2d"), 4)


def f(row, key):
    return float(row[key])


def test_criterion_1_arithmetic(report):
    t0 = time.perf_counter()
    N = 10**5
    r2_ok = np.array_equal(la.r2_range(0, N), brute_r2_table(N))
    r2_scalar_ok = all(la.r2(n) == v for n, v in zip(range(0, N + 1, 97),
                                                       brute_r2_table(N)[::97].tolist()))
    M = 10**4
    moeb = all(la.verify_r3_moebius(n) for n in range(1, M + 1))
    four = all(la.r3(4 * n) == la.r3(n) for n in range(M + 1))

    def obstructed(n):
        while n and n % 4 == 0:
            n //= 4
        return n > 0 and n % 8 == 7

    obst = all((la.r3(n) == 0) == obstructed(n) for n in range(M + 1))
    dt = time.perf_counter() - t0
    ok = r2_ok and r2_scalar_ok and moeb and four and obst and dt <= 120
    assert report(1, ok, f"r2 = enumeration for n <= 1e5: {r2_ok and r2_scalar_ok}; "
                         f"moebius {moeb}, r3(4n) = r3(n) {four}, obstruction {obst} "
                         f"for n <= 1e4; {dt:.1f}s")


def test_criterion_2_interlacing(eig_runs, report):
    run = eig_runs[1]
    gaps = gaps_between(2, 0, 2000)
    rows = run["rows"]
    brackets = [(int(r["m_lo"]), int(r["m_hi"])) for r in rows]
    one_each = brackets == gaps
    inside = all(int(r["m_lo"]) < f(r, "lambda") < int(r["m_hi"]) for r in rows)
    worst = max(abs(f(r, "residual")) - f(r, "tail_bound") for r in rows)
    ok = one_each and inside and worst <= 1e-9 and run["seconds"] <= 60
    assert report(2, ok, f"{len(rows)} roots for {len(gaps)} gaps below 2000, all inside: "
                         f"{inside}; max(|residual| - tail) = {worst:.2e}; "
                         f"{run['seconds']:.1f}s")


def test_criterion_3_nearby_zeros(scar3d_runs, scar2d_run, report):
    checked = []
    for r in scar3d_runs[4]["rows"] + scar2d_run["rows"]:
        checked.append(abs(f(r, "delta")) / f(r, "predicted_delta_bound"))
    p = SpectralProblem(2)
    for c in boost_pair_scan(20000, 4, 2)[:60]:
        s = solve_candidate(p, c)
        checked.append(abs(s.solved.delta) / c.predicted_delta_bound)
    bad = sum(x > 1 for x in checked)
    ok = len(checked) >= 50 and bad == 0
    assert report(3, ok, f"{len(checked)} solved candidates (3D, n^2+1, boost pairs), "
                         f"{bad} violations, worst |delta|/bound = {max(checked):.3f}")


def test_criterion_4_scarring_3d(scar3d_runs, report):
    run = scar3d_runs[4]
    rows = run["rows"]
    by_l = {}
    for r in rows:
        by_l.setdefault(int(r["l"]), []).append(r)
    low = [(l, int(r["k"]), f(r, "atom_weight")) for l, rs in by_l.items() for r in rs
           if int(r["k"]) >= 5 and f(r, "atom_weight") < 0.45]
    trend = all(f(rs[-1], "atom_weight") >= f(rs[0], "atom_weight") for rs in by_l.values())
    resid = max(f(r, "max_residual_deg4") for r in rows if int(r["k"]) == 8)
    mins = min(f(r, "atom_weight") for r in rows if int(r["k"]) >= 5)
    ok = sorted(by_l) == [1, 2, 5] and not low and trend and resid <= 0.05
    ok = ok and run["seconds"] <= 600
    assert report(4, ok, f"min atom weight (k >= 5) = {mins:.3f}, last >= first: {trend}, "
                         f"max degree<=4 residual beyond tail at k = 8: {resid:.2e}; "
                         f"{run['seconds']:.1f}s")


def test_criterion_5_momentum_2d(scar2d_run, report):
    rows = scar2d_run["rows"]
    strong = [r for r in rows if f(r, "boost_ratio") >= 16]
    margin = [f(r, "momentum_element") - f(r, "wf_threshold") for r in strong]
    ranges = scar2d_run["manifest"]["candidate_ranges"]
    ok = len(strong) >= 3 and min(margin) >= 0 and scar2d_run["seconds"] <= 1200 and ranges
    assert report(5, ok, f"{len(strong)} candidates with boost ratio >= 16 for x in "
                         f"{ranges['x']}, min(mass - W_f/(2.2 r2) + 0.05) = {min(margin):.3f}")


def test_criterion_6_position_2d(scar2d_run, report):
    rows = scar2d_run["rows"]
    low = [(int(r["m"]), f(r, "delta"), f(r, "position_re"), f(r, "position_threshold"))
           for r in rows if f(r, "position_re") < f(r, "position_threshold")]
    annulus = all(r["annulus_ok"] == "1" and r["unclassified"] == "0" for r in rows)
    v1c = max(f(r, "v1_constant") for r in rows)
    ordered = sorted(rows, key=lambda r: int(r["m"]))
    s_first, s_last = f(ordered[0], "v2_paired"), f(ordered[-1], "v2_paired")
    decreasing = abs(s_last) < abs(s_first)
    ok = not low and annulus and v1c <= 20 and decreasing
    detail = (f"{len(rows) - len(low)}/{len(rows)} above 0.8*2/(2.2 r2); annulus and "
              f"classification exact: {annulus}; V1 constant {v1c:.3f}; "
              f"|sum S_w| {abs(s_first):.2e} -> {abs(s_last):.2e}")
    if low:
        detail += "; below: " + ", ".join(f"m={m} delta={d:.3f} re={v:.4f} < {t:.4f}"
                                          for m, d, v, t in low)
    assert report(6, ok, detail)


def test_criterion_7_normalization(scar3d_runs, report):
    p2, p3 = SpectralProblem(2), SpectralProblem(3)
    states = [(p2, solve_gap(p2, lo, hi)) for lo, hi in gaps_between(2, 0, 2000)[::25]]
    states += [(p3, solve_gap(p3, lo, hi)) for lo, hi in gaps_between(3, 0, 5000)[::200]]
    worst_mass, worst_const = 0.0, 0.0
    for prob, e in states:
        st_ = eigenstate(prob, e)
        tot = st_.total_mass()
        worst_mass = max(worst_mass, (1 - st_.tail_mass_bound) - tot, tot - 1)
        v, b = momentum_matrix_element(prob, st_, MomentumObservable.constant(prob.dim))
        worst_const = max(worst_const, abs(v - 1) - b)
    for r in scar3d_runs[4]["rows"]:
        tot = f(r, "total_mass")
        worst_mass = max(worst_mass, (1 - f(r, "tail_mass_bound")) - tot, tot - 1)
    odd = 0
    for n in la.spectrum_elements(3, 2000)[1:201].tolist():
        for l in (1, 3, 5, 7):
            odd += sum(weyl_sum(3, n, MomentumObservable.harmonic(3, l, m)) != 0
                       for m in range(-l, l + 1))
    for n in la.spectrum_elements(2, 2000)[1:201].tolist():
        odd += sum(weyl_sum(2, n, MomentumObservable.fourier(k)) != 0 for k in (1, 3, 5, 7))
    gram_ok = True
    for dim in (2, 3):
        idx, G, sig = gram_matrix(dim, 6, n=1 << 16, seed=11)
        gram_ok &= bool(np.all(np.abs(G - np.eye(len(idx))) <= 3 * sig + 1e-12))
    ok = worst_mass <= 0 and worst_const <= 0 and odd == 0 and gram_ok
    assert report(7, ok, f"{len(states) + len(scar3d_runs[4]['rows'])} eigenstates, mass "
                         f"excess over [1 - tail, 1] {worst_mass:.1e}, constant element "
                         f"excess {worst_const:.1e}; nonzero odd Weyl sums: {odd}; "
                         f"gram within 3 sigma: {gram_ok}")


def test_criterion_8_determinism(eig_runs, scar3d_runs, report):
    e = {eig_runs[w]["sha"] for w in WORKERS}
    s = {scar3d_runs[w]["sha"] for w in WORKERS}
    manifests = all(r["manifest"]["files"][0]["sha256"] == r["sha"]
                    for r in [*eig_runs.values(), *scar3d_runs.values()])
    ok = len(e) == 1 and len(s) == 1 and manifests
    assert report(8, ok, f"workers {WORKERS}: eigenvalues digests {len(e)}, scar3d digests "
                         f"{len(s)}, manifests match: {manifests}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
