"""Command-line runner: ``pointscatter <command> [flags]``.

Every data command writes ``<out>/<command>.csv`` and a JSON manifest next to
it.  Work is split into independent tasks whose results are gathered in task
order, so the worker count never changes the bytes written.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import lattice_arith as la
from .budget import ENV_VAR, active_budget
from .errors import DomainError, NoSignChangeError, PointScatterError
from .spectral_core import (ETA_MIN, CouplingMode, SpectralProblem, gaps_between,
                            solve_gap, weak_constant_from_phi)

PACKAGE = "artifact"


# ---------------------------------------------------------------------------
# table output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".16e")
    return str(x)


def render_csv(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=",", lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise PointScatterError(f"row has {len(r)} cells, header has {len(header)}")
        w.writerow([fmt(c) for c in r])
    return buf.getvalue().encode("utf-8")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def code_version() -> str:
    try:
        return metadata.version(PACKAGE)
    except metadata.PackageNotFoundError:
        return "unknown"


def write_outputs(out: Path, command: str, header, rows, params: dict, extra: dict,
                  t0: float) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    data = render_csv(header, rows)
    csv_path = out / f"{command}.csv"
    csv_path.write_bytes(data)
    manifest = {
        "command": command,
        "parameters": params,
        "code_version": code_version(),
        "python": platform.python_version(),
        "budget": active_budget().name,
        "wall_time": round(time.perf_counter() - t0, 3),
        **extra,
        "files": [{"name": csv_path.name, "sha256": sha256(data), "rows": len(rows)}],
    }
    (out / f"{command}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path


def run_tasks(func, tasks: list, workers: int) -> list:
    """Map func over tasks, results in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(func, tasks))


def chunks(items: list, n: int) -> list[list]:
    """Split into contiguous pieces; the split depends only on len(items)."""
    size = max(1, math.ceil(len(items) / max(n, 1)))
    return [items[i:i + size] for i in range(0, len(items), size)]


TASK_CHUNKS = 64  # fixed so task boundaries do not follow the worker count


# ---------------------------------------------------------------------------
# problem construction


def _eta(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eta must be a number, got {text!r}") from None
    if not ETA_MIN < v < 1:
        raise argparse.ArgumentTypeError(f"eta must lie in (131/146, 1), got {v}")
    return v


def _problem_params(args) -> dict:
    p = {"dim": args.dim, "T": args.T, "tail_model": args.tail_model,
         "x0": list(args.x0) if args.x0 else [0.0] * args.dim}
    if args.strong:
        p.update(coupling="strong", eta=args.eta, rhs=args.rhs)
    else:
        c = args.rhs if args.phi is None else weak_constant_from_phi(args.dim, args.phi)
        p.update(coupling="weak", rhs=c, phi=args.phi)
    return p


def make_problem(p: dict) -> SpectralProblem:
    if p["coupling"] == "strong":
        mode = CouplingMode.strong(p["eta"], p["rhs"])
    else:
        mode = CouplingMode.weak(p["rhs"])
    return SpectralProblem(p["dim"], mode, T=p["T"], tail_model=p["tail_model"],
                           x0=tuple(p["x0"]))


def add_problem_flags(sp: argparse.ArgumentParser, dims=(2, 3), default_dim=2) -> None:
    sp.add_argument("--dim", type=int, choices=dims, default=default_dim)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--weak", action="store_true", help="constant right-hand side (default)")
    g.add_argument("--strong", action="store_true", help="windowed equation, d = 2 only")
    sp.add_argument("--rhs", type=float, default=0.0,
                    help="right-hand side: the weak constant, or the strong RHS")
    sp.add_argument("--phi", type=float, default=None,
                    help="weak coupling via C = tan(phi/2) c0 instead of --rhs")
    sp.add_argument("--eta", type=_eta, default=0.9)
    sp.add_argument("--T", type=float, default=64.0, help="listed-shell half-width")
    sp.add_argument("--tail-model", dest="tail_model", choices=("density", "none"),
                    default="density")
    sp.add_argument("--x0", type=float, nargs="*", default=None)


def add_common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", type=Path, default=Path("."))
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--config", type=Path, default=None,
                    help="key=value file; command-line flags win")


# ---------------------------------------------------------------------------
# eigenvalues


EIG_HEADER = ["m_lo", "m_hi", "lambda", "delta", "residual", "tail_bound"]


def _eig_task(task):
    p, gaps = task
    prob = make_problem(p)
    rows = []
    for lo, hi in gaps:
        try:
            e = solve_gap(prob, lo, hi)
        except NoSignChangeError:
            continue  # strong coupling: the window equation can miss a gap
        rows.append([lo, hi, e.nearest_m + e.delta, e.delta, e.residual, e.tail_bound])
    return rows


def cmd_eigenvalues(args) -> int:
    t0 = time.perf_counter()
    p = _problem_params(args)
    if args.max <= args.min:
        raise DomainError("--max must exceed --min")
    gaps = gaps_between(args.dim, int(math.floor(args.min)), int(math.ceil(args.max)))
    gaps = [g for g in gaps if g[0] >= args.min and g[1] <= args.max]
    tasks = [(p, c) for c in chunks(gaps, TASK_CHUNKS)]
    rows = [r for part in run_tasks(_eig_task, tasks, args.workers) for r in part]
    write_outputs(args.out, "eigenvalues", EIG_HEADER, rows,
                  {**p, "min": args.min, "max": args.max},
                  {"truncation": _truncation(p), "gap_count": len(gaps)}, t0)
    return 0


def _truncation(p: dict) -> dict:
    prob = make_problem(p)
    return {"T": prob.T, "exact_halfwidth": prob.halfwidth, "tail_model": prob.tail_model,
            "budget": active_budget().name}


# ---------------------------------------------------------------------------
# scar3d


SENSITIVITY_RADII = (0.025, 0.1)


def scar3d_header(lmax: int) -> list[str]:
    from .observables import harmonic_indices
    h = ["l", "k", "m", "r3_m", "lambda", "delta", "residual", "predicted_delta_bound",
         "certified", "A_l", "a_formula", "nearest_shell_mass", "atom_weight",
         "atom_element", "atom_bound"]
    h += [f"atom_weight_r{r}" for r in SENSITIVITY_RADII]
    h += ["total_mass", "tail_mass_bound"]
    for l, m in harmonic_indices(3, lmax):
        if l >= 1:
            h += [f"Y{l}_{m}", f"Y{l}_{m}_delta_omega"]
    h += ["max_residual_deg4"]
    return h


def _scar3d_task(task):
    from .observables import (MomentumObservable, atom_mass, harmonic_indices,
                              momentum_matrix_element)
    from .scar_hunt import power4_sequence, solve_candidate
    from .wavefunction import a_l_estimate, eigenstate
    p, l, k, lmax, radius = task
    prob = make_problem(p)
    cand = solve_candidate(prob, power4_sequence(l, k, k)[0])
    e = cand.solved
    st = eigenstate(prob, e)
    dirs = la.direction_set(3, l).directions
    am = atom_mass(prob, st, dirs, radius)
    sens = [atom_mass(prob, st, dirs, r).weight for r in SENSITIVITY_RADII]
    A = a_l_estimate(prob, e)
    row = [l, k, cand.m, cand.r_m, e.nearest_m + e.delta, e.delta, e.residual,
           cand.predicted_delta_bound, cand.certified, A, 1.0 / (1.0 + A / cand.r_m),
           st.mass_of(cand.m), am.weight, am.element, am.bound, *sens,
           st.total_mass(), st.tail_mass_bound]
    worst = 0.0
    for hl, hm in harmonic_indices(3, lmax):
        if hl < 1:
            continue
        Y = MomentumObservable.harmonic(3, hl, hm)
        val, bound = momentum_matrix_element(prob, st, Y)
        d_om = float(np.mean(Y(dirs)))
        row += [val, d_om]
        if hl <= 4:
            worst = max(worst, abs(val - am.weight * d_om) - bound)
    row.append(worst)
    return row


def cmd_scar3d(args) -> int:
    t0 = time.perf_counter()
    args.dim = 3
    if args.strong:
        raise DomainError("strong coupling is defined for dim = 2 only")
    p = _problem_params(args)
    tasks = [(p, l, k, args.lmax, args.radius) for l in args.l
             for k in range(args.k_min, args.k_max + 1)]
    rows = run_tasks(_scar3d_task, tasks, args.workers)
    write_outputs(args.out, "scar3d", scar3d_header(args.lmax), rows,
                  {**p, "l": args.l, "k_min": args.k_min, "k_max": args.k_max,
                   "lmax": args.lmax, "radius": args.radius},
                  {"truncation": _truncation(p), "sensitivity_radii": list(SENSITIVITY_RADII)},
                  t0)
    return 0


# ---------------------------------------------------------------------------
# scar2d


SCAR2D_HEADER = [
    "m", "n", "r2_m", "h", "r_boost", "boost_ratio", "predicted_delta_bound", "certified",
    "lambda", "delta", "residual", "momentum_element", "wf_threshold", "atom_weight",
    "momentum_bound", "position_re", "position_im", "position_bound", "position_threshold",
    "total", "v1_term", "v3_term", "v2_paired", "v1_constant", "kappa", "kappa_prime",
    "small_delta_regime", "negatives", "unclassified", "annulus_ok",
]


def _scar2d_task(task):
    from .observables import (MomentumObservable, PositionObservable, atom_mass,
                              classify_pairs, negative_sum_decomposition,
                              position_matrix_element, weyl_sum)
    from .scar_hunt import solve_candidate
    from .wavefunction import eigenstate
    p, cand, radius = task
    prob = make_problem(p)
    cand = solve_candidate(prob, cand)
    e = cand.solved.centered_at(cand.m)
    st = eigenstate(prob, e)
    dirs = la.direction_set(2, cand.m).directions
    am = atom_mass(prob, st, dirs, radius)
    wf = weyl_sum(2, cand.m, MomentumObservable.bumps(dirs, radius)) / (2.2 * cand.r_m) - 0.05
    pos, pb = position_matrix_element(prob, e, PositionObservable(2, (0, 2)))
    ns = negative_sum_decomposition(prob, e)
    pairs = classify_pairs(prob, e)
    R = math.sqrt(cand.m + e.delta)
    ann = all((R - 2) ** 2 <= q.v[0] ** 2 + q.v[1] ** 2 <= (R + 2) ** 2 for q in pairs)
    h, rb = cand.boost_neighbor
    return [cand.m, cand.form[1], cand.r_m, h, rb, cand.boost_ratio,
            cand.predicted_delta_bound, cand.certified, e.nearest_m + e.delta, e.delta,
            e.residual, am.element, wf, am.weight, am.bound, pos.real, pos.imag, pb,
            0.8 * 2 / (2.2 * cand.r_m), ns.total, ns.v1_term, ns.v3_term, ns.v2_paired,
            ns.v1_constant, ns.kappa, ns.kappa_prime, abs(e.delta) < 0.1, len(pairs),
            ns.counts["unclassified"], ann]


def cmd_scar2d(args) -> int:
    from .scar_hunt import crt_progression, scan_n2_plus_1
    t0 = time.perf_counter()
    args.dim = 2
    p = _problem_params(args)
    prog = crt_progression(args.K)
    cands = scan_n2_plus_1(prog, (args.x_min, args.x_max), args.r_cap, args.min_ratio)
    rows = run_tasks(_scar2d_task, [(p, c, args.radius) for c in cands], args.workers)
    write_outputs(args.out, "scar2d", SCAR2D_HEADER, rows,
                  {**p, "K": args.K, "x_min": args.x_min, "x_max": args.x_max,
                   "r_cap": args.r_cap, "min_ratio": args.min_ratio, "radius": args.radius},
                  {"truncation": _truncation(p),
                   "candidate_ranges": {"x": [args.x_min, args.x_max], "P": prog.P,
                                        "r": prog.r, "stride": prog.stride}}, t0)
    return 0


# ---------------------------------------------------------------------------
# density


DENSITY_HEADER = ["x", "boost_pairs", "x_over_sqrt_log_x", "x_over_log_x"]


def _density_task(task):
    from .scar_hunt import boost_pair_count
    x, ratio, hspan, rcap = task
    return [x, boost_pair_count(x, ratio, hspan, rcap), x / math.sqrt(math.log(x)),
            x / math.log(x)]


def cmd_density(args) -> int:
    t0 = time.perf_counter()
    if any(x < 3 for x in args.x):
        raise DomainError("every x must be at least 3")
    tasks = [(x, args.ratio, args.h_span, args.r_cap) for x in args.x]
    rows = run_tasks(_density_task, tasks, args.workers)
    params = {"x": args.x, "ratio": args.ratio, "h_span": args.h_span, "r_cap": args.r_cap}
    write_outputs(args.out, "density", DENSITY_HEADER, rows, params,
                  {"candidate_ranges": {"x_max": max(args.x)}}, t0)
    return 0


# ---------------------------------------------------------------------------
# plot


PLOT_SPECS = {
    "eigenvalues": ("lambda", ["delta"], "new eigenvalue offsets"),
    "scar3d": ("k", ["atom_weight", "nearest_shell_mass", "a_formula"], "mass vs k"),
    "scar2d": ("m", ["momentum_element", "position_re"], "mass vs m"),
    "density": ("x", ["boost_pairs", "x_over_sqrt_log_x"], "boost-pair counts"),
}

PLOT_TEMPLATE = '''"""Render {name} from {table}."""
import csv

import matplotlib.pyplot as plt

with open({table!r}, newline="", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))

xcol, ycols = {xcol!r}, {ycols!r}
group = {group!r}
fig, ax = plt.subplots(figsize=(7, 4.5))
keys = sorted({{r[group] for r in rows}}) if group else [None]
for key in keys:
    sub = [r for r in rows if group is None or r[group] == key]
    xs = [float(r[xcol]) for r in sub]
    for col in ycols:
        label = col if key is None else f"{{col}} ({{group}}={{key}})"
        ax.plot(xs, [float(r[col]) for r in sub], marker="o", label=label)
ax.set_xlabel(xcol)
ax.set_title({title!r})
if {logx!r}:
    ax.set_xscale("log")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def cmd_plot(args) -> int:
    table = Path(args.table)
    try:
        with table.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh))
    except (OSError, StopIteration) as exc:
        raise DomainError(f"cannot read table {table}: {exc}") from None
    exact = {tuple(EIG_HEADER): "eigenvalues", tuple(SCAR2D_HEADER): "scar2d",
             tuple(DENSITY_HEADER): "density"}
    name = exact.get(tuple(header))
    if name is None and header[:2] == scar3d_header(1)[:2] and "max_residual_deg4" in header:
        name = "scar3d"
    if name is None:
        raise DomainError(f"unknown table schema in {table}")
    xcol, ycols, title = PLOT_SPECS[name]
    script = PLOT_TEMPLATE.format(name=name, table=str(table), xcol=xcol, ycols=ycols,
                                  group="l" if name == "scar3d" else None, title=title,
                                  logx=name in ("scar2d", "density"),
                                  png=str(table.with_suffix(".png")))
    out = Path(args.output) if args.output else table.with_name(f"plot_{name}.py")
    out.write_text(script, encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# selftest


def cmd_selftest(args) -> int:
    from .shellsum import series_c0
    checks = []
    checks.append(("r2(25) = 12", la.r2(25) == 12))
    checks.append(("r3(2) = 12", la.r3(2) == 12))
    checks.append(("R3(9) = 24", la.primitive_r3(9) == 24))
    checks.append(("moebius n=9", la.verify_r3_moebius(9)))
    prob = SpectralProblem(2)
    e = solve_gap(prob, 1, 2)
    checks.append(("gap (1, 2) solved", 1 < e.nearest_m + e.delta < 2 and e.residual < 1e-9))
    c0, _ = series_c0(2)
    checks.append(("c0(2) ~ 4.7968", abs(c0 - 4.796825751057403) < 1e-8))
    ok = all(c for _, c in checks)
    for name, c in checks:
        print(f"{'ok  ' if c else 'FAIL'} {name}")
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pointscatter",
                                 description="Toral point scatterers: eigenvalues and scars.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eigenvalues", help="one new eigenvalue per gap")
    add_problem_flags(sp)
    sp.add_argument("--min", type=float, default=0.0)
    sp.add_argument("--max", type=float, required=True)
    add_common_flags(sp)
    sp.set_defaults(func=cmd_eigenvalues)

    sp = sub.add_parser("scar3d", help="4^k l sequences in dimension 3")
    add_problem_flags(sp, dims=(3,), default_dim=3)
    sp.add_argument("--l", type=int, nargs="+", default=[1, 2, 5])
    sp.add_argument("--k-min", dest="k_min", type=int, default=3)
    sp.add_argument("--k-max", dest="k_max", type=int, default=8)
    sp.add_argument("--lmax", type=int, default=4, help="harmonic degree cap")
    sp.add_argument("--radius", type=float, default=0.05)
    add_common_flags(sp)
    sp.set_defaults(func=cmd_scar3d)

    sp = sub.add_parser("scar2d", help="m = x^2 + 1 candidates in dimension 2")
    add_problem_flags(sp, dims=(2,), default_dim=2)
    sp.add_argument("--K", type=int, default=13)
    sp.add_argument("--x-min", dest="x_min", type=int, default=0)
    sp.add_argument("--x-max", dest="x_max", type=int, default=30000)
    sp.add_argument("--r-cap", dest="r_cap", type=int, default=32)
    sp.add_argument("--min-ratio", dest="min_ratio", type=float, default=16.0)
    sp.add_argument("--radius", type=float, default=0.05)
    add_common_flags(sp)
    sp.set_defaults(func=cmd_scar2d)

    sp = sub.add_parser("density", help="boost-pair counts against x")
    sp.add_argument("--x", type=int, nargs="+", default=[10**5, 10**6, 10**7])
    sp.add_argument("--ratio", type=float, default=4.0)
    sp.add_argument("--h-span", dest="h_span", type=int, default=2)
    sp.add_argument("--r-cap", dest="r_cap", type=int, default=32)
    add_common_flags(sp)
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("plot", help="write a plotting script for a table")
    sp.add_argument("table")
    sp.add_argument("--output", default=None)
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("selftest", help="quick consistency checks")
    sp.set_defaults(func=cmd_selftest)
    return ap


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{no}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _commands(parser: argparse.ArgumentParser) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return sub.choices


def _config_argv(parser: argparse.ArgumentParser, command: str, cfg: dict[str, str]
                 ) -> list[str]:
    """Turn config entries into flags placed before the real ones (flags win)."""
    sp = _commands(parser)[command]
    by_dest = {a.dest: a for a in sp._actions if a.option_strings}
    argv = []
    for k, v in cfg.items():
        act = by_dest.get(k)
        if act is None or k == "config":
            raise DomainError(f"unknown config key {k!r} for {command}")
        flag = act.option_strings[-1]
        if act.nargs == 0:
            if v.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
        elif act.nargs in ("*", "+"):
            argv += [flag, *v.replace(",", " ").split()]
        else:
            argv += [flag, v]
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # config entries become leading flags, so required flags may come from the file
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", type=Path, default=None)
        known, _ = pre.parse_known_args(argv[1:])
        if known.config is not None and argv and argv[0] in _commands(parser):
            cfg = read_config(known.config)
            argv = [argv[0], *_config_argv(parser, argv[0], cfg), *argv[1:]]
        args = parser.parse_args(argv)
        if getattr(args, "workers", 1) < 1:
            raise DomainError("--workers must be at least 1")
        if os.environ.get(ENV_VAR):
            active_budget()  # fail early on an unknown profile
        return args.func(args)
    except PointScatterError as exc:
        print(f"pointscatter: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
