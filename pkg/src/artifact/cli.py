"""Command line harness: parse inputs, run one library operation, write JSON/CSV/SVG.

Exit codes: 0 ok, 1 verification failure, 2 input error. Reports carry no timestamps;
wall-clock time goes to stderr only, so identical configs give identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import click
import numpy as np
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from . import banach as bn
from . import classify as cl
from . import coding as cd
from . import mazur as mz
from . import reductions as rd
from . import relations as rl
from . import seqcore as sc
from .plotting import PlotError, plot_spec

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


# ---------------------------------------------------------------------------
# Schemas and input files
# ---------------------------------------------------------------------------

def _load_schemas() -> dict:
    out = {}
    for f in resources.files("artifact").joinpath("schemas").iterdir():
        if f.name.endswith(".json"):
            out[f.name[:-5]] = json.loads(f.read_text())
    return out


_SCHEMAS = _load_schemas()
_REGISTRY = Registry().with_resources(
    (s["$id"], Resource.from_contents(s)) for s in _SCHEMAS.values())


def validate(obj, schema: str) -> None:
    v = Draft202012Validator(_SCHEMAS[schema], registry=_REGISTRY)
    errors = sorted(v.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        loc = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise InputError(f"{schema} schema violation at {loc}: {e.message}")


def read_input(path: Optional[str], schema: Optional[str] = None, required: bool = True):
    if path is None:
        if required:
            raise InputError("--input is required for this command")
        return None
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    if schema:
        validate(obj, schema)
    return obj


def parse(fn, *args):
    """Run a parser, mapping descriptor errors to exit code 2."""
    try:
        return fn(*args)
    except (sc.DescriptorError, rl.CarrierError, KeyError, TypeError, ValueError) as exc:
        raise InputError(str(exc))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def jsonable(v):
    if isinstance(v, Fraction):
        return sc.number_to_json(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [jsonable(a) for a in v.tolist()]
    if isinstance(v, dict):
        return {str(k): jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(a) for a in v]
    if isinstance(v, sc.Seq):
        return sc.to_json(v)
    return v


def dump_json(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n"


def dump_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(a) for a in r])
    return buf.getvalue()


def _cell(a):
    a = jsonable(a)
    if isinstance(a, float):
        return repr(a)
    if isinstance(a, (list, dict)):
        return json.dumps(a, sort_keys=True)
    return a


class Outcome:
    """What a command produced: report body, optional table and plot, pass/fail."""

    def __init__(self, results, ok: bool = True, table=None, plot=None):
        self.results, self.ok, self.table, self.plot = results, ok, table, plot


def emit(ctx_obj: dict, command: str, out: Outcome) -> None:
    cfg = ctx_obj
    report = {"command": command, "config": cfg["echo"], "ok": out.ok, "results": out.results}
    text_json = dump_json(report)
    text_csv = dump_csv(*out.table) if out.table else None
    if cfg["out"]:
        d = Path(cfg["out"])
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{command}.json").write_text(text_json)
        if text_csv is not None:
            (d / f"{command}.csv").write_text(text_csv)
        if out.plot is not None:
            try:
                plot_spec(out.plot, d / f"{command}.svg", cfg["echo"]["seed"])
            except PlotError as exc:
                click.echo(f"plot skipped: {exc}", err=True)
    if cfg["format"] == "csv":
        if text_csv is None:
            raise InputError(f"{command} has no tabular output; use --format json")
        click.echo(text_csv, nl=False)
    else:
        click.echo(text_json, nl=False)
    click.echo(f"{command}: {'ok' if out.ok else 'FAILED'} in {time.perf_counter() - cfg['t0']:.2f}s", err=True)
    sys.exit(EXIT_OK if out.ok else EXIT_FAIL)


# ---------------------------------------------------------------------------
# Shared options
# ---------------------------------------------------------------------------

def common(default_samples: int = 0, default_tol: float = 1e-9, default_horizon: int = rl.DEFAULT_HORIZON):
    def wrap(f):
        opts = [
            click.option("--input", "input_path", type=click.Path(dir_okay=False), default=None,
                         help="JSON input file."),
            click.option("--seed", type=int, default=7, show_default=True),
            click.option("--horizon", type=click.IntRange(1), default=default_horizon, show_default=True,
                         help="Index horizon for decisions."),
            click.option("--tol", type=float, default=default_tol, show_default=True),
            click.option("--out", type=click.Path(file_okay=False), default=None,
                         help="Directory for JSON, CSV and SVG reports."),
            click.option("--samples", type=click.IntRange(0), default=default_samples, show_default=True),
            click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                         show_default=True, help="Format written to stdout."),
        ]
        for o in reversed(opts):
            f = o(f)
        return f
    return wrap


def _context(command: str, input_path, seed, horizon, tol, out, samples, fmt, **extra) -> dict:
    echo = {"command": command, "input": Path(input_path).name if input_path else None, "seed": seed,
            "horizon": horizon, "tol": tol, "samples": samples, **extra}
    return {"echo": echo, "out": out, "format": fmt, "t0": time.perf_counter()}


@click.group()
def main():
    """Decision procedures, reductions and Banach-space numerics."""


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

_CLASSIFY_SCHEMA = {"etbar": "descriptor", "ebbar": "set_family", "metric": "metric_space",
                    "banach": "sum_family"}
_CLASSIFY_KEY = {"etbar": "t", "ebbar": "family", "metric": "X", "banach": "family"}


@main.command()
@common()
@click.option("--relation", type=click.Choice(sorted(_CLASSIFY_SCHEMA)), required=True,
              help="etbar: weights t; ebbar: sets B_i; metric: space X; banach: sum family.")
def classify(input_path, seed, horizon, tol, out, samples, fmt, relation):
    """Classify a relation into Smooth / E0 / E1 / LInfClass with a certificate."""
    ctx = _context("classify", input_path, seed, horizon, tol, out, samples, fmt, relation=relation)
    obj = read_input(input_path)
    key = _CLASSIFY_KEY[relation]
    if isinstance(obj, dict) and key in obj and "kind" not in obj:
        obj = obj[key]
    validate(obj, _CLASSIFY_SCHEMA[relation])
    parser = {"etbar": sc.from_json, "ebbar": rl.family_from_json, "metric": rl.metric_from_json,
              "banach": cl.family_from_json}[relation]
    desc = parse(parser, obj)
    fn = {"etbar": cl.classify_Et, "ebbar": cl.classify_EB, "metric": cl.classify_metric,
          "banach": cl.classify_banach_family}[relation]
    c = parse(fn, desc)
    ok = cl.check_certificate(desc, c)
    label = c.cls[:-len("Class")] if c.cls.endswith("Class") else c.cls
    res = {"relation": relation, "class": label, "class_name": c.cls, "certificate": c.certificate,
           "certificate_ok": ok}
    emit(ctx, "classify", Outcome(res, ok, (["relation", "class", "certificate_ok"], [[relation, label, ok]])))


# ---------------------------------------------------------------------------
# reduce / verify
# ---------------------------------------------------------------------------

def _source_element(obj):
    if isinstance(obj, list):
        return tuple(sc.from_json(o, f"$[{k}]") for k, o in enumerate(obj))
    return sc.from_json(obj)


def _prefix(out, count: int, length: int) -> list:
    return [rd.output_value(out, n, length) for n in range(count)]


@main.command()
@common()
@click.option("--reduction", type=str, required=True, help="Reduction map name.")
def reduce(input_path, seed, horizon, tol, out, samples, fmt, reduction):
    """Apply a reduction map to x (and y) and check its closed form and verdicts."""
    ctx = _context("reduce", input_path, seed, horizon, tol, out, samples, fmt, reduction=reduction)
    red = parse(rd.get_reduction, reduction)
    obj = read_input(input_path, "reduce_input")
    count = obj.get("prefix", 16)
    x = parse(_source_element, obj["x"])
    fx = parse(red.apply, x)
    values = _prefix(fx, count, red.prefix_length)
    formula = [red.formula(x, n) for n in range(count)]
    ok = values == formula
    res = {"reduction": red.name, "family": red.family, "source": rl.relation_to_json(red.source),
           "target": rl.relation_to_json(red.target), "image_prefix": values, "formula_ok": ok}
    if "y" in obj:
        y = parse(_source_element, obj["y"])
        fy = parse(red.apply, y)
        vs = parse(rl.decide, red.source, x, y, horizon)
        vt = parse(rl.decide, red.target, fx, fy, horizon)
        preserved = vs.outcome == vt.outcome
        res.update(source_verdict=vs.to_json(), target_verdict=vt.to_json(), preserved=preserved)
        ok = ok and (preserved or not (vs.definite and vt.definite))
    rows = [[n, v, f] for n, (v, f) in enumerate(zip(values, formula))]
    emit(ctx, "reduce", Outcome(res, ok, (["n", "image", "formula"], rows)))


@main.command()
@common(default_samples=200)
@click.option("--reduction", type=str, default="all", show_default=True,
              help="Reduction map name or 'all'.")
def verify(input_path, seed, horizon, tol, out, samples, fmt, reduction):
    """Sample decidable pairs and check that a reduction preserves every verdict."""
    ctx = _context("verify", input_path, seed, horizon, tol, out, samples, fmt, reduction=reduction)
    names = rd.reduction_names() if reduction == "all" else [parse(rd.get_reduction, reduction).name]
    reports = [rd.verify_reduction(name, n=samples, seed=seed, horizon=horizon) for name in names]
    cols = ["reduction", "requested", "agree", "disagree", "undecidable", "formula_failures",
            "quantitative_failures", "ok"]
    rows = [[r.reduction, r.requested, r.agree, r.disagree, r.undecidable, r.formula_failures,
             r.quantitative_failures, r.ok] for r in reports]
    emit(ctx, "verify", Outcome([r.to_json() for r in reports], all(r.ok for r in reports), (cols, rows)))


# ---------------------------------------------------------------------------
# Banach numerics
# ---------------------------------------------------------------------------

@main.command()
@common(default_tol=1e-12)
@click.option("--p", "p", type=float, default=2.0, show_default=True, help="Type exponent.")
@click.option("--q", "q", type=float, default=1.0, show_default=True, help="Space l_q^n.")
@click.option("--n-min", type=click.IntRange(1), default=2, show_default=True)
@click.option("--n-max", type=click.IntRange(1), default=10, show_default=True)
@click.option("--family", type=click.Choice(["unit", "random"]), default="unit", show_default=True)
def typeconst(input_path, seed, horizon, tol, out, samples, fmt, p, q, n_min, n_max, family):
    """Type-p ratios of the unit basis (or random vectors) of l_q^n; exact unless --samples."""
    ctx = _context("typeconst", input_path, seed, horizon, tol, out, samples, fmt, p=p, q=q,
                   n_min=n_min, n_max=n_max, family=family)
    if n_max < n_min:
        raise InputError("--n-max must be at least --n-min")
    if samples == 0 and n_max > bn.MAX_EXACT_VECTORS:
        raise InputError(f"exact enumeration is limited to n <= {bn.MAX_EXACT_VECTORS}; pass --samples")
    reps = [parse(bn.type_report, p, q, n, family, samples, seed) for n in range(n_min, n_max + 1)]
    ok = all(r.consistent(tol) for r in reps)
    rows = [[r.n, r.value, r.lower, r.upper] for r in reps]
    ns = [r.n for r in reps]
    plot = {"x": ns, "series": {"exact" if samples == 0 else "sampled": [r.value for r in reps],
                                "lower bound": [r.lower for r in reps],
                                "upper bound": [r.upper for r in reps]},
            "xlabel": "dimension n", "ylabel": "type ratio",
            "title": f"type {p:g} ratios in l_{q:g}^n"}
    emit(ctx, "typeconst", Outcome([r.to_json() for r in reps], ok,
                                   (["n", "exact", "lower_bound", "upper_bound"], rows), plot))


@main.command()
@common(default_tol=0.05)
@click.option("--p", "p", type=float, default=1.0, show_default=True)
@click.option("--q", "q", type=float, default=2.0, show_default=True)
@click.option("--n-min", type=click.IntRange(1), default=2, show_default=True)
@click.option("--n-max", type=click.IntRange(1), default=6, show_default=True)
def bmdist(input_path, seed, horizon, tol, out, samples, fmt, p, q, n_min, n_max):
    """Numerical ||T|| ||T^-1|| of the identity between l_p^n and l_q^n against n^|1/p-1/q|."""
    ctx = _context("bmdist", input_path, seed, horizon, tol, out, samples, fmt, p=p, q=q,
                   n_min=n_min, n_max=n_max)
    if n_max < n_min:
        raise InputError("--n-max must be at least --n-min")
    ws = [parse(bn.bm_witness_check, p, q, n, tol, seed) for n in range(n_min, n_max + 1)]
    cols = ["n", "forward", "backward", "product", "expected", "rel_error", "passed"]
    rows = [[w.n, w.forward, w.backward, w.product, w.expected, w.rel_error, w.passed] for w in ws]
    plot = {"x": [w.n for w in ws], "series": {"||T|| ||T^-1||": [w.product for w in ws],
                                               "n^|1/p-1/q|": [w.expected for w in ws]},
            "xlabel": "dimension n", "ylabel": "distortion",
            "title": f"identity l_{p:g}^n -> l_{q:g}^n"}
    emit(ctx, "bmdist", Outcome([w.to_json() for w in ws], all(w.passed for w in ws), (cols, rows), plot))


@main.command("uh-criterion")
@common(default_horizon=64)
def uh_criterion(input_path, seed, horizon, tol, out, samples, fmt):
    """Decide whether sup_i n_i^|1/p_i - 1/q_i| is finite."""
    ctx = _context("uh-criterion", input_path, seed, horizon, tol, out, samples, fmt)
    obj = read_input(input_path, "uh_input")
    if "thm52" in obj:
        t = obj["thm52"]
        params = parse(bn.build_thm52, parse(sc.from_json, t["b"], "$.thm52.b"))
        a = bn.Thm52Space(params, parse(sc.from_json, t["x"], "$.thm52.x"))
        b = bn.Thm52Space(params, parse(sc.from_json, t["y"], "$.thm52.y"))
        res = parse(bn.uh_criterion, a, b, None, horizon)
        expo = lambda i: a.exponent(b, i)
    else:
        ip, iq, ln = (parse(sc.from_json, obj[k], f"$.{k}") for k in ("inv_p", "inv_q", "log2_n"))
        res = parse(bn.uh_criterion, ip, iq, ln, horizon)
        expo = lambda i: ln.value(i) * abs(ip.value(i) - iq.value(i))
    count = min(horizon, 16)
    rows = [[i, expo(i)] for i in range(count)]
    plot = {"x": list(range(count)), "series": {"log2 n_i^|1/p_i-1/q_i|": [float(v) for _, v in rows]},
            "xlabel": "index i", "ylabel": "log2 exponent", "title": f"criterion: {res.status}"}
    emit(ctx, "uh-criterion", Outcome(res.to_json(), True, (["i", "log2_exponent"], rows), plot))


@main.command("code-check")
@common(default_samples=500)
def code_check(input_path, seed, horizon, tol, out, samples, fmt):
    """Generate (or read) a norm code prefix and validate the four code conditions."""
    ctx = _context("code-check", input_path, seed, horizon, tol, out, samples, fmt)
    obj = read_input(input_path, "code_input")
    if "code" in obj:
        c = obj["code"]
        tuples = [tuple(parse(sc.to_number, a) for a in t) for t in c.get("tuples", [])]
        if tuples and len(tuples) != len(c["r"]):
            raise InputError("code.tuples and code.r differ in length")
        code = cd.CodePrefix(list(c["r"]), tuples)
    else:
        if samples < 1:
            raise InputError("--samples must be positive")
        norm = cd.lp_oracle(obj["p"]) if obj["norm"] == "lp" else cd.sum_oracle(obj["blocks"])
        code = parse(cd.generate_code, norm, samples)
    changed = None
    if "mutate" in obj:
        code, changed = parse(cd.mutate_code, code, obj["mutate"])
    bad = cd.validate_code(code, tol)
    res = {"entries": len(code), "violations": [v.to_json() for v in bad[:50]],
           "violation_count": len(bad), "tags": sorted({v.tag for v in bad}), "mutated_index": changed}
    rows = [[n, " ".join(str(a) for a in t), float(r)] for n, (t, r) in enumerate(zip(code.tuples, code.r))]
    emit(ctx, "code-check", Outcome(res, not bad, (["index", "tuple", "r_n"], rows)))


# ---------------------------------------------------------------------------
# mazur-check
# ---------------------------------------------------------------------------

_EXPONENTS = (1.0, 1.5, 2.0, 2.5, 3.0)


def mazur_suite(samples: int, seed: int, tol: float, element: Optional[mz.TruncatedXAElement]) -> tuple:
    rng = np.random.default_rng(seed)
    iso = trip = 0.0
    for _ in range(samples):
        d = int(rng.integers(1, 65))
        v = rng.standard_normal(d)
        p, q = rng.choice(_EXPONENTS, 2)
        w = mz.mazur(p, q, v)
        iso = max(iso, abs(bn.lp_norm(w, q) - bn.lp_norm(v, p)))
        trip = max(trip, float(np.max(np.abs(mz.mazur(q, p, w) - v))))
    u, v, w = rng.standard_normal((3, 64))
    endpoints = {
        "V_0": all(mz.same(a, b) for a, b in zip(mz.path_V(0, (u, v, w)), (u, v, w))),
        "V_1/4": bool(np.array_equal(mz.block_A(0.25), np.kron(np.eye(2), mz.J2))),
        "V_1/2": all(mz.same(a, b) for a, b in zip(mz.path_V(0.5, (u, v, w)), (u, w, v))),
        "h_0": all(mz.same(a, b) for a, b in zip(mz.path_h(0, 2.5, (u, v, w)), (mz.interleave(u, v), w))),
        "h_1": all(mz.same(a, b) for a, b in zip(mz.path_h(1, 2.5, (u, v, w)), (v, mz.interleave(u, w)))),
    }
    taus = np.linspace(0, 0.5, 101)
    vnorm = max(mz.V_norm_sampled(t, 2.5, 64, 2, seed + k).sampled for k, t in enumerate(taus))
    lip = mz.h_lipschitz_estimate(2.5, max(samples, 10), seed)
    elements = [element] if element is not None else [mz.random_element(2, 6, 8, rng) for _ in range(10)]
    seam = 0.0
    for x in elements:
        for n in range(1, x.N - 1):
            seam = max(seam, mz.seam_discrepancy(x, n))
    eps = [2.0 ** -k for k in range(12, 0, -1)]
    curve = mz.modulus_estimate(lambda a: mz.mazur(1, 2, a), 1.0, eps, max(samples, 10), seed, 8, 1, 2)
    checks = {"isometry": iso < tol, "round_trip": trip < tol, "endpoints": all(endpoints.values()),
              "V_norm": vnorm <= 2 + 1e-6, "seam": seam < tol, "K_hat_finite": math.isfinite(lip.K)}
    res = {"isometry_error": iso, "round_trip_error": trip, "endpoints": endpoints,
           "V_norm_sampled_sup": vnorm, "K_hat": lip.K, "seam_discrepancy": seam,
           "omega": {"eps": curve.eps, "omega": curve.omega}, "checks": checks}
    return res, all(checks.values()), curve


@main.command("mazur-check")
@common(default_samples=1000)
def mazur_check(input_path, seed, horizon, tol, out, samples, fmt):
    """Mazur maps, the V/h operator paths, the g~ seams and an empirical modulus curve."""
    ctx = _context("mazur-check", input_path, seed, horizon, tol, out, samples, fmt)
    obj = read_input(input_path, "xa_element", required=False)
    element = None
    if obj is not None:
        element = parse(mz.TruncatedXAElement.from_json, obj)
        if element.N < 3:
            raise InputError("the element needs at least 3 x blocks per j to have a seam")
    res, ok, curve = mazur_suite(samples, seed, tol, element)
    plot = {"x": curve.eps, "series": {"omega(eps), mazur 1->2": curve.omega},
            "xlabel": "eps", "ylabel": "empirical modulus omega(eps)",
            "title": "modulus of continuity", "logx": True, "step": True}
    emit(ctx, "mazur-check", Outcome(res, ok, (["eps", "omega"], curve.rows()), plot))


if __name__ == "__main__":
    main()
