"""Batch scenario runner.

    coarsegeo run scenario.json [--output-dir DIR] [--budget N] [--seed S]
    coarsegeo list-families

A scenario is a JSON object with ``version`` 1, a ``group``, an optional
``pattern``, increasing ``radii``, a list of ``analyses`` and ``params``.
Params may be flat or nested under an analysis name; nested values win.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .cayley import DEFAULT_BUDGET, BudgetExceeded, projected_count
from .groups import GroupError, GroupSpec, list_families, make_group
from .invariants import (almost_invariant_set, coend_lower_bound, commensurizer_probe,
                         distortion_profile, growth_series, interlaced_probe, pattern_growth,
                         polynomial_growth_verdict, weakly_dominates, write_coends_csv, write_growth_csv)
from .patterns import IncompatiblePattern, pattern_from_dict, pattern_to_dict, realize
from .separation import (ComplementEmpty, ball_for, complement_components, default_theta, estimate_moduli,
                         n_separating_profile, noncrossing_check, region_label, shared_balls, COMPONENT_COLUMNS)
from .detection import PRECONDITION_FAILURES, detect_subgroup

ANALYSES = ("components", "separating", "moduli", "noncrossing", "coends", "growth", "domination",
            "distortion", "commensurizer", "interlaced", "almost_invariant", "detect")
NEEDS_PATTERN = {"components", "separating", "moduli", "noncrossing", "detect"}
NEEDS_SUBGROUP = {"distortion", "commensurizer", "interlaced", "almost_invariant"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ScenarioConfig:
    group: GroupSpec
    pattern: object
    radii: list
    analyses: list[str]
    params: dict = field(default_factory=dict)
    output_dir: str | None = None

    def knobs(self, analysis: str) -> dict:
        flat = {k: v for k, v in self.params.items() if k not in ANALYSES}
        nested = self.params.get(analysis, {})
        if not isinstance(nested, dict):
            raise ConfigError(f"params.{analysis}", "must be an object")
        return {**flat, **nested}


def _radius(value, where: str):
    if isinstance(value, bool):
        raise ConfigError(where, "radius must be an integer or a list of integers")
    if isinstance(value, int):
        if value < 0:
            raise ConfigError(where, "radius must be >= 0")
        return value
    if isinstance(value, list) and value and all(isinstance(x, int) and not isinstance(x, bool) and x >= 0
                                                 for x in value):
        return tuple(value)
    raise ConfigError(where, "radius must be an integer or a list of integers")


def _less(a, b) -> bool:
    if isinstance(a, tuple) != isinstance(b, tuple):
        raise ConfigError("radii", "mixes plain radii and per-factor radii")
    if isinstance(a, tuple):
        return len(a) == len(b) and all(x <= y for x, y in zip(a, b)) and a != b
    return a < b


def parse_config(data) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config", "must be a JSON object")
    if data.get("version") != 1:
        raise ConfigError("version", "must be 1")
    if "group" not in data:
        raise ConfigError("group", "missing")
    try:
        spec = GroupSpec.from_dict(data["group"])
        make_group(spec)
    except (GroupError, TypeError, ValueError) as exc:
        raise ConfigError("group", str(exc)) from None

    radii_raw = data.get("radii")
    if not isinstance(radii_raw, list) or not radii_raw:
        raise ConfigError("radii", "must be a non-empty list")
    radii = [_radius(v, f"radii[{i}]") for i, v in enumerate(radii_raw)]
    for a, b in zip(radii, radii[1:]):
        if not _less(a, b):
            raise ConfigError("radii", "must be increasing")
    if isinstance(radii[0], tuple) and spec.family != "DirectProduct":
        raise ConfigError("radii", "per-factor radii need a DirectProduct group")

    analyses = data.get("analyses")
    if not isinstance(analyses, list) or not analyses:
        raise ConfigError("analyses", "must be a non-empty list")
    for a in analyses:
        if a not in ANALYSES:
            raise ConfigError("analyses", f"unknown analysis {a!r}; known: {', '.join(ANALYSES)}")

    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "must be an object")

    pattern = None
    if data.get("pattern") is not None:
        try:
            pattern = pattern_from_dict(data["pattern"])
        except IncompatiblePattern as exc:
            raise ConfigError("pattern", str(exc)) from None
    cfg = ScenarioConfig(spec, pattern, radii, list(analyses), params, data.get("output_dir"))
    for a in analyses:
        kn = cfg.knobs(a)
        if a in NEEDS_PATTERN and pattern is None and not (a == "noncrossing" and "family" in kn):
            raise ConfigError("pattern", f"required by analysis {a!r}")
        if a in NEEDS_SUBGROUP and "subgroup" not in kn:
            raise ConfigError(f"params.{a}.subgroup", "required")
        if a == "commensurizer" and "g" not in kn:
            raise ConfigError("params.commensurizer.g", "required")
        if a == "almost_invariant" and "component" not in kn:
            raise ConfigError("params.almost_invariant.component", "required")
        if a == "domination" and "compare_group" not in kn:
            raise ConfigError("params.domination.compare_group", "required")
        if a == "coends" and pattern is None and "subgroup" not in kn:
            raise ConfigError("params.coends.subgroup", "required when no pattern is given")
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# analyses


def _provenance(R, guard, theta) -> dict:
    return {"R": region_label(R), "guard": guard, "theta": theta}


def _growth_fn(spec: GroupSpec, n_max: int, budget: int):
    """Exact growth values from closed forms when available, else BFS."""
    from .cayley import _sphere_sizes
    sizes = _sphere_sizes(spec, n_max)
    if sizes is not None:
        out, acc = [], 0
        for s in sizes:
            acc += s
            out.append(acc)
        return out
    return list(growth_series(spec, n_max, budget).values)


def _run_one(name: str, cfg: ScenarioConfig, kn: dict, budget: int, seed: int, files: dict) -> dict:
    spec, pattern, radii = cfg.group, cfg.pattern, cfg.radii
    theta = kn.get("theta")
    top = radii[-1]

    if name == "components":
        r = int(kn.get("r", 0))
        runs, rows = [], []
        for R in radii:
            ball = ball_for(spec, R, budget)
            Y = realize(pattern, ball)
            try:
                a = complement_components(ball, Y, r, theta)
            except ComplementEmpty:
                runs.append({"provenance": _provenance(R, Y.guard + r, theta), "complement_empty": True})
                continue
            s = a.summary()
            s["provenance"] = _provenance(R, a.N.guard, a.theta)
            runs.append(s)
            rows.extend(a.rows())
        files["components.csv"] = _csv(COMPONENT_COLUMNS, rows)
        return {"r": r, "runs": runs, "provenance": [run["provenance"] for run in runs]}

    if name == "separating":
        r = int(kn.get("r", 0))
        prof = n_separating_profile(spec, pattern, r, radii, theta, budget)
        d = prof.to_dict()
        d["provenance"] = [_provenance(R, r, theta if theta is not None else default_theta(_inradius(R), r))
                           for R in radii]
        return d

    if name == "moduli":
        r_list = [int(x) for x in kn.get("r_list", [kn.get("r", 0)])]
        est = estimate_moduli(spec, pattern, radii, r_list, theta, budget)
        d = est.to_dict()
        for s in d["samples"]:
            s["provenance"] = {"R": s["R"], "guard": s["guard"],
                               "theta": theta if theta is not None else default_theta(_inradius(s["R"]), s["r"])}
        d["provenance"] = [s["provenance"] for s in d["samples"]]
        return d

    if name == "noncrossing":
        family = kn.get("family")
        fam = [pattern_from_dict(p) for p in family] if family is not None else None
        T = int(kn.get("T", 0 if fam else max(1, _inradius(top) // 4)))
        k_max = int(kn.get("k_max", kn.get("k", 0)))
        rep = noncrossing_check(spec, pattern, T, k_max, top, family=fam, theta=theta, budget=budget)
        d = rep.to_dict()
        d["T"] = T
        d["provenance"] = _provenance(top, T, theta if theta is not None else default_theta(_inradius(top), 0))
        return d

    if name == "coends":
        r_max = int(kn.get("r_max", 4))
        sub = kn.get("subgroup")
        est = coend_lower_bound(spec, sub, r_max, top, theta, budget, pattern=None if sub else pattern)
        _write_tmp_csv(files, "coends.csv", write_coends_csv, est)
        d = est.to_dict()
        d["provenance"] = [_provenance(top, r, th) for r, th in zip(range(r_max + 1), est.theta)]
        return d

    if name == "growth":
        n_max = int(kn.get("n_max", _inradius(top)))
        ser = growth_series(spec, n_max, budget)
        _write_tmp_csv(files, "growth.csv", write_growth_csv, ser)
        d = ser.to_dict()
        if pattern is not None:
            ball = ball_for(spec, top, budget)
            pg = pattern_growth(ball, realize(pattern, ball), None, min(n_max, _inradius(top)))
            d["pattern_beta"] = pg.to_dict()["beta"]
        d["polynomial"] = polynomial_growth_verdict(ser) if n_max >= 4 else None
        d["provenance"] = _provenance(n_max, 0, None)
        return d

    if name == "domination":
        n_range = int(kn.get("n_range", 15))
        caps = kn.get("caps", [8, 8])
        other = GroupSpec.from_dict(kn["compare_group"])
        need = int(caps[0]) * n_range + int(caps[1])
        b1 = _growth_fn(spec, n_range, budget)
        b2 = _growth_fn(other, need, budget)
        fwd = weakly_dominates(b1, b2, int(caps[0]), int(caps[1]), n_range)
        back = weakly_dominates(_growth_fn(other, n_range, budget), _growth_fn(spec, need, budget),
                                int(caps[0]), int(caps[1]), n_range)
        return {"compare_group": other.to_dict(), "n_range": n_range, "caps": list(caps),
                "dominated_by_compare": fwd.to_dict(), "dominates_compare": back.to_dict(),
                "equivalent": fwd.holds and back.holds,
                "provenance": _provenance(need, 0, None)}

    if name == "distortion":
        count = int(kn.get("sample_count", 1000))
        R = _inradius(top)
        prof = distortion_profile(spec, kn["subgroup"], R, count, seed, budget)
        d = prof.to_dict()
        d["seed"] = seed
        d["provenance"] = _provenance(R, 0, None)
        return d

    if name == "commensurizer":
        probe = commensurizer_probe(spec, kn["subgroup"], kn["g"], radii, kn.get("guard"), budget)
        d = probe.to_dict()
        d["provenance"] = [_provenance(R, g, None) for R, g in zip(radii, probe.guards)]
        return d

    if name == "interlaced":
        r = int(kn.get("r", 1))
        T = int(kn.get("T", 4))
        probe = interlaced_probe(spec, kn["subgroup"], r, top, T, theta, budget)
        d = probe.to_dict()
        d.update({"r": r, "T": T})
        d["provenance"] = _provenance(top, T, theta if theta is not None else default_theta(_inradius(top), r))
        return d

    if name == "almost_invariant":
        r = int(kn.get("r", 1))
        k = int(kn.get("k", 0))
        ais = almost_invariant_set(spec, kn["subgroup"], r, kn["component"], k, top,
                                   kn.get("member_test", "orbit"), theta, budget)
        d = ais.to_dict()
        d["provenance"] = _provenance(top, ais.guard, theta if theta is not None else default_theta(_inradius(top), r))
        return d

    if name == "detect":
        k = int(kn.get("k", 1))
        R = radii[0]
        cert = detect_subgroup(spec, pattern, k, R, theta=theta, r_max=int(kn.get("r_max", 0)),
                               T=kn.get("T"), threshold=kn.get("threshold"), budget=budget)
        d = cert.to_dict()
        d["provenance"] = _provenance(R, cert.guards.get("hausdorff"), cert.guards.get("theta"))
        files["detection.json"] = _json_bytes(d)
        return d

    raise ConfigError("analyses", f"unknown analysis {name!r}")


def _inradius(R) -> int:
    if isinstance(R, (tuple, list)):
        return int(min(R))
    return int(R)


def _csv(columns, rows) -> bytes:
    import csv
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _write_tmp_csv(files: dict, name: str, writer, obj) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / name
        writer(p, obj)
        files[name] = p.read_bytes()


def _json_default(o):
    import numpy as np
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=False) + "\n").encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ScenarioResult:
    report: dict
    files: dict
    exit_code: int


def run_scenario(cfg: ScenarioConfig, output_dir=None, budget: int = DEFAULT_BUDGET, seed: int = 0) -> ScenarioResult:
    """Run every analysis, write the report files, and return the exit code."""
    top = cfg.radii[-1]
    proj = projected_count(cfg.group, 0, top) if isinstance(top, tuple) else projected_count(cfg.group, top)
    if proj is not None and proj > budget:
        raise BudgetExceeded(proj, budget)
    files: dict[str, bytes] = {}
    results = {}
    exit_code = 0
    with shared_balls():
        for name in cfg.analyses:
            kn = cfg.knobs(name)
            res = _run_one(name, cfg, kn, budget, int(kn.get("seed", seed)), files)
            results[name] = res
            if name == "detect" and res["status"] in PRECONDITION_FAILURES:
                exit_code = 2
    report = {
        "version": 1,
        "group": cfg.group.to_dict(),
        "group_info": make_group(cfg.group).info(),
        "pattern": pattern_to_dict(cfg.pattern) if cfg.pattern is not None else None,
        "radii": [region_label(R) for R in cfg.radii],
        "analyses": cfg.analyses,
        "params": cfg.params,
        "budget": budget,
        "seed": seed,
        "results": results,
        "exit_code": exit_code,
    }
    files["report.json"] = _json_bytes(report)
    out = Path(output_dir or cfg.output_dir or "coarsegeo-out")
    for name in sorted(files):
        _atomic_write(out / name, files[name])
    return ScenarioResult(report, files, exit_code)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coarsegeo", description="Coarse geometry of subsets of Cayley graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum ball vertex count")
    run.add_argument("--seed", type=int, default=0, help="seed for sampling analyses")
    sub.add_parser("list-families", help="print the supported group families")
    args = parser.parse_args(argv)

    if args.command == "list-families":
        sys.stdout.write(json.dumps(list_families(), indent=2) + "\n")
        return 0
    try:
        cfg = load_config(args.config)
        res = run_scenario(cfg, args.output_dir, args.budget, args.seed)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 1
    except BudgetExceeded as exc:
        print(f"BudgetExceeded: {exc}", file=sys.stderr)
        return 1
    except (GroupError, IncompatiblePattern, ValueError, RuntimeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    det = res.report["results"].get("detect")
    summary = {name: _headline(name, r) for name, r in res.report["results"].items()}
    sys.stdout.write(json.dumps({"exit_code": res.exit_code, "summary": summary}, sort_keys=True) + "\n")
    if det is not None and res.exit_code == 2:
        print(f"detect: {det['status']}", file=sys.stderr)
    return res.exit_code


def _headline(name: str, r: dict):
    if name == "detect":
        return r["status"]
    for key in ("verdict", "failed", "lower_bound", "holds"):
        if key in r:
            return r[key]
    return "ok"


if __name__ == "__main__":
    sys.exit(main())
