"""Command line: ``strhc synth | run | inspect | verify``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .geometry import volume
from .model import load_model

DEFAULT_SCENARIO = "scenario_four_attacks.yaml"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"ok": False, "error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(o):
    try:
        import numpy as np

        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
    except ImportError:  # pragma: no cover
        pass
    return str(o)


def _scenario(args):
    from .sim import load_scenario

    sc = load_scenario(args.scenario or DEFAULT_SCENARIO)
    if getattr(args, "model", None):
        sc = sc.with_overrides(model=load_model(args.model))
    if getattr(args, "seed", None) is not None:
        sc = sc.with_overrides(disturbance_seed=args.seed)
    return sc


def _family(sc, args):
    from .reach import ControllableFamily
    from .sim import load_or_synthesize

    cache = getattr(args, "cache", None)
    if cache and Path(cache).is_file():
        fam = ControllableFamily.load(cache)
        if fam.model_hash != sc.model.fingerprint():
            raise ValueError(f"cache {cache} was built for a different model")
        return fam
    return load_or_synthesize(sc.model, sc.synth, cache)


def cmd_synth(args) -> int:
    from .sim import SynthConfig

    sc = _scenario(args)
    cfg = sc.synth
    if args.N is not None:
        cfg = SynthConfig(**{**cfg.__dict__, "N": args.N})
    t0 = time.perf_counter()
    fam = cfg.run(sc.model)
    fam.key = cfg.key(sc.model)
    out = Path(args.cache or f"family-{fam.key}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    fam.save(out)
    _emit({
        "ok": True, "cache": str(out), "key": fam.key, "N": fam.N, "tau": fam.tau,
        "T_viol": fam.T_viol, "i_max": fam.i_max, "seconds": round(time.perf_counter() - t0, 2),
    })
    return 0


def cmd_inspect(args) -> int:
    sc = _scenario(args)
    fam = _family(sc, args)
    print("ring,facets,volume,input_facets")
    for i, P in enumerate(fam.T):
        ufac = fam.uset(i).n_constraints if i >= 1 else ""
        print(f"{i},{P.n_constraints},{volume(P):.6g},{ufac}")
    print(f"# N={fam.N} tau={fam.tau} T_viol={fam.T_viol} i_max={fam.i_max} key={fam.key}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    from .sim import attack_report, export_trace, run_scenario, theorem1_violations, uub_entry

    sc = _scenario(args)
    fam = _family(sc, args)
    out = Path(args.out)
    res = run_scenario(sc, fam)
    csv_path = export_trace(res.trace, out / "trace.csv")
    plots = []
    if not args.no_plots:
        from .sim.plots import emit_plots

        plots = [str(p) for p in emit_plots(res.trace, fam, out, fmt=args.format)]
    violations = theorem1_violations(res.trace, sc.model, fam)
    last = max(res.recoveries, default=0)
    summary = {
        "ok": not violations,
        "scenario": sc.name,
        "steps": len(res.trace),
        "trace": str(csv_path),
        "plots": plots,
        "detections": res.detections,
        "recoveries": res.recoveries,
        "attacks": attack_report(res, sc),
        "theorem1_violations": [list(v) for v in violations],
        "enters_terminal_set_at": uub_entry(res.trace, fam, after=last),
        "aborted_at": res.trace.aborted_at,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_jsonable))
    _emit(summary)
    return 0 if not violations else 1


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    sc = _scenario(args)
    fam = _family(sc, args)
    names = SUITES if args.suite == "all" else (args.suite,)
    results = [run_suite(n, sc, fam, runs=args.runs, seed=args.seed or 0) for n in names]
    ok = all(r["passed"] for r in results)
    _emit({"ok": ok, "results": results})
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="strhc", description="Set-theoretic receding-horizon control under cyber attacks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, cache_help="family cache file or directory"):
        sp.add_argument("--scenario", help=f"scenario YAML (default: bundled {DEFAULT_SCENARIO})")
        sp.add_argument("--model", help="model YAML overriding the scenario's model")
        sp.add_argument("--cache", help=cache_help)
        sp.add_argument("--seed", type=int, help="disturbance seed override (run) or suite seed (verify)")

    s = sub.add_parser("synth", help="compute the terminal set, rings and safe index")
    common(s, "output cache file (default: family-<key>.json)")
    s.add_argument("--N", type=int, help="override the number of rings")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="simulate a scenario, write trace.csv, plots and summary.json")
    common(s)
    s.add_argument("--out", default="out", help="output directory")
    s.add_argument("--no-plots", action="store_true")
    s.add_argument("--format", default="svg", choices=("svg", "pdf"))
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("inspect", help="print ring facet counts and volumes as CSV")
    common(s)
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("verify", help="run randomized property suites")
    common(s)
    s.add_argument("--suite", default="all",
                   choices=("all", "prop3", "prop4", "soundness", "watermark", "fuzz", "determinism"))
    s.add_argument("--runs", type=int, help="override the suite's sample count")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:  # surfaced as a machine-readable diagnostic
        print(json.dumps({"ok": False, "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
