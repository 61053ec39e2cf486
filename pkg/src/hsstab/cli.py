"""Command-line entry point ``hsstab``.

Exit codes: 0 success, 2 invariant failure, 3 I/O or configuration error.
``HSSTAB_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from hsstab import characters, harness, stabilizers
from hsstab.errors import HSStabError
from hsstab.io import read_json, tuple_from_json, tuple_to_json, write_json, write_jsonl
from hsstab.presentations import UnitaryTuple, parse_preset, preset_heisenberg, relation_defect

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3


class ConfigError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("HSSTAB_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"HSSTAB_SEED must be an integer, got {raw!r}") from exc


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _complexes(text: str) -> list[complex]:
    return [complex(x.replace(" ", "")) for x in text.split(",") if x.strip()]


def _emit(obj, out: str | None) -> None:
    if out:
        write_json(out, obj)
    else:
        json.dump(obj, sys.stdout)
        sys.stdout.write("\n")


def _load_tuple(path: str, preset: str | None):
    t, pres = tuple_from_json(read_json(path))
    if preset:
        pres = parse_preset(preset)
    if pres is None:
        raise ConfigError("no presentation: pass --preset or store one in the tuple file")
    return t, pres


# --------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> int:
    p = parse_preset(args.preset)
    t = stabilizers.sample_exact_rep(p, args.dim, args.seed)
    _emit(tuple_to_json(t, p), args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    t, p = tuple_from_json(read_json(args.input))
    out = stabilizers.perturb(t, args.eps, args.seed)
    _emit(tuple_to_json(out, p), args.out)
    return EXIT_OK


def cmd_stabilize(args) -> int:
    t, p = _load_tuple(args.input, args.preset)
    opts = stabilizers.StabilizeOptions(seed=args.seed)
    out, rec = harness.record_for(p, t, opts)
    if out is not None and args.out:
        write_json(args.out, tuple_to_json(out, p))
    write_jsonl(sys.stdout, [rec])
    if not rec.ok:
        print(f"stabilize failed at stage {rec.stage}: {rec.error}", file=sys.stderr)
        return EXIT_INVARIANT if args.strict else EXIT_OK
    return EXIT_OK


def _sweep_config(args) -> harness.ExperimentConfig:
    obj = read_json(args.config) if args.config else {}
    if args.preset:
        obj["preset"] = args.preset
    if args.dim:
        obj["dims"] = _ints(args.dim)
    if args.eps:
        obj["eps"] = _floats(args.eps)
    if args.trials is not None:
        obj["trials"] = args.trials
    if args.seed_given or "seed" not in obj:
        obj["seed"] = args.seed
    if args.out:
        obj["out"] = args.out
    obj.setdefault("preset", "chain:2,5:3,7")
    obj.setdefault("dims", [8])
    obj.setdefault("eps", [1e-2, 1e-3])
    return harness.ExperimentConfig.from_json(obj)


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    result = harness.sweep(cfg, workers=args.workers)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            write_jsonl(fh, result.records)
    else:
        write_jsonl(sys.stdout, result.records)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(harness.summary_csv(result.summary))
    for c in result.summary["curve"]:
        print(
            f"eps={c['eps']:.1e} trials={c['trials']} failures={c['failures']} "
            f"median_distance={c['median_distance']:.3e} max_defect_after={c['max_defect_after']:.3e}",
            file=sys.stderr,
        )
    if result.failures:
        print(f"{result.failures} of {len(result.records)} trials failed", file=sys.stderr)
        return EXIT_INVARIANT if args.strict else EXIT_OK
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = harness.verify_checks()
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_clock_shift(args) -> int:
    u, v = characters.clock_shift_rep(args.p, args.q, complex(args.alpha), complex(args.beta))
    t = UnitaryTuple((u, v))
    defect = relation_defect(preset_heisenberg(), t)
    print(f"heisenberg relation defect {defect:.3e}", file=sys.stderr)
    _emit(tuple_to_json(t, preset_heisenberg()), args.out)
    return EXIT_OK


def cmd_delta_e(args) -> int:
    values = _complexes(args.values)
    if args.dim is not None:
        values = [characters.augmented_trace(args.dim, v) for v in values]
    res = characters.tensor_power_delta(values, args.eps)
    _emit({"power": res.power, "traces": [[v.real, v.imag] for v in res.traces]}, args.out)
    return EXIT_OK


BUILTIN_GROUPS = {
    "cyclic": characters.cyclic_group,
    "dihedral": characters.dihedral_group,
    "symmetric": characters.symmetric_group,
    "heisenberg": characters.heisenberg_mod,
}


def _load_group(spec: str) -> characters.FiniteGroup:
    if spec == "q8":
        return characters.quaternion_group()
    kind, _, arg = spec.partition(":")
    if kind in BUILTIN_GROUPS and arg:
        return BUILTIN_GROUPS[kind](int(arg))
    return characters.FiniteGroup.from_json(read_json(spec))


def cmd_induce(args) -> int:
    g = _load_group(args.group)
    if args.subgroup:
        sub = tuple(_ints(args.subgroup))
        vals = tuple(_complexes(args.chi)) if args.chi else tuple(1 + 0j for _ in sub)
        spec = characters.CentralCharacterSpec(sub, vals)
    else:
        spec = characters.random_central_character(g, np.random.default_rng(args.seed))
    values = {x: characters.induced_central_trace(g, spec, x, verify=args.verify) for x in range(g.order)}
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            characters.write_character_csv(fh, values)
    else:
        characters.write_character_csv(sys.stdout, values)
    return EXIT_OK


def cmd_mix(args) -> int:
    dims = _ints(args.dims)
    weights = [Fraction(w) for w in args.weights.split(",")]
    traces = [[Fraction(x) for x in row.split(",")] for row in args.traces.split(";")]
    res = characters.mix_traces(dims, weights, traces)
    _emit(
        {
            "traces": [str(x) for x in res.traces],
            "multiplicities": list(res.multiplicities),
            "lcm": res.lcm,
            "dimension": res.dimension,
        },
        args.out,
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsstab", description="Correct almost-representations of chain groups.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset=True):
        if preset:
            p.add_argument("--preset", help="chain:2,5:3,7, hnn:2,3:3,2 or heisenberg")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--strict", action="store_true", help="exit 2 when an invariant fails")

    p = sub.add_parser("sample", help="random exact representation")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.set_defaults(func=cmd_sample, needs_preset=True)

    p = sub.add_parser("perturb", help="multiply each generator by exp(i eps H)")
    common(p, preset=False)
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("stabilize", help="correct a tuple read from a file")
    common(p)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("sweep", help="grid of sample, perturb, correct trials")
    common(p)
    p.add_argument("--dim", help="comma-separated dims")
    p.add_argument("--eps", help="comma-separated noise levels")
    p.add_argument("--trials", type=int)
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--csv", help="write the per-eps summary here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_verify)

    char = sub.add_parser("char", help="character constructions")
    csub = char.add_subparsers(dest="char_command", required=True)

    p = csub.add_parser("clock-shift")
    common(p, preset=False)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--alpha", default="1")
    p.add_argument("--beta", default="1")
    p.set_defaults(func=cmd_clock_shift)

    p = csub.add_parser("delta-e")
    common(p, preset=False)
    p.add_argument("--values", required=True, help="comma-separated complex traces, e.g. 0.5,-0.5+0.1j")
    p.add_argument("--dim", type=int, help="treat values as traces of a rep of this size and add a trivial summand")
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_delta_e)

    p = csub.add_parser("induce")
    common(p, preset=False)
    p.add_argument("--group", required=True, help="cyclic:n, dihedral:n, symmetric:n, heisenberg:p, q8 or a JSON file")
    p.add_argument("--subgroup", help="comma-separated central element indices")
    p.add_argument("--chi", help="comma-separated character values on --subgroup")
    p.add_argument("--verify", action="store_true", help="check against explicit induced matrices")
    p.add_argument("--csv", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_induce)

    p = csub.add_parser("mix")
    common(p, preset=False)
    p.add_argument("--dims", required=True)
    p.add_argument("--weights", required=True, help="comma-separated fractions, e.g. 1/3,2/3")
    p.add_argument("--traces", required=True, help="rows separated by ';', e.g. '1,1;1,-1'")
    p.set_defaults(func=cmd_mix)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None:
            args.seed_given = False
            if hasattr(args, "seed"):
                args.seed = _default_seed()
        else:
            args.seed_given = True
        if getattr(args, "needs_preset", False) and not args.preset:
            raise ConfigError("--preset is required")
        return args.func(args)
    except (ConfigError, OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        print(f"hsstab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HSStabError as exc:
        print(f"hsstab: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
