"""Command-line entry point: ``banzkp run|attack|cost|selftest``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import adversary, costmodel
from .crypto import MIN_MODULUS_BITS, ParameterError, ProtocolParams
from .netsim import ConfigError, RouteError, run
from .scenario import ScenarioError, load_scenario

OUTPUT_DIR_ENV = "BANZKP_OUTPUT_DIR"
COST_HEADER = ("metric", "banzkp", "tinyzkp", "saving_pct")


def _modulus_bits(text: str) -> int:
    try:
        bits = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if bits < MIN_MODULUS_BITS or bits % 8:
        raise argparse.ArgumentTypeError(f"must be a multiple of 8 and at least {MIN_MODULUS_BITS}")
    return bits


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="banzkp", description="WBAN authentication protocol simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and print its trace summary and ledger")
    r.add_argument("--scenario", default="honest7", help="preset name or scenario file (default honest7)")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--modulus-bits", type=_modulus_bits, default=None)
    r.add_argument("--mode", choices=("paper", "wire"), default="wire")
    r.add_argument("--format", choices=("table", "csv", "lines"), default="table")
    r.add_argument("--output", help="write here instead of stdout")

    a = sub.add_parser("attack", help="run seeded attack batches, one PASS/FAIL line per kind")
    a.add_argument("--kind", choices=adversary.KINDS + ("all",), default="all")
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--trials", type=_positive, default=1000,
                   help="scenarios per kind; guess runs trials/100 batches of 100 sessions")
    a.add_argument("--modulus-bits", type=_modulus_bits, default=2048)
    a.add_argument("--victim", type=int, default=adversary.DEFAULT_VICTIM)
    a.add_argument("--jobs", type=_positive, default=1)
    a.add_argument("--output")

    c = sub.add_parser("cost", help="BANZKP vs TinyZKP cost comparison")
    c.add_argument("--mode", choices=("paper", "wire"), default="paper")
    c.add_argument("--modulus-bits", type=_modulus_bits, default=2048)
    c.add_argument("--nodes", type=_positive, default=6)
    c.add_argument("--format", choices=("table", "csv"), default="table")
    c.add_argument("--output")

    sub.add_parser("selftest", help="fast invariant checks")
    return p


def _rows_text(header: Sequence[str], rows: list, fmt: str) -> str:
    rows = [[_cell(v) for v in row] for row in rows]
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [list(header)] + rows) + "\n"
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    out += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}" if abs(v) < 1e-3 and v else f"{v:.4f}".rstrip("0").rstrip(".")
    return "" if v is None else str(v)


def _emit(text: str, output: Optional[str], default_name: str) -> None:
    target = output
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / default_name)
    if target is None:
        sys.stdout.write(text)
        return
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    Path(target).write_text(text)
    print(f"wrote {target}")


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario, args.seed, args.modulus_bits)
    trace = run(sc)
    mode = costmodel.PAPER if args.mode == "paper" else costmodel.WIRE
    ext = {"lines": "jsonl", "csv": "csv", "table": "txt"}[args.format]
    name = f"{sc.name}-{sc.seed}.{ext}"
    if args.format == "lines":
        _emit("\n".join(trace.lines()) + "\n", args.output, name)
        return 0
    summary = trace.summary()
    comm = costmodel.comm_cost(trace if mode is costmodel.WIRE else "banzkp", mode)
    head = [
        ("scenario", sc.name), ("seed", sc.seed), ("modulus_bits", sc.params.width),
        ("accounting_mode", mode.mode.value), ("comm_bits", comm),
        ("deliveries", summary["deliveries"]),
        ("authenticated", sum(v == "Authenticated" for v in trace.node_states.values())),
        ("nodes", len(trace.node_states)),
        ("digest", trace.digest()),
    ]
    head += [(f"node{k}", v) for k, v in sorted(trace.node_states.items())]
    head += [(f"conservation_{k}", v) for k, v in summary["conservation"].items()]
    if args.format == "csv":
        # ledger rows are measured from the trace, so they are always wire bits
        text = "".join(f"# {k}={v}\n" for k, v in head) + costmodel.ledger_csv(trace.ledger, costmodel.WIRE)
    else:
        rows = [[("sink" if role == 0 else f"node{role}"), c.bits_tx, c.bits_rx, c.modmuls,
                 c.mem_bytes, c.energy_mJ] for role in trace.ledger.roles()
                for c in [trace.ledger[role]]]
        text = "".join(f"{k}: {v}\n" for k, v in head) + "\n" + _rows_text(
            costmodel.LEDGER_COLUMNS[:-1], rows, "table")
    _emit(text, args.output, name)
    return 0


def _attack_one(job) -> adversary.Verdict:
    kind, trials, seed, bits, victim = job
    return adversary.run_attack(kind, trials, seed, ProtocolParams.generate(bits), victim)


def cmd_attack(args) -> int:
    kinds = adversary.KINDS if args.kind == "all" else (args.kind,)
    jobs = [(k, max(1, args.trials // 100) if k == "guess" else args.trials, args.seed,
             args.modulus_bits, args.victim) for k in kinds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            verdicts = list(pool.map(_attack_one, jobs))
    else:
        verdicts = [_attack_one(j) for j in jobs]
    lines = [v.line() for v in verdicts]
    for v in verdicts:
        lines += [f"  {v.kind} seed={s} variant={var}: {why}" for s, var, why in v.failed[:5]]
    _emit("\n".join(lines) + "\n", args.output, f"attack-{args.kind}-{args.seed}.txt")
    return 0 if all(v.passed for v in verdicts) else 1


def cmd_cost(args) -> int:
    params = ProtocolParams.generate(args.modulus_bits)
    rows = [list(r) for r in costmodel.comparison_table(params, args.nodes)]
    if args.mode == "wire":
        fs = costmodel.frame_sizes(params, costmodel.TrafficProfile().data_payload_bits // 8)
        # TinyZKP frames are not modeled, so the wire row has no baseline.
        rows.insert(1, ["comm_bits_wire", 8 * sum(fs.values()), None, None])
    rows.append(["tinyzkp_keys_per_node", None, costmodel.TINYZKP.keys_per_node, None])
    rows.append(["tinyzkp_sink_public_keys", None, costmodel.TINYZKP.sink_public_keys(args.nodes), None])
    text = _rows_text(COST_HEADER, rows, args.format)
    text += "".join(f"# {k}={v:g}\n" if isinstance(v, float) else f"# {k}={v}\n" for k, v in
                    [("accounting_mode", args.mode), ("nodes", args.nodes)]
                    + costmodel.calibration(params))
    _emit(text, args.output, f"cost-{args.mode}.{'csv' if args.format == 'csv' else 'txt'}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return 0 if run_selftest() else 1


COMMANDS = {"run": cmd_run, "attack": cmd_attack, "cost": cmd_cost, "selftest": cmd_selftest}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors (2) and --help (0)
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"banzkp: error: {exc}", file=sys.stderr)
        return 1
    except (ParameterError, ConfigError, RouteError, OSError) as exc:
        print(f"banzkp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
