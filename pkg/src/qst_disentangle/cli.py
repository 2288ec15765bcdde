"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 run failure (unconverged
optimization or failed circuit synthesis). Failures also print a JSON object
to stderr. Data goes to files or stdout, logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bench
from .quantum import StateVector, fidelity, random_state
from .rl import RlConfig, RlRecord, reconstruct_actions, rl_disentangle
from .vqc import DisentangleRecord, OptimizerConfig, disentangle, reconstruct

log = logging.getLogger("qst_disentangle")

OUTPUT_DIR_ENV = "QST_OUTPUT_DIR"


class UsageError(Exception):
    pass


class RunFailure(Exception):
    def __init__(self, kind: str, detail: str, **extra):
        super().__init__(detail)
        self.payload = {"error": kind, "detail": detail, **extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def int_range(text: str) -> list[int]:
    """``"2..6"`` -> [2, 3, 4, 5, 6]; ``"1,3,5"`` -> [1, 3, 5]; ``"4"`` -> [4]."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            vals = list(range(int(lo), int(hi) + 1))
        else:
            vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list or range: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return vals


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a float list: {text!r}") from None


def _add_state_source(p):
    p.add_argument("--state", type=Path, help="input state JSON")
    p.add_argument("--qubits", type=int, help="generate a random state with this many qubits")
    p.add_argument("--haar", action="store_true", help="Haar-random instead of first-quadrant sampling")


def _add_optimizer(p):
    p.add_argument("--r", type=int, default=1, help="repetition factor (blocks = N_s * r)")
    p.add_argument("--tol", type=float, default=1e-4, help="per-sequence loss tolerance")
    p.add_argument("--precision", type=float, default=None,
                   help="stop each sequence once P(0) reaches this value instead of --tol")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--max-epochs", type=int, default=5000)


def _add_common(p):
    p.add_argument("--config", type=Path, help="flat JSON file of flag defaults")
    p.add_argument("--output-dir", type=Path,
                   help=f"where output files go (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--log-every", type=int, help="log training progress every k epochs")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = _Parser(prog="qst-disentangle", description=__doc__.splitlines()[0])
    _add_common(parser)
    parser.set_defaults(config=None, output_dir=None, log_every=0, verbose=False)
    # shared flags are accepted after the subcommand too; SUPPRESS keeps them
    # from clobbering values given before it
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    _add_common(common)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = sub.add_parser("gen-state", parents=[common], help="sample a random pure state")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--haar", action="store_true")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    subs["gen-state"] = p

    p = sub.add_parser("vqc", parents=[common], help="variational sequential disentanglement + reconstruction")
    _add_state_source(p)
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer(p)
    subs["vqc"] = p

    p = sub.add_parser("rl", parents=[common], help="discrete-gate disentanglement with REINFORCE")
    _add_state_source(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episode-len", type=int, default=10)
    p.add_argument("--dataset", type=int, default=50)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--policy-lr", type=float, default=0.003)
    subs["rl"] = p

    p = sub.add_parser("reconstruct", parents=[common], help="rebuild a state from a run record")
    p.add_argument("--record", type=Path, required=True)
    p.add_argument("--target", type=Path, help="state JSON to report fidelity against")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    subs["reconstruct"] = p

    p = sub.add_parser("bench", help="benchmark tables and sweeps")
    bsub = p.add_subparsers(dest="bench_command", parser_class=_Parser)
    subs["bench"] = p

    b = bsub.add_parser("table1", parents=[common], help="per-sequence gate/parameter/epoch accounting")
    b.add_argument("--qubits", type=int, default=8)
    b.add_argument("--r", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--train", action="store_true", help="also train and fill epochs and S_GD")
    b.add_argument("--tol", type=float, default=1e-4)
    b.add_argument("--lr", type=float, default=0.01)
    b.add_argument("--max-epochs", type=int, default=5000)
    subs["table1"] = b

    b = bsub.add_parser("sweep", parents=[common], help="reconstruction fidelity vs N and precision")
    b.add_argument("--qubits", type=int_range, default=[2, 3, 4, 5, 6])
    b.add_argument("--precisions", type=float_list, default=[0.99, 0.999, 0.9999])
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--r", type=int, default=2)
    b.add_argument("--lr", type=float, default=0.01)
    b.add_argument("--max-epochs", type=int, default=5000)
    b.add_argument("--jobs", type=int, default=1)
    subs["sweep"] = b

    b = bsub.add_parser("sgd", parents=[common], help="sequential vs joint training cost")
    b.add_argument("--qubits", type=int, default=6)
    b.add_argument("--r", type=int_range, default=[1, 2, 3, 4, 5])
    b.add_argument("--seeds", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--tol", type=float, default=1e-4)
    b.add_argument("--lr", type=float, default=0.01)
    b.add_argument("--max-epochs", type=int, default=5000)
    subs["sgd"] = b
    return parser, subs


def _apply_config(args, argv, parser, subs):
    """Re-parse with config-file values as defaults so explicit flags win."""
    if args.config is None:
        return args
    try:
        data = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a flat JSON object")
    leaf = subs.get(getattr(args, "bench_command", None) or args.command)
    targets = [parser] + ([leaf] if leaf is not None else [])
    known = {a.dest for t in targets for a in t._actions} - {"help", "config", "command", "bench_command"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    shared = {a.dest for a in parser._actions}
    parser.set_defaults(**{k: v for k, v in data.items() if k in shared})
    if leaf is not None:
        leaf.set_defaults(**{k: v for k, v in data.items() if k not in shared})
    return parser.parse_args(argv)


# --- helpers -------------------------------------------------------------------------

def _output_dir(args) -> Path:
    out = args.output_dir or Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _write_json(data, path: Path | None) -> None:
    text = json.dumps(data, indent=1) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_state(args, out_dir: Path) -> StateVector:
    if args.state is not None and args.qubits is not None:
        raise UsageError("give either --state or --qubits, not both")
    if args.state is not None:
        try:
            return StateVector.from_json(_read_json(args.state))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"invalid state file {args.state}: {exc}") from None
    if args.qubits is None:
        raise UsageError("need --state FILE or --qubits N")
    if args.qubits < 1:
        raise UsageError("--qubits must be >= 1")
    psi = random_state(args.qubits, np.random.default_rng(args.seed), haar=args.haar)
    _write_json(psi.to_json(), out_dir / "state.json")
    return psi


def _optimizer_config(args, r=None) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            learning_rate=args.lr,
            loss_tolerance=getattr(args, "tol", 1e-4),
            max_epochs_per_sequence=args.max_epochs,
            repetition_r=args.r if r is None else r,
            precision_target=getattr(args, "precision", None),
            log_every=args.log_every,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --- commands ----------------------------------------------------------------------

def cmd_gen_state(args) -> int:
    if args.qubits < 1:
        raise UsageError("--qubits must be >= 1")
    psi = random_state(args.qubits, np.random.default_rng(args.seed), haar=args.haar)
    _write_json(psi.to_json(), args.out)
    return 0


def cmd_vqc(args) -> int:
    out = _output_dir(args)
    psi = _load_state(args, out)
    cfg = _optimizer_config(args)
    record = disentangle(psi, cfg, np.random.default_rng([args.seed, 1]))
    _write_json(record.to_json(), out / "vqc_record.json")
    if not record.converged:
        raise RunFailure("unconverged", f"sequence {len(record.sequences)} did not converge",
                         record=str(out / "vqc_record.json"))
    rebuilt = reconstruct(record)
    _write_json(rebuilt.to_json(), out / "vqc_reconstructed.json")
    print(f"fidelity {fidelity(psi, rebuilt):.10f}")
    print(f"average_m {record.average_m:.10f}")
    return 0


def cmd_rl(args) -> int:
    out = _output_dir(args)
    psi = _load_state(args, out)
    if psi.n_qubits < 2:
        raise UsageError("RL disentangling needs at least two qubits")
    try:
        cfg = RlConfig(episode_len=args.episode_len, dataset_size=args.dataset,
                       epochs_per_sequence=args.epochs, policy_learning_rate=args.policy_lr)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    record = rl_disentangle(psi, cfg, np.random.default_rng([args.seed, 2]))
    _write_json(record.to_json(), out / "rl_record.json")
    if not record.converged:
        raise RunFailure("synthesis-failure",
                         f"no disentangling action sequence for sequence {len(record.sequences)}",
                         record=str(out / "rl_record.json"))
    rebuilt = reconstruct_actions(record)
    _write_json(rebuilt.to_json(), out / "rl_reconstructed.json")
    print(f"fidelity {fidelity(psi, rebuilt):.10f}")
    print(f"final_qubit_prob_zero {record.final_qubit_prob_zero:.10f}")
    return 0


def cmd_reconstruct(args) -> int:
    data = _read_json(args.record)
    try:
        if data.get("kind") == "rl":
            state = reconstruct_actions(RlRecord.from_json(data))
        else:
            state = reconstruct(DisentangleRecord.from_json(data))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid record {args.record}: {exc}") from None
    _write_json(state.to_json(), args.out)
    if args.target is not None:
        target = StateVector.from_json(_read_json(args.target))
        print(f"fidelity {fidelity(target, state):.10f}", file=sys.stderr if args.out is None else sys.stdout)
    return 0


def cmd_table1(args) -> int:
    out = _output_dir(args)
    if args.qubits < 1 or args.r < 1:
        raise UsageError("--qubits and --r must be >= 1")
    if args.train:
        rng = np.random.default_rng(args.seed)
        psi = random_state(args.qubits, rng)
        rows = bench.run_sequential_bench(psi, _optimizer_config(args), rng)
    else:
        rows = bench.gate_stats(args.qubits, args.r)
    (out / "table1.csv").write_text(bench.table1_csv(rows))
    if not rows[-1].converged:
        raise RunFailure("unconverged", "a sequence hit the epoch cap", csv=str(out / "table1.csv"))
    return 0


def _sweep_job(job):
    n, p, k, cfg, seed = job
    return bench.run_sweep_cell(n, p, k, cfg, seed)


def cmd_sweep(args) -> int:
    out = _output_dir(args)
    cells_dir = out / "sweep_cells"
    cells_dir.mkdir(exist_ok=True)
    cfg = _optimizer_config(args)
    rows, todo = [], []
    for n, p, k in bench.sweep_cells(args.qubits, args.precisions, args.seeds):
        path = cells_dir / f"n{n}_p{p!r}_s{k}_seed{args.seed}_r{args.r}.json"
        if path.exists():
            rows.append(json.loads(path.read_text()))
        else:
            todo.append(((n, p, k, cfg, args.seed), path))

    def done(row, path):
        path.write_text(json.dumps(row))
        rows.append(row)
        log.info("sweep cell n=%d precision=%g seed=%d fidelity=%.6f",
                 row["n"], row["precision"], row["seed"], row["fidelity"])

    if args.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for row, (_, path) in zip(pool.map(_sweep_job, [j for j, _ in todo]), todo):
                done(row, path)
    else:
        for job, path in todo:
            done(_sweep_job(job), path)
    rows.sort(key=lambda r: (r["n"], r["precision"], r["seed"]))
    (out / "sweep.csv").write_text(bench.sweep_csv(rows))
    for pt in bench.aggregate_sweep(rows):
        print(f"n={pt.n_qubits} precision={pt.precision} mean_fidelity={pt.mean_fidelity:.6f} "
              f"failures={pt.failures}/{pt.seeds}")
    return 0


def cmd_sgd(args) -> int:
    out = _output_dir(args)
    cfg = _optimizer_config(args, r=1)
    rows = bench.sgd_comparison(args.qubits, args.r, args.seeds, cfg, seed=args.seed)
    (out / "sgd.csv").write_text(bench.sgd_csv(rows))
    return 0


COMMANDS = {
    "gen-state": cmd_gen_state,
    "vqc": cmd_vqc,
    "rl": cmd_rl,
    "reconstruct": cmd_reconstruct,
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "sgd": cmd_sgd,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, argv, parser, subs)
        name = args.bench_command if args.command == "bench" else args.command
        if name is None:
            raise UsageError("missing subcommand; see --help")
        logging.basicConfig(level=logging.INFO if (args.verbose or args.log_every) else logging.WARNING,
                            stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[name](args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "detail": str(exc)}), file=sys.stderr)
        return 1
    except RunFailure as exc:
        print(json.dumps(exc.payload), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
