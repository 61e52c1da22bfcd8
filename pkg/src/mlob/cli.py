"""Command-line entry point: ``mlob <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 statistical degeneracy,
4 ill-posed pricing regime.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import __version__
from .errors import InputError, InvalidParams, MlobError, PricingError, StatisticalError
from .hftest import adverse_selection_test, tape_increments, write_buckets_csv
from .impact import classify_trades, cumulative_adverse_selection, spread_split, write_table1_csv
from .ledger import (
    Perspective, WealthModel, decompose, run_ledger, table2_metrics, wealth_model_series,
    write_ledger_csv, write_table2_csv,
)
from .limits import DiffusionParams, convergence_study, loglog_rate, write_convergence_csv
from .parent import find_parent_groups, group_trades, write_parents_csv
from .pricing import (
    ClosedFormValuer, MarketSpec, Payoff, PayoffKind, effective_volatility, price_closed_form,
    replicate, solve_pde, write_replication_csv, write_surface_csv,
)
from .simgen import (
    SimConfig, generate_diffusion_tape, generate_tape, read_increments_csv, write_increments_csv,
    write_truth_csv,
)
from .svg import Panel, Series, render
from .tape.codec import read_tape, write_tape
from .tape.trades import extract_trades, write_filter_stats_csv, write_trades_csv
from .units import HALF_SCALE

EXIT_OK, EXIT_INPUT, EXIT_STAT, EXIT_PRICING = 0, 2, 3, 4


def thread_count() -> int:
    raw = os.environ.get("MLOB_THREADS")
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParams(f"MLOB_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise InvalidParams("MLOB_THREADS must be >= 1")
    return n


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Order-preserving map over a pool capped by MLOB_THREADS."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects the run manifest and writes outputs stamped with its hash."""

    def __init__(self, args: argparse.Namespace, inputs: Iterable[str] = ()):
        flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
        self.manifest = {
            "tool": "mlob",
            "version": __version__,
            "flags": flags,
            "inputs": {str(p): _sha256_file(p) for p in inputs},
        }
        self.outputs: list[str] = []

    @property
    def hash(self) -> str:
        blob = json.dumps(self.manifest, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def write_csv(self, path: Path, writer: Callable[[io.StringIO], None]) -> None:
        buf = io.StringIO()
        buf.write(f"# manifest {self.hash}\n")
        writer(buf)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
        self.outputs.append(str(path))

    def write_svg(self, path: Path, panels: list[Panel]) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render(panels, self.hash))
        self.outputs.append(str(path))

    def finish(self, out_dir: Path | None) -> None:
        if out_dir is not None:
            doc = dict(self.manifest, outputs=sorted(self.outputs), hash=self.hash)
            (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
        for p in self.outputs:
            print(p)


def _load_tapes(path: str, parents: bool = False):
    tapes, stats = extract_trades(read_tape(path))
    if parents:
        tapes = {s: group_trades(t) for s, t in tapes.items()}
    return dict(sorted(tapes.items())), dict(sorted(stats.items()))


def cmd_ingest(args) -> int:
    run = Run(args, [args.tape])
    tapes, stats = _load_tapes(args.tape)
    out = Path(args.out_dir)
    run.write_csv(out / "trades.csv", lambda f: write_trades_csv(f, tapes))
    run.write_csv(out / "filter_stats.csv", lambda f: write_filter_stats_csv(f, stats))
    run.finish(out)
    return EXIT_OK


def _analyze_symbol(tape, perspective, drop_last):
    series = run_ledger(tape, perspective)
    decomp = decompose(tape, perspective)
    models = {m: wealth_model_series(tape, m, perspective) / HALF_SCALE for m in WealthModel}
    return dict(
        counts=classify_trades(tape, Perspective.AGGREGATE_ACTIVE, drop_last),
        metrics=table2_metrics(tape),
        series=series,
        decomp=decomp,
        models=models,
        adverse=cumulative_adverse_selection(tape),
        adverse_norm=cumulative_adverse_selection(tape, normalize=True),
    )


def cmd_analyze(args) -> int:
    run = Run(args, [args.tape])
    tapes, _ = _load_tapes(args.tape, args.parents)
    perspective = Perspective(args.perspective)
    results = dict(zip(tapes, parallel_map(
        lambda t: _analyze_symbol(t, perspective, args.drop_last_trade), tapes.values())))
    out = Path(args.out_dir)
    bis = "-bis" if args.parents else ""
    run.write_csv(out / f"table1{bis}.csv",
                  lambda f: write_table1_csv(f, {s: r["counts"] for s, r in results.items()}))
    run.write_csv(out / f"table2{bis}.csv",
                  lambda f: write_table2_csv(f, {s: r["metrics"] for s, r in results.items()}))
    for s, r in results.items():
        run.write_csv(out / f"ledger{bis}_{s}.csv",
                      lambda f, r=r: write_ledger_csv(f, r["series"], r["decomp"]))
    if results:
        fig1, fig2, fig4 = [], [Panel("Cumulative adverse selection", xlabel="trade", ylabel="currency"),
                                Panel("Cumulative adverse selection (rescaled)", xlabel="trade",
                                      ylabel="fraction of max")], []
        for s, r in results.items():
            x = np.arange(1, len(r["series"]) + 1)
            actual = (r["series"].X - r["series"].X[0]) / HALF_SCALE
            fig1.append(Panel(f"{s}: actual wealth vs exact model", [
                Series("actual", x, actual), Series("model", x, r["models"][WealthModel.COMPLETE])],
                "trade", "currency"))
            fig4.append(Panel(f"{s}: wealth models", [Series(m.value, x, v) for m, v in r["models"].items()],
                              "trade", "currency"))
            xa = np.arange(1, len(r["adverse"]) + 1)
            fig2[0].series.append(Series(s, xa, r["adverse"]))
            fig2[1].series.append(Series(s, xa, r["adverse_norm"]))
        run.write_svg(out / f"fig1{bis}.svg", fig1)
        run.write_svg(out / f"fig2{bis}.svg", fig2)
        run.write_svg(out / f"fig4{bis}.svg", fig4)
        traded = {s: t for s, t in tapes.items() if len(t)}
        if len(traded) >= 2:
            split = spread_split(traded)

            def write_split(f):
                f.write("symbol,tc,adverse\n")
                for sym, a, b in zip(split.symbols, split.tc, split.adverse):
                    f.write(f"{sym},{a:.4f},{b:.4f}\n")
                f.write(f"# slope {split.slope:.5f} effective_fraction {split.effective_fraction:.5f}\n")

            run.write_csv(out / f"spread_split{bis}.csv", write_split)
            run.write_svg(out / f"fig3{bis}.svg", [Panel(
                "Transaction cost vs adverse selection",
                [Series("symbols", split.tc, np.abs(split.adverse), "points")],
                "transaction cost gains", "|adverse selection|", logx=True, logy=True, diagonal=True)])
    run.finish(out)
    return EXIT_OK


def cmd_test_adverse(args) -> int:
    run = Run(args, [args.input])
    if args.increments:
        with open(args.input, newline="") as f:
            inc = read_increments_csv(f)
        series = {Path(args.input).stem: (inc.dp, inc.dl)}
    else:
        tapes, _ = _load_tapes(args.input, args.parents)
        series = {s: tape_increments(t) for s, t in tapes.items()}
    results = dict(zip(series, parallel_map(
        lambda pair: adverse_selection_test(*pair, buckets=args.buckets, variant=args.variant),
        series.values())))
    out = Path(args.out_dir)

    def table3(f):
        f.write("symbol,prob_rejection\n")
        for s, r in results.items():
            f.write(f"{s},{r.overall:.5f}\n")

    run.write_csv(out / "table3.csv", table3)
    for s, r in results.items():
        run.write_csv(out / f"buckets_{s}.csv", lambda f, r=r: write_buckets_csv(f, r))
    run.finish(out)
    return EXIT_OK


def cmd_parent_orders(args) -> int:
    run = Run(args, [args.tape])
    tapes, _ = _load_tapes(args.tape)
    groups = dict(zip(tapes, parallel_map(find_parent_groups, tapes.values())))
    out = Path(args.out_dir)
    run.write_csv(out / "parents.csv", lambda f: write_parents_csv(f, groups))
    raw = {s: classify_trades(t) for s, t in tapes.items()}
    grouped = {s: classify_trades(group_trades(t)) for s, t in tapes.items()}
    run.write_csv(out / "table1.csv", lambda f: write_table1_csv(f, raw))
    run.write_csv(out / "table1-bis.csv", lambda f: write_table1_csv(f, grouped))
    run.finish(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = SimConfig(
        seed=args.seed, n_trades=args.trades, symbol=args.symbol,
        informed_fraction=args.informed_frac, noise_move_q=args.noise_move_q,
        split_prob=args.split_prob, special_rate=args.special_rate, hidden_rate=args.hidden_rate,
        cancel_rate=args.cancel_rate, insider_fraction=args.insider_frac, rho=args.rho,
    )
    run = Run(args)
    if args.diffusion:
        inc = generate_diffusion_tape(cfg)
        run.write_csv(Path(args.out), lambda f: write_increments_csv(f, inc))
    else:
        messages, truth = generate_tape(cfg)
        write_tape(args.out, messages)
        run.outputs.append(args.out)
        if args.truth:
            run.write_csv(Path(args.truth), lambda f: write_truth_csv(f, truth))
    run.finish(None)
    return EXIT_OK


def _market(args) -> MarketSpec:
    spec = MarketSpec(args.sigma, args.rate, args.spread_coef, args.maturity)
    spec.validate()
    return spec


def cmd_price(args) -> int:
    spec = _market(args)
    spot = args.strike if args.spot is None else args.spot
    kind = PayoffKind(args.kind)
    closed = price_closed_form(spec, kind, args.strike, spot)
    rows = [("closed", closed)]
    if args.method == "pde":
        surface = solve_pde(spec, Payoff(kind, args.strike), args.space_nodes, args.time_nodes)
        rows.insert(0, ("pde", float(np.interp(spot, surface.p, surface.values[0]))))
        if args.surface_out:
            Run(args).write_csv(Path(args.surface_out), lambda f: write_surface_csv(f, surface))
    print("method,kind,strike,spot,sigma_eff,price")
    for method, price in rows:
        print(f"{method},{kind.value},{args.strike:.4f},{spot:.4f},"
              f"{effective_volatility(spec):.6f},{price:.4f}")
    return EXIT_OK


def cmd_replicate(args) -> int:
    spec = _market(args)
    spot = args.strike if args.spot is None else args.spot
    payoff = Payoff(PayoffKind(args.kind), args.strike, -1.0 if args.short else 1.0)
    ns = [int(n) for n in args.steps.split(",")]
    results = parallel_map(
        lambda n: replicate(spec, payoff, n, args.paths, seed=args.seed, spot=spot, valuer=ClosedFormValuer(spec, payoff)),
        ns)
    rows = [(n, r.rms) for n, r in zip(ns, results)]
    run = Run(args)
    run.write_csv(Path(args.out), lambda f: write_replication_csv(f, rows))
    if args.svg and all(r > 0 for _, r in rows):
        run.write_svg(Path(args.svg), [Panel(
            f"Replication error (slope {-loglog_rate(ns, [r for _, r in rows]):.3f})",
            [Series("rms error", ns, [r for _, r in rows])], "N", "rms error", logx=True, logy=True)])
    run.finish(None)
    return EXIT_OK


def cmd_limits(args) -> int:
    params = DiffusionParams(sigma=args.sigma, l=args.l, rho=args.rho, s=args.s)
    ns = [int(n) for n in args.ns.split(",")]
    study = convergence_study(params, ns, args.replications, args.seed, args.refine)
    run = Run(args)
    run.write_csv(Path(args.out), lambda f: write_convergence_csv(f, study))
    if args.svg:
        xs = [r.N for r in study.rows]
        run.write_svg(Path(args.svg), [Panel(
            f"Diffusion-limit convergence (rate {study.rate:.3f})",
            [Series("median", xs, [r.median_error for r in study.rows]),
             Series("q25", xs, [r.q25 for r in study.rows]),
             Series("q75", xs, [r.q75 for r in study.rows])],
            "N", "|X^N_T - X_T|", logx=True, logy=True)])
    run.finish(None)
    return EXIT_OK


def _add_market(p: argparse.ArgumentParser, kinds) -> None:
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--spread-coef", type=float, default=math.sqrt(2 * math.pi))
    p.add_argument("--strike", type=float, default=100.0)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--kind", choices=kinds, default="call")
    p.add_argument("--spot", type=float, default=None, help="defaults to the strike")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlob", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mlob {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="decode a tape into trade and filter-stat CSVs")
    p.add_argument("tape")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="impact counts, wealth metrics, ledgers and plots")
    p.add_argument("tape")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--parents", action="store_true", help="merge child prints into parent trades")
    p.add_argument("--perspective", choices=[x.value for x in Perspective],
                   default=Perspective.AGGREGATE_PASSIVE.value)
    p.add_argument("--drop-last-trade", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("test-adverse", help="bucketed adverse-selection test")
    p.add_argument("input", help="MLOB tape, or dp,dL CSV with --increments")
    p.add_argument("--increments", action="store_true")
    p.add_argument("--buckets", type=int, default=8)
    p.add_argument("--variant", choices=("printed", "symmetric"), default="printed")
    p.add_argument("--parents", action="store_true")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_test_adverse)

    p = sub.add_parser("parent-orders", help="reconstruct parent orders")
    p.add_argument("tape")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_parent_orders)

    p = sub.add_parser("simulate", help="generate a synthetic tape")
    p.add_argument("--trades", type=int, default=1000)
    p.add_argument("--informed-frac", type=float, default=0.3)
    p.add_argument("--noise-move-q", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--symbol", default="SIM")
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.add_argument("--split-prob", type=float, default=0.0)
    p.add_argument("--special-rate", type=float, default=0.0)
    p.add_argument("--hidden-rate", type=float, default=0.0)
    p.add_argument("--cancel-rate", type=float, default=0.0)
    p.add_argument("--insider-frac", type=float, default=0.0, help="experimental")
    p.add_argument("--diffusion", action="store_true", help="write correlated dp,dL increments instead")
    p.add_argument("--rho", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("price-option", help="friction-adjusted European price")
    _add_market(p, ("call", "put"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pde", dest="method", action="store_const", const="pde")
    g.add_argument("--closed", dest="method", action="store_const", const="closed")
    p.set_defaults(method="closed")
    p.add_argument("--space-nodes", type=int, default=400)
    p.add_argument("--time-nodes", type=int, default=400)
    p.add_argument("--surface-out")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("replicate", help="discrete delta-hedge error study")
    _add_market(p, ("call", "put", "forward"))
    p.add_argument("--short", action="store_true")
    p.add_argument("--steps", default="16,64,256,1024")
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("limits-study", help="discrete-to-continuous wealth convergence")
    p.add_argument("--ns", default="100,1000,10000,100000")
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--refine", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=-0.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_limits)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MlobError, OSError) as e:
        if isinstance(e, StatisticalError):
            code = EXIT_STAT
        elif isinstance(e, PricingError):
            code = EXIT_PRICING
        else:
            code = EXIT_INPUT
        print(f"mlob: {type(e).__name__}: {e}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
