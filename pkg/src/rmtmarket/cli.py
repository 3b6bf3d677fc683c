"""Command-line recipes that regenerate each experiment as CSV or JSON tables.

Every option can also come from an environment variable named ``RMT_`` plus
the flag in upper case with dashes turned into underscores (``--n-init`` ->
``RMT_N_INIT``).  Explicit flags win over the environment, which wins over
built-in defaults.  Each run writes ``config.json`` with the resolved values
next to its outputs and holds ``.rmtmarket.lock`` in the output directory
while running.

Exit codes: 0 success, 1 analysis or I/O error, 2 usage error, 3 output
directory locked by another run.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .correlation import ReturnMatrix, log_returns, pearson, rolling_correlations
from .dynamics import column, lag1_effect_tstat, lagged_relation, stats_series, write_stats_csv
from .ensembles import GeneratorSpec, element_distribution, ensemble_spectrum, mp_bin_density, mp_bounds
from .errors import RmtError
from .ingest import cached_correlations, load_prices, load_sectors, sector_sort
from .modes import decompose_modes, suggest_n_group
from .powermap import EPS_DYNAMICS, EPS_ENSEMBLE, EPS_STATES, emerging_ensemble
from .states import fit_market_states, purity
from .synth import CorrelationTarget, block_surrogate, markov_regime_panel, regime_panel

log = logging.getLogger("rmtmarket")

ENV_PREFIX = "RMT_"
DEFAULT_SEED = 20240611
LOCK_NAME = ".rmtmarket.lock"

TEN_BLOCKS = "30:0.45,25:0.35,20:0.5,22:0.3,18:0.4,15:0.55,20:0.25,16:0.6,14:0.35,14:0.45"
REGIME_LEVELS = "0.1,0.25,0.4,0.7"
STICKY_CHAIN = "0.95,0.05,0,0;0.025,0.95,0.025,0;0,0.025,0.95,0.025;0,0,0.05,0.95"

RECIPES = """\
recipes:
  ensembles  Wishart spectrum against the Marcenko-Pastur law
               rmtmarket ensembles --n 1024 --t 10240 --ensemble 200 --out fig1
             emerging spectra for several correlation levels
               rmtmarket ensembles --n 1024 --m 64 --u 0.1,0.3,0.8 --epsilon 0.001 --out fig3
             emerging spectra for several epoch lengths or distortions
               rmtmarket ensembles --n 256 --m 128,32 --out fig2
               rmtmarket ensembles --n 256 --m 32 --u 0.1 --epsilon 0.1,0.8 --out fig4
  modes      market / group / random components (ten-block surrogate by default)
               rmtmarket modes --t 8068 --out fig5
               rmtmarket modes --input prices.csv --sectors sectors.csv --out fig5
  dynamics   epoch statistics, lagged scatters and emerging-spectrum trackers
               rmtmarket dynamics --input prices.csv --m 20 --shift 10 --out fig7
               rmtmarket dynamics --n 40 --regimes 400:0.1,400:0.7 --m 20 --shift 5 --out fig7
  states     similarity, MDS, k-means states and transition probabilities
               rmtmarket states --n 40 --m 500 --epochs 400 --n-init 100 --out fig10
               rmtmarket states --input prices.csv --m 20 --shift 10 --k-min 4 --k-max 4 --out fig10
"""


class UsageError(Exception):
    pass


# -- argument parsing -------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[int, float]]:
    out = []
    for item in str(text).split(","):
        try:
            size, u = item.split(":")
            out.append((int(size), float(u)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected SIZE:U pairs, got {item!r}") from None
    return out


def _matrix(text: str) -> list[list[float]]:
    return [_floats(row) for row in str(text).split(";")]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"root seed (default {DEFAULT_SEED})")
    p.add_argument("--out", type=Path, default=None, help="output directory (required)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmtmarket", description="Random-matrix analysis of correlation matrices.",
        epilog=RECIPES, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("ensembles", formatter_class=fmt, help="Wishart and emerging-spectrum ensembles",
                       description="Without --m: Wishart eigenvalue density and element distribution for an "
                                   "N x T panel, with the Marcenko-Pastur curve.  With --m: emerging spectra "
                                   "of N x M epoch correlation matrices for every combination of --m, --u "
                                   "and --epsilon.",
                       epilog=RECIPES.split("  modes")[0])
    p.add_argument("--n", type=int, help="number of series N (required)")
    p.add_argument("--t", type=int, help="panel length T for the Wishart recipe")
    p.add_argument("--m", type=_ints, help="epoch length(s) M < N for the emerging recipe")
    p.add_argument("--u", type=_floats, default=[0.0], help="constant correlation level(s) U (default 0)")
    p.add_argument("--epsilon", type=_floats, default=None,
                   help=f"power-map distortion(s) (emerging default {EPS_ENSEMBLE}; Wishart default none)")
    p.add_argument("--ensemble", type=int, default=200, help="ensemble size (default 200)")
    p.add_argument("--bins", type=int, default=100, help="histogram bins (default 100)")
    _common(p)

    p = sub.add_parser("modes", formatter_class=fmt, help="market/group/random decomposition",
                       description="Decompose the full-period correlation matrix of --input prices, or of a "
                                   "block surrogate, into market, group and random components.")
    p.add_argument("--input", type=Path, help="price CSV (date column plus one column per asset)")
    p.add_argument("--sectors", type=Path, help="two-column asset_id,sector CSV used to order assets")
    p.add_argument("--blocks", type=_pairs, default=_pairs(TEN_BLOCKS),
                   help="surrogate blocks as SIZE:U,... (default: ten blocks, 194 series)")
    p.add_argument("--t", type=int, default=8068, help="surrogate length (default 8068)")
    p.add_argument("--n-group", type=int, default=None, help="modes 2..n_group form the group part "
                                                             "(default: count above the MP edge minus one)")
    _common(p)

    p = sub.add_parser("dynamics", formatter_class=fmt, help="epoch statistics over time",
                       description="Rolling-epoch moments of the correlation elements, largest and emerging "
                                   "eigenvalues, lagged relations and the lag-1 regression t-statistic.")
    p.add_argument("--input", type=Path, help="price CSV; without it a regime surrogate is generated")
    p.add_argument("--n", type=int, default=40, help="surrogate series count (default 40)")
    p.add_argument("--regimes", type=_pairs, default=_pairs("400:0.1,400:0.7"),
                   help="surrogate segments LENGTH:U,... (default 400:0.1,400:0.7)")
    p.add_argument("--m", type=int, default=20, help="epoch length (default 20)")
    p.add_argument("--shift", type=int, default=10, help="epoch shift (default 10)")
    p.add_argument("--epsilon", type=float, default=EPS_DYNAMICS,
                   help=f"distortion for the emerging spectrum (default {EPS_DYNAMICS})")
    p.add_argument("--max-lag", type=int, default=2, help="largest lag for scatter tables (default 2)")
    p.add_argument("--window", type=int, default=20, help="rolling window of the t-statistic (default 20)")
    _common(p)

    p = sub.add_parser("states", formatter_class=fmt, help="market-state classification",
                       description="Similarity of power-mapped epoch matrices, classical MDS, k-means with "
                                   "the minimum-spread choice of k, ordered states and transitions.  Without "
                                   "--input a sticky four-regime Markov surrogate is generated and its "
                                   "true regimes are written for comparison.")
    p.add_argument("--input", type=Path, help="price CSV")
    p.add_argument("--cache", type=Path, help="directory for cached epoch correlations (with --input)")
    p.add_argument("--n", type=int, default=40, help="surrogate series count (default 40)")
    p.add_argument("--epochs", type=int, default=400, help="surrogate epoch count (default 400)")
    p.add_argument("--levels", type=_floats, default=_floats(REGIME_LEVELS),
                   help=f"surrogate regime U levels (default {REGIME_LEVELS})")
    p.add_argument("--chain", type=_matrix, default=_matrix(STICKY_CHAIN),
                   help="surrogate transition matrix, rows separated by ';'")
    p.add_argument("--m", type=int, default=500, help="epoch length (default 500)")
    p.add_argument("--shift", type=int, default=None, help="epoch shift (default: M, non-overlapping)")
    p.add_argument("--epsilon", type=float, default=EPS_STATES, help=f"distortion (default {EPS_STATES})")
    p.add_argument("--k-min", type=int, default=2, help="smallest k tried (default 2)")
    p.add_argument("--k-max", type=int, default=8, help="largest k tried (default 8)")
    p.add_argument("--n-init", type=int, default=500, help="k-means initializations per k (default 500)")
    p.add_argument("--dims", type=int, default=3, help="MDS dimensions (default 3)")
    _common(p)
    return parser


def _apply_env(parser: argparse.ArgumentParser, command: str, environ) -> dict:
    """Push ``RMT_*`` values into the subparser defaults; returns what was used."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    used = {}
    for action in sub._actions:
        if not action.option_strings or action.dest == "help":
            continue
        name = ENV_PREFIX + action.option_strings[-1].lstrip("-").upper().replace("-", "_")
        if name in environ:
            raw = environ[name]
            try:
                value = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{name}: {exc}") from None
            if action.choices and value not in action.choices:
                raise UsageError(f"{name}: {raw!r} not in {list(action.choices)}")
            sub.set_defaults(**{action.dest: value})
            used[name] = raw
    return used


# -- output helpers -----------------------------------------------------------

class Writer:
    def __init__(self, out: Path, fmt: str):
        self.out = out
        self.fmt = fmt
        self.files: list[str] = []

    def table(self, name: str, columns, rows) -> Path:
        path = self.out / f"{name}.{self.fmt}"
        rows = [list(r) for r in rows]
        if self.fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(columns)
                for r in rows:
                    w.writerow([_cell(v) for v in r])
        else:
            recs = [{c: _plain(v) for c, v in zip(columns, r)} for r in rows]
            path.write_text(json.dumps(recs, indent=1) + "\n")
        self.files.append(path.name)
        return path

    def matrix(self, name: str, labels, m: np.ndarray) -> Path:
        labels = [str(x) for x in labels]
        if self.fmt == "csv":
            return self.table(name, ["id", *labels], ([a, *row] for a, row in zip(labels, m)))
        path = self.out / f"{name}.json"
        path.write_text(json.dumps({"ids": labels, "matrix": np.asarray(m).tolist()}) + "\n")
        self.files.append(path.name)
        return path

    def json(self, name: str, obj) -> Path:
        path = self.out / f"{name}.json"
        path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
        self.files.append(path.name)
        return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, Path):
        return str(v)
    return v


@contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockedError(f"{out} is in use by another run (remove {lock} if that run died)") from None
    with os.fdopen(fd, "w") as fh:
        fh.write(f"{os.getpid()}\n")
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


class LockedError(Exception):
    pass


# -- recipes ----------------------------------------------------------------

def cmd_ensembles(a, w: Writer) -> dict:
    if a.n is None:
        raise UsageError("ensembles needs --n")
    if (a.t is None) == (a.m is None):
        raise UsageError("ensembles needs exactly one of --t (Wishart) or --m (emerging spectrum)")
    if a.ensemble < 1:
        raise UsageError("--ensemble must be >= 1")
    if a.m is None:
        eps = (a.epsilon or [None])[0]
        summary = {}
        for u in a.u:
            tag = f"u{u:g}"
            spec = GeneratorSpec(a.n, a.t, u=u, epsilon=eps)
            sd = ensemble_spectrum(spec, a.ensemble, a.bins, a.seed)
            el = element_distribution(spec, a.ensemble, a.bins, a.seed)
            rows = [(x, d) for x, d in zip(sd.bin_centers, sd.density)]
            w.table(f"spectrum_{tag}", ["bin_center", "density"], rows)
            w.table(f"elements_{tag}", ["bin_center", "density"], zip(el.bin_centers, el.density))
            lo, hi = mp_bounds(spec.q)
            entry = {"q": spec.q, "mp_lambda_min": lo, "mp_lambda_max": hi,
                     "member_min_mean": float(sd.member_min.mean()),
                     "member_max_mean": float(sd.member_max.mean()),
                     "zero_count_mean": float(sd.zero_counts.mean()),
                     "element_mean": el.sample_mean, "element_var": el.sample_var}
            if u == 0 and eps is None:
                ref = mp_bin_density(sd.bin_edges, spec.q)
                w.table(f"mp_reference_{tag}", ["bin_center", "density"], zip(sd.bin_centers, ref))
                entry["mean_abs_bin_error"] = float(np.mean(np.abs(sd.density - ref)))
            summary[tag] = entry
        return summary
    eps_list = a.epsilon or [EPS_ENSEMBLE]
    rows = []
    for m in a.m:
        for u in a.u:
            for eps in eps_list:
                stats, vals = emerging_ensemble(a.n, m, u, eps, a.ensemble, a.seed, keep_values=True)
                dens, edges = np.histogram(vals, bins=a.bins, density=True)
                centers = 0.5 * (edges[:-1] + edges[1:])
                w.table(f"emerging_m{m}_u{u:g}_eps{eps:g}", ["bin_center", "density"], zip(centers, dens))
                rows.append(stats)
    cols = list(vars(rows[0]).keys())
    w.table("emerging_stats", cols, ([getattr(r, c) for c in cols] for r in rows))
    return {"configurations": len(rows)}


def _panel_returns(a):
    panel = load_prices(a.input)
    return panel, log_returns(panel)


def cmd_modes(a, w: Writer) -> dict:
    if a.n_group is not None and a.n_group < 1:
        raise UsageError("--n-group must be >= 1")
    if a.input:
        panel = load_prices(a.input)
        if a.sectors:
            panel = sector_sort(panel, load_sectors(a.sectors))
        r = log_returns(panel)
        ids, labels, x = panel.asset_ids, panel.sector_labels, r.returns
    else:
        if a.sectors:
            raise UsageError("--sectors requires --input")
        g = block_surrogate(a.blocks, a.t, a.seed)
        ids = g.ids
        labels = tuple(f"B{b}" for b in CorrelationTarget.blocks(a.blocks).block_labels())
        x = g.data
    n, t = x.shape
    if t < 2 or np.any(np.ptp(x, axis=1) == 0):
        raise RmtError("every series needs nonzero spread over the full period")
    c = pearson(x)
    w0 = np.linalg.eigvalsh(c)[::-1]
    suggested = suggest_n_group(w0, t / n)
    n_group = a.n_group if a.n_group is not None else suggested
    if n_group >= n:
        raise UsageError(f"--n-group must be below N={n}")
    d = decompose_modes(c, n_group)
    w.matrix("correlation", ids, c)
    for name in ("market", "group", "random"):
        w.matrix(name, ids, getattr(d, name))
    w.table("ladder", ["rank", "eigenvalue"], ((i + 1, v) for i, v in enumerate(d.eigenvalues)))
    w.table("assets", ["asset", "label"], zip(ids, labels))
    lo, hi = mp_bounds(t / n)
    return {"n": n, "t": t, "n_group": n_group, "suggested_n_group": suggested,
            "lambda_max": float(d.eigenvalues[0]), "lambda_min": float(d.eigenvalues[-1]),
            "mp_edges": [lo, hi]}


def cmd_dynamics(a, w: Writer) -> dict:
    if a.shift < 1:
        raise UsageError("--shift must be >= 1")
    if a.m < 2:
        raise UsageError("--m must be >= 2")
    if a.input:
        _, r = _panel_returns(a)
    else:
        r = ReturnMatrix(regime_panel(a.n, a.regimes, a.seed).data)
    if a.m > r.shape[1]:
        raise UsageError(f"--m={a.m} exceeds the {r.shape[1]} available returns")
    series = stats_series(rolling_correlations(r, a.m, a.shift), a.epsilon if a.m < r.shape[0] else None)
    path = w.out / f"stats.{w.fmt}"
    if w.fmt == "csv":
        write_stats_csv(series, path)
        w.files.append(path.name)
    else:
        cols = list(vars(series[0]).keys())
        w.table("stats", cols, ([getattr(s, c) for c in cols] for s in series))
    taus = [s.tau for s in series]
    mc = column(series, "mean_c")
    out = {"epochs": len(series), "lags": {}}
    pairs = [("mean_c", "df"), ("mean_c", "variance"), ("mean_c", "kurtosis")]
    lmin = column(series, "lambda_min_emerging")
    if np.all(np.isfinite(lmin)):
        pairs += [("lambda_min_emerging", "mean_c"), ("neg_count", "mean_c")]
    for xname, yname in pairs:
        xs, ys = column(series, xname), column(series, yname)
        for lag in range(a.max_lag + 1):
            if len(xs) <= lag + 2 or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
                continue
            rel = lagged_relation(xs, ys, lag, taus)
            w.table(f"lag{lag}_{xname}_{yname}", ["x", "y", "tau"], zip(rel.x, rel.y, rel.tau))
            out["lags"][f"{xname}->{yname}@{lag}"] = {"r": rel.r, "residual_variance": rel.residual_variance()}
    if np.all(np.isfinite(lmin)) and len(mc) - 1 >= a.window >= 8:
        t = lag1_effect_tstat(mc, lmin, a.window)
        w.table("tstat", ["tau", "t"], zip(taus[a.window:], t))
    return out


def cmd_states(a, w: Writer) -> dict:
    if a.k_min < 1 or a.k_max < a.k_min:
        raise UsageError("need 1 <= --k-min <= --k-max")
    if a.n_init < 1 or (a.k_max > a.k_min and a.n_init < 2):
        raise UsageError("--n-init must be >= 2 when searching over k")
    shift = a.shift if a.shift is not None else a.m
    if shift < 1 or a.m < 2:
        raise UsageError("need --m >= 2 and --shift >= 1")
    truth = None
    if a.input:
        panel = load_prices(a.input)
        if a.cache:
            cs = cached_correlations(panel, a.m, shift, a.cache)
        else:
            cs = rolling_correlations(log_returns(panel), a.m, shift)
    else:
        if shift != a.m:
            raise UsageError("the surrogate uses non-overlapping epochs; leave --shift unset or equal to --m")
        g, truth = markov_regime_panel(a.n, a.m, a.levels, np.array(a.chain), a.epochs, a.seed)
        cs = rolling_correlations(ReturnMatrix(g.data), a.m, a.m)
    if a.k_max > len(cs):
        raise UsageError(f"--k-max={a.k_max} exceeds the {len(cs)} epochs")
    model = fit_market_states(cs, a.epsilon, (a.k_min, a.k_max), a.n_init, a.seed, a.dims)
    taus = model.epoch_labels
    w.matrix("similarity", taus, model.similarity.d)
    coords = model.embedding.coords
    axes = ["x", "y", "z"][:coords.shape[1]] + [f"x{j}" for j in range(3, coords.shape[1])]
    w.table("points", ["tau", *axes, "state"], ([t, *row, s] for t, row, s in zip(taus, coords, model.assignments)))
    w.table("intra_stats", ["k", "mean", "sd"], ((k, m, s) for k, (m, s) in sorted(model.intra_stats.items())))
    w.matrix("transition", [f"S{i}" for i in range(1, model.k + 1)], model.transition)
    summary = model.to_dict()
    summary.pop("assignments")
    if truth is not None:
        w.table("truth", ["tau", "regime"], zip(taus, truth + 1))
        summary["purity"] = purity(model.assignments, truth)
    return summary


COMMANDS = {"ensembles": cmd_ensembles, "modes": cmd_modes, "dynamics": cmd_dynamics, "states": cmd_states}


def main(argv=None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = parser.parse_known_args(argv)[0] if argv else None
    command = getattr(pre, "command", None)
    if command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        env_used = _apply_env(parser, command, environ)
    except UsageError as exc:
        parser.error(str(exc))
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if a.out is None:
        parser.error(f"{command} needs --out")
    config = {k: v for k, v in vars(a).items() if k != "verbose"}
    config["env_overrides"] = env_used
    config["version"] = __version__
    try:
        with output_lock(a.out):
            w = Writer(a.out, a.format)
            summary = COMMANDS[command](a, w)
            w.json("summary", summary)
            w.json("config", config)
    except UsageError as exc:
        parser.error(str(exc))
    except LockedError as exc:
        print(f"rmtmarket: {exc}", file=sys.stderr)
        return 3
    except (RmtError, OSError) as exc:
        print(f"rmtmarket {command}: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s", ", ".join(w.files))
    return 0


if __name__ == "__main__":
    sys.exit(main())
