"""Command-line driver.

Exit codes: 0 success, 1 usage error (nothing written), 2 runtime failure
(manifest and ``failure.log`` written).  Every run writes ``manifest.json``
echoing the fully resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .bilanczos import BiLanczosOptions, tridiagonalize
from .ensemble import ExperimentConfig, load, run_sweep, scaling_dataset
from .entanglement import eigenstate_entropy_stats, summarize_entropies
from .krylov_dynamics import EvolveOptions, default_time_grid, diagnostic_trace, evolve_krylov_chain
from .lanczos_metrics import krylov_variance, reciprocity
from .model import SpinChainParams, build_hamiltonian, initial_plus_state, sample_disorder
from .scaling import ScalingCollapse, crossing_point
from .spectral import csr_ratios, eigendecompose, mean_angular, mean_radial, sample_reference_ensemble

COMMANDS = ("trace", "lanczos", "csr", "entropy", "collapse", "sweep", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def recipe_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("krylovchaos.recipes").iterdir() if p.name.endswith(".toml"))


def read_config(path_or_recipe: str) -> dict:
    """Parse a TOML config file, or a packaged recipe given by name."""
    p = Path(path_or_recipe)
    if p.is_file():
        text = p.read_text()
    elif path_or_recipe in recipe_names():
        text = resources.files("krylovchaos.recipes").joinpath(f"{path_or_recipe}.toml").read_text()
    else:
        raise UsageError(f"config {path_or_recipe!r} is neither a file nor a recipe ({', '.join(recipe_names())})")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse config {path_or_recipe}: {exc}") from exc


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="TOML config file or recipe name")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0, help="disorder / base seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _model_flags(p, realizations=False):
    p.add_argument("--L", type=int, default=6, help="number of spins")
    p.add_argument("--w-gamma", type=float, default=0.2, help="dissipative disorder strength")
    p.add_argument("--w-delta", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.5)
    p.add_argument("--J", type=float, default=1.0)
    if realizations:
        p.add_argument("--realizations", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krylovchaos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("trace", help="Krylov complexity and IPR versus time for one realization")
    _common(p)
    _model_flags(p)
    p.add_argument("--method", choices=("rk", "eig", "auto"), default="auto")
    p.add_argument("--t-max", type=float, default=1e4)
    p.add_argument("--profile-times", type=float, nargs="*", default=[], help="also dump |phi_n|^2 at these times")

    p = sub.add_parser("lanczos", help="bi-Lanczos coefficients for one realization")
    _common(p)
    _model_flags(p)
    p.add_argument("--steps", type=int, default=None, help="stop after this many Krylov vectors")
    p.add_argument("--depths", type=int, nargs="*", default=[4, 5, 6])

    p = sub.add_parser("csr", help="complex spacing ratios of the model or a reference ensemble")
    _common(p)
    _model_flags(p, realizations=True)
    p.add_argument("--ensemble", choices=("model", "GOE", "AIdagger", "Poisson2D"), default="model")
    p.add_argument("--dim", type=int, default=1000, help="matrix size for reference ensembles")

    p = sub.add_parser("entropy", help="half-chain entanglement entropy of all eigenstates")
    _common(p)
    _model_flags(p, realizations=True)

    p = sub.add_parser("collapse", help="finite-size scaling collapse of a sweep result")
    _common(p)
    p.add_argument("--input", required=True, help="sweep output directory")
    p.add_argument("--observable", required=True, help="sigma_K2, R_K_<d>, S or sigma_S")
    p.add_argument("--rescale-y", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--init", type=float, nargs="+", default=None, help="W_c alpha [beta]")
    p.add_argument("--crossing", action="store_true", help="also report per-L zero crossings")

    p = sub.add_parser("sweep", help="disorder-averaged sweep over an (L, W_gamma) grid")
    _common(p)
    p.add_argument("--realizations", type=int, default=None, help="override realizations per point")

    p = sub.add_parser("verify", help="bi-Lanczos residual and evolution-oracle checks on small chains")
    _common(p)
    p.add_argument("--max-L", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-6)
    return parser


def _subparser(parser, command):
    return parser._subparsers._group_actions[0].choices[command]


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra:
        # report against the subcommand so the usage line lists its flags
        _subparser(parser, args.command).error(f"unrecognized arguments: {' '.join(extra)}")
    if args.config and args.command != "sweep":
        # a [command] table in the config supplies defaults; explicit flags still win
        table = read_config(args.config).get(args.command, {})
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        unknown = set(k.replace("-", "_") for k in table) - known
        if unknown:
            raise UsageError(f"unknown keys in [{args.command}] config table: {sorted(unknown)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in table.items()})
        args = parser.parse_args(argv)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


class Output:
    def __init__(self, root, fmt):
        self.root = Path(root)
        self.fmt = fmt
        self.files = []

    def _path(self, name):
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(str(path.relative_to(self.root)))
        return path

    def table(self, stem, header, rows):
        rows = [list(r) for r in rows]
        if self.fmt == "json":
            recs = [dict(zip(header, (_plain(v) for v in r))) for r in rows]
            self._path(f"{stem}.json").write_text(json.dumps(recs, indent=1))
            return
        with open(self._path(f"{stem}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])

    def json(self, name, obj):
        self._path(name).write_text(json.dumps(obj, indent=1, default=_plain))

    def text(self, name, text):
        self._path(name).write_text(text)


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _params(args) -> SpinChainParams:
    try:
        return SpinChainParams(L=args.L, W_gamma=args.w_gamma, J=args.J, h=args.h, W_delta=args.w_delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _hamiltonian(params, seed):
    disorder = sample_disorder(params, seed)
    return build_hamiltonian(params, disorder), disorder


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_trace(args, out: Output) -> dict:
    params = _params(args)
    extra = np.asarray(args.profile_times, dtype=float)
    if np.any(extra < 0) or np.any(extra > args.t_max):
        raise UsageError("--profile-times must lie in [0, t_max]")
    H, disorder = _hamiltonian(params, args.seed)
    out.json("disorder.json", json.loads(disorder.to_json()))
    form, _, report = tridiagonalize(H, initial_plus_state(params.L), BiLanczosOptions(keep_basis=True))
    times = default_time_grid(t_max=args.t_max)
    times = np.unique(np.concatenate([times, extra]))
    wfs = evolve_krylov_chain(form, times, EvolveOptions(method=args.method))
    tr = diagnostic_trace(wfs)
    out.table("trace", ["t", "c_k", "i_k", "raw_log_norm"], zip(tr.times, tr.c_k, tr.i_k, tr.raw_log_norm))
    for t in extra:
        wf = wfs[int(np.searchsorted(times, t))]
        p = np.abs(wf.normalized()) ** 2
        out.table(f"profile_t{t:g}", ["n", "prob"], zip(range(p.size), p))
    return {"K": form.K, "breakdown": form.breakdown, "residual": report.tridiagonal_residual}


def cmd_lanczos(args, out: Output) -> dict:
    params = _params(args)
    H, disorder = _hamiltonian(params, args.seed)
    out.json("disorder.json", json.loads(disorder.to_json()))
    form, _, report = tridiagonalize(H, initial_plus_state(params.L), BiLanczosOptions(max_steps=args.steps))
    # b, c start at n = 1, a at n = 0
    rows = []
    for n in range(form.K):
        b = form.b[n - 1] if n else 0j
        c = form.c[n - 1] if n else 0j
        j = form.hopping[n - 1] if n else 0.0
        ct = np.cos(form.theta[n - 1]) if n else 1.0
        rows.append([n, form.a[n].real, form.a[n].imag, b.real, b.imag, c.real, c.imag, j, ct])
    out.table("coefficients", ["n", "a_re", "a_im", "b_re", "b_im", "c_re", "c_im", "j", "cos_theta"], rows)
    out.text("tridiagonal.json", form.to_json())
    summary = {"K": form.K, "breakdown": form.breakdown}
    if form.K >= 5:
        summary["sigma_K2"] = krylov_variance(form)
    for d in args.depths:
        if 1 <= d <= form.K - 1:
            summary[f"R_K_{d}"] = reciprocity(form, d)
    if report is not None:
        summary["biorthogonality"] = report.biorthogonality
        summary["tridiagonal_residual"] = report.tridiagonal_residual
    out.json("summary.json", summary)
    print(json.dumps(summary, default=_plain))
    return summary


def _csr_row(label, samples):
    r = np.array([mean_radial(s) for s in samples])
    c = np.array([mean_angular(s) for s in samples])
    n = len(samples)
    sem = (lambda x: float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0)
    return label + [float(r.mean()), sem(r), float(c.mean()), sem(c), n]


def cmd_csr(args, out: Output) -> dict:
    header = ["L", "W_gamma", "r_mean", "r_sem", "cos_theta_mean", "cos_theta_sem", "n_realizations"]
    if args.realizations < 1:
        raise UsageError("--realizations must be >= 1")
    if args.ensemble == "model":
        params = _params(args)
        samples = []
        for r in range(args.realizations):
            H, _ = _hamiltonian(params, args.seed + r)
            spec = eigendecompose(H)
            out.table(f"spectra/r{r}", ["re", "im"], zip(spec.eigenvalues.real, spec.eigenvalues.imag))
            samples.append(csr_ratios(spec))
        row = _csr_row([params.L, params.W_gamma], samples)
    else:
        spectra = sample_reference_ensemble(args.ensemble, args.dim, args.realizations, args.seed)
        samples = [csr_ratios(s) for s in spectra]
        row = _csr_row([args.ensemble, ""], samples)
    out.table("csr", header, [row])
    summary = dict(zip(header, row))
    print(json.dumps(summary))
    return summary


def cmd_entropy(args, out: Output) -> dict:
    params = _params(args)
    if params.L % 2:
        raise UsageError("entropy needs an even L")
    if args.realizations < 1:
        raise UsageError("--realizations must be >= 1")
    samples = []
    for r in range(args.realizations):
        H, _ = _hamiltonian(params, args.seed + r)
        s = eigenstate_entropy_stats(H, params.L)
        out.table(f"samples/r{r}", ["re_E", "S"], zip(s.eigenvalue_re, s.entropies))
        samples.append(s)
    summ = summarize_entropies(samples)
    out.table("entropy", ["L", "W_gamma", "S_mean", "sigma_S"], [[params.L, params.W_gamma, summ.S_mean, summ.sigma_S]])
    summary = {"S_mean": summ.S_mean, "sigma_S": summ.sigma_S, "n_realizations": summ.n_realizations}
    print(json.dumps(summary))
    return summary


def cmd_collapse(args, out: Output) -> dict:
    try:
        store = load(args.input)
        data = scaling_dataset(store, args.observable)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read {args.observable!r} from {args.input}: {exc}") from exc
    rescale = args.rescale_y if args.rescale_y is not None else not args.observable.startswith("R_K")
    est = ScalingCollapse(rescale_y=rescale, init=args.init).fit(data)
    res = est.result()
    out.text("collapse.json", res.to_json())
    summary = {"W_c": res.W_c, "alpha": res.alpha, "beta": res.beta, "objective": res.objective}
    if args.crossing:
        cr = crossing_point(data)
        summary["crossing_mean"] = cr.mean
        summary["crossing_per_L"] = {str(k): v for k, v in cr.per_size.items()}
        summary["crossing_errors"] = {str(k): v for k, v in cr.errors.items()}
    print(f"W_c = {res.W_c:.6g}  alpha = {res.alpha:.6g}  beta = {res.beta:.6g}  objective = {res.objective:.3g}")
    return summary


def cmd_sweep(args, out: Output) -> dict:
    if not args.config:
        raise UsageError(f"sweep needs --config (file or recipe: {', '.join(recipe_names())})")
    table = dict(read_config(args.config).get("sweep", {}))
    table.setdefault("base_seed", args.seed)
    if args.realizations is not None:
        table["realizations_per_point"] = args.realizations
    try:
        config = ExperimentConfig.from_dict(table)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid [sweep] config: {exc}") from exc
    out.files.append("store.json")
    store = run_sweep(
        config,
        out_dir=out.root,
        threads=args.threads,
        progress=lambda p: print(f"L={p.L} W_gamma={p.W_gamma:.4g} ok={p.n_ok} failed={p.n_failed}", flush=True),
    )
    flagged = [(p.L, p.W_gamma) for p in store.sorted_points() if p.flagged]
    return {"config": config.to_dict(), "n_failures": len(store.failures), "flagged_points": flagged}


def verify_suite(max_L: int = 4, tol: float = 1e-6, seed: int = 0) -> list:
    """Bi-Lanczos residuals, Hermitian-limit symmetry and evolution-oracle agreement."""
    from .krylov_dynamics import direct_evolution_oracle

    rows = []
    for L in range(2, max_L + 1):
        for W in (0.0, 0.1, 1.0, 3.0):
            params = SpinChainParams(L=L, W_gamma=W)
            H, _ = _hamiltonian(params, seed)
            psi0 = initial_plus_state(L)
            form, basis, rep = tridiagonalize(H, psi0)
            rows.append((f"bi-Lanczos residual L={L} W={W}", rep.passed(1e-8), rep.tridiagonal_residual))
            if W == 0:
                dev = float(np.max(np.abs(form.b - form.c), initial=0.0))
                rows.append((f"Hermitian b=c L={L}", dev < 1e-9, dev))
            times = [1.0, 10.0, 100.0]
            chain = evolve_krylov_chain(form, times, EvolveOptions(method="rk"))
            direct = direct_evolution_oracle(H, psi0, basis, times)
            dev = max(float(np.max(np.abs(a.normalized() - b.normalized()))) for a, b in zip(chain, direct))
            rows.append((f"evolution oracle L={L} W={W}", dev < tol, dev))
    return rows


def cmd_verify(args, out: Output) -> dict:
    rows = verify_suite(args.max_L, args.tol, args.seed)
    width = max(len(r[0]) for r in rows)
    for name, ok, val in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {val:.3e}")
    out.table("verify", ["check", "passed", "value"], rows)
    failed = [r[0] for r in rows if not r[1]]
    if failed:
        raise RuntimeError(f"{len(failed)} verification checks failed")
    return {"checks": len(rows)}


HANDLERS = {
    "trace": cmd_trace,
    "lanczos": cmd_lanczos,
    "csr": cmd_csr,
    "entropy": cmd_entropy,
    "collapse": cmd_collapse,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def _manifest(args, argv, out: Output, status, result=None, error=None) -> dict:
    config = {k: v for k, v in vars(args).items()}
    if args.config:
        config["config_contents"] = read_config(args.config)
    return {
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "status": status,
        "outputs": sorted(set(out.files)),
        "result": result,
        "error": error,
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    out = Output(args.out, args.format)
    try:
        result = HANDLERS[args.command](args, out)
    except UsageError as exc:
        # raised before anything is written
        for name in out.files:
            (out.root / name).unlink(missing_ok=True)
        print(f"krylovchaos {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        out.root.mkdir(parents=True, exist_ok=True)
        (out.root / "failure.log").write_text(traceback.format_exc())
        out.files.append("failure.log")
        manifest = _manifest(args, argv, out, "failed", error=f"{type(exc).__name__}: {exc}")
        (out.root / "manifest.json").write_text(json.dumps(manifest, indent=1, default=_plain))
        print(f"krylovchaos {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    manifest = _manifest(args, argv, out, "ok", result=result)
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=1, default=_plain))
    return 0


if __name__ == "__main__":
    sys.exit(main())
