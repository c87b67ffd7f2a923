"""Command-line front end.

    selfobs toy run      --config cfg.json [--output DIR] [--seed N]
    selfobs toy scan     --config cfg.json ...
    selfobs coupled      --config cfg.json ...
    selfobs molecule bo|scf|exact --config cfg.json ...
    selfobs measure      --config cfg.json ...

Exit status: 0 success, 1 invalid input, 2 numerical divergence,
3 SCF non-convergence (history still written). Every run leaves
``DIR/manifest.json``. Verbosity comes from ``SELFOBS_LOG``
(quiet, info, debug).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dynamics import expectation_coupling, pointwise_coupling, propagate_coupled
from .errors import ConfigError, DivergenceError, EigenConvergenceError, SelfObsError
from .hilbert import LinearOperator, StateVector, make_uniform_grid
from .measurement import born_probabilities, make_observable, sample_measurement
from .molecule import MoleculeParams, bo_curve, exact_two_coordinate, scf_hartree
from .output import atomic_write, sha256_of, table_text
from .toy import ToyParams, toy_propagate

log = logging.getLogger("selfobs")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_NOT_CONVERGED = 0, 1, 2, 3
LOG_ENV = "SELFOBS_LOG"
LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

SUBCOMMAND_KINDS = {
    ("toy", "run"): "toy-run",
    ("toy", "scan"): "toy-scan",
    ("coupled", None): "coupled-run",
    ("molecule", "bo"): "molecule-bo",
    ("molecule", "scf"): "molecule-scf",
    ("molecule", "exact"): "molecule-exact",
    ("measure", None): "measure-sample",
}


def _c(pair) -> complex:
    return complex(pair[0], pair[1])


def _cmatrix(rows) -> np.ndarray:
    return np.array([[_c(x) for x in row] for row in rows], dtype=complex)


def _molecule_params(p: dict) -> MoleculeParams:
    eg, ng = p["electron_grid"], p["nuclear_grid"]
    return MoleculeParams(
        make_uniform_grid(eg["n"], eg["x_min"], eg["x_max"]),
        make_uniform_grid(ng["n"], ng["x_min"], ng["x_max"]),
        M=p["M"], s_e=p["s_e"], s_n=p["s_n"],
    )


def _ext(cfg: RunConfig) -> str:
    return "." + cfg.output_format


def _run_toy(cfg: RunConfig) -> tuple[dict, bool]:
    p = cfg.params
    traj = toy_propagate(ToyParams(_c(p["a"]), _c(p["b"]), _c(p["psi0"]), _c(p["phi0"]), p["dt"], p["steps"]))
    header, rows = traj.table()
    return {"trajectory" + _ext(cfg): table_text(header, rows, cfg.output_format)}, True


def _run_toy_scan(cfg: RunConfig) -> tuple[dict, bool]:
    p = cfg.params
    blocks, header = [], None
    for b in p["b_values"]:
        traj = toy_propagate(ToyParams(_c(p["a"]), _c(b), _c(p["psi0"]), _c(p["phi0"]), p["dt"], p["steps"]))
        h, rows = traj.table()
        header = ["re_b", "im_b"] + h
        blocks.append(np.column_stack((np.full(len(rows), b[0]), np.full(len(rows), b[1]), rows)))
    return {"scan" + _ext(cfg): table_text(header, np.vstack(blocks), cfg.output_format)}, True


def _run_coupled(cfg: RunConfig) -> tuple[dict, bool]:
    p = cfg.params
    psi0 = StateVector([_c(x) for x in p["psi0"]])
    phi0 = StateVector([_c(x) for x in p["phi0"]])
    g_sm, g_ms = _c(p["g_sm"]), _c(p["g_ms"])
    if p["coupling"] == "pointwise":
        sys_ = pointwise_coupling(g_sm, g_ms, psi0.dim)
    else:
        n_s, n_m = psi0.dim, phi0.dim

        def mat(key, n):
            return _cmatrix(p[key]) if key in p else np.eye(n, dtype=complex)

        sys_ = expectation_coupling(
            [(g_sm, mat("A_S", n_s), mat("B_M", n_m))],
            [(g_ms, mat("A_M", n_m), mat("B_S", n_s))],
            n_s, n_m,
        )
    traj = propagate_coupled(sys_, psi0, phi0, p["dt"], p["steps"])
    header, rows = traj.table()
    return {"trajectory" + _ext(cfg): table_text(header, rows, cfg.output_format)}, True


def _run_bo(cfg: RunConfig) -> tuple[dict, bool]:
    mp = _molecule_params(cfg.params)
    r = cfg.params.get("r_values") or mp.nuclear_grid.points
    curve = bo_curve(mp, r)
    rows = np.column_stack((curve.separations, curve.electronic_energy, curve.total_curve))
    text = table_text(["r", "electronic_energy", "total_energy"], rows, cfg.output_format)
    return {"bo_curve" + _ext(cfg): text}, True


def _run_scf(cfg: RunConfig) -> tuple[dict, bool]:
    p = cfg.params
    res = scf_hartree(_molecule_params(p), p["tol"], p["max_iter"], p["mixing"])
    header, rows = res.table()
    summary_header = ["R_expectation", "E_electron", "E_nuclear", "E_total", "iterations", "converged"]
    summary = [[res.R_expectation, res.E_electron, res.E_nuclear, res.E_total, res.iterations, float(res.converged)]]
    files = {
        "scf_history" + _ext(cfg): table_text(header, rows, cfg.output_format),
        "scf_summary" + _ext(cfg): table_text(summary_header, summary, cfg.output_format),
    }
    return files, res.converged


def _run_exact(cfg: RunConfig) -> tuple[dict, bool]:
    mp = _molecule_params(cfg.params)
    energy, state = exact_two_coordinate(mp)
    rows = [[energy, state.expected_separation(mp)]]
    return {"exact" + _ext(cfg): table_text(["E_exact", "R_expectation"], rows, cfg.output_format)}, True


def _run_measure(cfg: RunConfig) -> tuple[dict, bool]:
    p = cfg.params
    if cfg.seed is None:
        raise ConfigError("measure-sample requires a seed (config 'seed' or --seed)", "seed")
    matrix = _cmatrix(p["observable"])
    hermitian = np.allclose(matrix, matrix.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(matrix).max()))
    if not hermitian:
        raise ConfigError("'observable' must be Hermitian", "observable")
    obs = make_observable(LinearOperator(matrix, True), p["group_tol"])
    state = StateVector([_c(x) for x in p["state"]])
    rng = np.random.default_rng(cfg.seed)
    probs = born_probabilities(state, obs)
    draws = []
    for i in range(p["draws"]):
        rec = sample_measurement(state, obs, rng)
        draws.append([i, rec.outcome, rec.probability])
    return {
        "probabilities" + _ext(cfg): table_text(["outcome", "probability"], probs, cfg.output_format),
        "samples" + _ext(cfg): table_text(["draw", "outcome", "probability"], draws, cfg.output_format),
    }, True


RUNNERS = {
    "toy-run": _run_toy,
    "toy-scan": _run_toy_scan,
    "coupled-run": _run_coupled,
    "molecule-bo": _run_bo,
    "molecule-scf": _run_scf,
    "molecule-exact": _run_exact,
    "measure-sample": _run_measure,
}


def _write_manifest(out_dir: Path, cfg, duration_ms: int, converged, files: dict) -> None:
    manifest = {
        "config": cfg.to_dict() if cfg is not None else None,
        "version": __version__,
        "duration_ms": duration_ms,
        "converged": converged,
        "checksum_sha256": sha256_of(files[name] for name in sorted(files)),
    }
    atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run(cfg: RunConfig, out_dir=None) -> int:
    """Run one experiment, write its data files and manifest, return the exit status."""
    out_dir = Path(out_dir or cfg.output or "selfobs-out")
    start = time.perf_counter()
    files: dict = {}
    converged = False
    try:
        files, converged = RUNNERS[cfg.kind](cfg)
        status = EXIT_OK if converged else EXIT_NOT_CONVERGED
        if not converged:
            log.error("%s did not converge; history written to %s", cfg.kind, out_dir)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        status = EXIT_INVALID
    except (DivergenceError, EigenConvergenceError) as exc:
        log.error("numerical failure: %s", exc)
        status = EXIT_DIVERGED
    except SelfObsError as exc:
        log.error("invalid input: %s", exc)
        status = EXIT_INVALID
    for name, text in files.items():
        atomic_write(out_dir / name, text)
    duration_ms = int(round(1000 * (time.perf_counter() - start)))
    _write_manifest(out_dir, cfg, duration_ms, bool(converged) and status == EXIT_OK, files)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfobs", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--output", help="output directory (overrides config 'output')")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config 'seed')")

    toy = sub.add_parser("toy", help="scalar toy model")
    toy_sub = toy.add_subparsers(dest="action", required=True)
    common(toy_sub.add_parser("run", help="single trajectory"))
    common(toy_sub.add_parser("scan", help="sweep over b"))

    common(sub.add_parser("coupled", help="coupled S/M propagation"))

    mol = sub.add_parser("molecule", help="1D soft-Coulomb diatomic")
    mol_sub = mol.add_subparsers(dest="action", required=True)
    for name in ("bo", "scf", "exact"):
        common(mol_sub.add_parser(name))

    common(sub.add_parser("measure", help="seeded projective measurements"))
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get(LOG_ENV, "info").lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(level_name, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if level_name not in LOG_LEVELS:
        log.warning("%s=%r not recognised, using info", LOG_ENV, level_name)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    kind = SUBCOMMAND_KINDS[(args.command, getattr(args, "action", None))]
    out_dir = args.output
    try:
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand (expects {kind!r})", "kind")
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer", "seed")
            cfg = dataclasses.replace(cfg, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        target = Path(out_dir or "selfobs-out")
        _write_manifest(target, None, 0, False, {})
        return EXIT_INVALID
    return run(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
