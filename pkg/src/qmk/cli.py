"""Command-line front end.

    qmk distance --input r.json --input2 s.json
    qmk bipartite-sweep --a 0.5,1,2 --b 0.5,1,2 --hbar 0.5,1 --format csv
    qmk spectrum --hbar 1 --cutoff 8

Exit codes: 0 success, 1 bad input, 2 infeasible or ill-posed problem,
3 solver did not converge (the partial report is still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bipartite import BipartiteInstance, coupling_sqrt, mk2_value, marginals, cost_matrix, projected_operators
from .classical import semiclassical_gap, solve_discrete_mk2
from .cost import block_spectrum, build_cost
from .fock import DEFAULT_TAIL_TOL, FockSpace, TruncationError, choose_cutoff, coherent_tail
from .optimality import ehrenfest_check, kernel_criterion, linear_map_residual, transport_residuals_finite_rank
from .sdp import InfeasibleProblem, PrimalProblem, SolverOptions, certify, compress_problem, solve_primal
from .states import density_from_spec, toeplitz_quantize

COMMANDS = ("distance", "dual", "certify", "structure", "bipartite-sweep", "toeplitz-check", "classical", "spectrum")

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    output: Optional[str] = None
    fmt: str = "json"
    hbar: Optional[list] = None
    cutoff: Optional[int] = None
    dim_d: int = 1
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    a: Optional[list] = None
    b: Optional[list] = None

    def solver_options(self) -> SolverOptions:
        kw = {}
        if self.tol is not None:
            kw["tol"] = self.tol
        if self.max_iter is not None:
            kw["max_iter"] = self.max_iter
        return SolverOptions(**kw)

    def digest(self) -> str:
        """Hash of the configuration and of the referenced input files' contents."""
        blob = {k: v for k, v in self.__dict__.items() if k != "output"}
        blob["input_sha"] = [hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in self.inputs]
        text = json.dumps(blob, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmk", description="Quantum Monge-Kantorovich transport toolkit")
    parser.add_argument("--version", action="version", version=f"qmk {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", help="JSON density specification")
    parser.add_argument("--input2", help="second JSON density specification")
    parser.add_argument("--hbar", type=_float_list, help="Planck constant(s), comma separated")
    parser.add_argument("--cutoff", type=int, help="per-axis Fock cutoff (overrides the automatic choice)")
    parser.add_argument("--dim-d", type=int, default=1, help="phase-space half dimension for spectrum")
    parser.add_argument("--a", type=_float_list, default=[0.5, 1.0, 2.0], help="bipartite sweep: left centres")
    parser.add_argument("--b", type=_float_list, default=[0.5, 1.0, 2.0], help="bipartite sweep: right centres")
    parser.add_argument("--tol", type=float, help="solver residual tolerance")
    parser.add_argument("--max-iter", type=int, help="solver iteration limit")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--output", help="output file (stdout when omitted)")
    return parser


def config_from_args(args) -> RunConfig:
    inputs = [p for p in (args.input, args.input2) if p is not None]
    for p in inputs:
        if not Path(p).is_file():
            raise InputError(f"input file not found: {p}")
    if args.cutoff is not None and args.cutoff < 1:
        raise InputError("--cutoff must be positive")
    return RunConfig(
        command=args.command,
        inputs=inputs,
        output=args.output,
        fmt=args.format,
        hbar=args.hbar,
        cutoff=args.cutoff,
        dim_d=args.dim_d,
        tol=args.tol,
        max_iter=args.max_iter,
        a=args.a,
        b=args.b,
    )


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def matrix_json(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _num(obj)
    return obj


def render(payload: dict, rows: Optional[list], columns: Optional[list], cfg: RunConfig, digest: str) -> str:
    """JSON object, or CSV table with a two-line provenance header."""
    if cfg.fmt == "csv" and rows is not None:
        buf = io.StringIO()
        buf.write(f"# qmk {__version__}\n# config {digest}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(_num(row[c])) if not isinstance(row[c], str) else row[c] for c in columns])
        return buf.getvalue()
    body = {"version": __version__, "config_hash": digest, "command": cfg.command}
    body.update(_clean(payload))
    if rows is not None:
        body["rows"] = _clean(rows)
    return json.dumps(body, indent=1, sort_keys=True, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _read_spec(path: str) -> dict:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")
    if not isinstance(spec, dict) or "kind" not in spec or "hbar" not in spec:
        raise InputError(f"{path}: density specification needs 'hbar' and 'kind'")
    return spec


def _points(spec: dict) -> list:
    return [(pt["q"], pt["p"]) for pt in spec.get("points", [])]


def load_pair(cfg: RunConfig, need: int = 2):
    """Parse the input densities on one shared Fock space."""
    if len(cfg.inputs) < need:
        raise InputError(f"{cfg.command} needs {need} input file(s)")
    specs = [_read_spec(p) for p in cfg.inputs[:need]]
    if cfg.hbar:
        for s in specs:
            s["hbar"] = cfg.hbar[0]
    hbars = {float(s["hbar"]) for s in specs}
    if len(hbars) != 1:
        raise InputError(f"inputs disagree on hbar: {sorted(hbars)}")
    hbar = hbars.pop()
    tail_tol = DEFAULT_TAIL_TOL
    cutoff = cfg.cutoff
    try:
        if cutoff is None and all(s["kind"] == "coherent_mixture" for s in specs):
            cutoff = choose_cutoff([pt for s in specs for pt in _points(s)], hbar, tail_tol)
        elif cutoff is not None:
            d = int(specs[0].get("d", 1))
            space = FockSpace(hbar, cutoff, d)
            worst = max((coherent_tail(space, q, p) for s in specs for q, p in _points(s)), default=0.0)
            if worst > tail_tol:
                warnings.warn(f"cutoff {cutoff} leaves coherent-state tail {worst:.3e}", stacklevel=2)
                tail_tol = np.inf
        out = [density_from_spec(s, cutoff, tail_tol) for s in specs]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed density specification: {exc!r}")
    spaces = {(o[0].space.hbar, o[0].space.cutoff, o[0].space.dim_d) for o in out}
    if len(spaces) != 1:
        raise InputError(f"inputs live on different Fock spaces: {sorted(spaces)}")
    return out


def _solve(cfg: RunConfig):
    (R, _), (S, _) = load_pair(cfg)
    problem = compress_problem(R, S, R.space)
    report = solve_primal(problem, cfg.solver_options())
    return R, S, problem, report


def cmd_distance(cfg):
    _, _, _, rep = _solve(cfg)
    payload = {"mk2": rep.value, "gap": rep.gap, "iterations": rep.iterations, "converged": rep.converged, "method": rep.method}
    return payload, None, None, rep.converged


def cmd_dual(cfg):
    R, _, problem, rep = _solve(cfg)
    U, V = problem.left_basis, problem.right_basis
    payload = {
        "dual_value": rep.dual_value,
        "primal_value": rep.primal_value,
        "gap": rep.gap,
        "feasibility_margin": rep.feasibility_margin,
        "converged": rep.converged,
        # potentials on the supports, extended by zero to the Fock space
        "A": matrix_json(U @ rep.A @ U.conj().T),
        "B": matrix_json(V @ rep.B @ V.conj().T),
    }
    return payload, None, None, rep.converged


def cmd_certify(cfg):
    _, _, problem, rep = _solve(cfg)
    cert = certify(rep, problem, cfg.solver_options())
    payload = {
        "mk2": rep.value,
        "gap": cert.gap,
        "gap_ok": cert.gap_ok,
        "marginal_error": cert.marginal_error,
        "feasibility_margin": cert.feasibility_margin,
        "feasible": cert.feasible,
        "range_angle": cert.range_angle,
        "complementary_slackness": cert.complementary_slackness,
        "slack_eigenvalues": cert.slack_eigenvalues,
        "ok": cert.ok,
        "converged": rep.converged,
    }
    return payload, None, None, rep.converged


def cmd_structure(cfg):
    R, _, problem, rep = _solve(cfg)
    U, V = problem.left_basis, problem.right_basis
    sr = transport_residuals_finite_rank(rep.F, rep.A, rep.B, U, V, R.space)
    kc = kernel_criterion(problem.cost, rep.A, rep.B, rep.F)
    eh = ehrenfest_check(rep.F, rep.A, rep.B, R.space, U, V)
    rows = [
        {"identity": key, "axis": j, "residual": float(val)}
        for key in sorted(sr.residuals)
        for j, val in enumerate(sr.residuals[key])
    ]
    payload = {
        "variant": sr.variant,
        "mk2": rep.value,
        "kernel_angles": kc.angles,
        "kernel_pass": kc.passed,
        "ehrenfest_gap": eh.gap,
        "converged": rep.converged,
    }
    return payload, rows, ["identity", "axis", "residual"], rep.converged


def cmd_bipartite_sweep(cfg):
    opts = cfg.solver_options()
    rows = []
    ok = True
    for a in sorted(cfg.a):
        for b in sorted(cfg.b):
            for h in sorted(cfg.hbar or [0.5, 1.0]):
                inst = BipartiteInstance(a, b, h)
                R, S = marginals(inst)
                rep = solve_primal(PrimalProblem(cost_matrix(inst), R, S), opts)
                ok &= rep.converged
                Fs = coupling_sqrt(inst)
                po = projected_operators(inst)
                rows.append({
                    "a": a,
                    "b": b,
                    "hbar": h,
                    "mk2_oracle": mk2_value(inst),
                    "mk2_solver": rep.value,
                    "gap": rep.gap,
                    "residual_oufder_q": linear_map_residual(Fs, po.QR, po.QS, b / a),
                    "residual_oufder_p": linear_map_residual(Fs, po.PR, po.PS, b / a),
                })
    columns = ["a", "b", "hbar", "mk2_oracle", "mk2_solver", "gap", "residual_oufder_q", "residual_oufder_p"]
    return {}, rows, columns, ok


def cmd_toeplitz_check(cfg):
    (R, measure), = load_pair(cfg, need=1)
    if measure is None:
        raise InputError("toeplitz-check needs a coherent_mixture input")
    rows = []
    ok = True
    for h in sorted(cfg.hbar or [R.space.hbar]):
        n = cfg.cutoff or choose_cutoff(measure.points(), h)
        space = FockSpace(h, n, measure.dim_d)
        Rh = toeplitz_quantize(measure, space)
        rep = solve_primal(compress_problem(Rh, Rh, space), cfg.solver_options())
        ok &= rep.converged
        expected = 2 * space.dim_d * h
        rows.append({"hbar": h, "d": space.dim_d, "mk2": rep.value, "expected": expected, "delta": rep.value - expected})
    return {}, rows, ["hbar", "d", "mk2", "expected", "delta"], ok


def cmd_classical(cfg):
    (R, mu), (_, nu) = load_pair(cfg)
    if mu is None or nu is None:
        raise InputError("classical needs two coherent_mixture inputs")
    plan = solve_discrete_mk2(mu, nu)
    res = semiclassical_gap(mu, nu, space=R.space, opts=cfg.solver_options())
    payload = {
        "classical": plan.cost,
        "plan": plan.matrix,
        "quantum": res.quantum,
        "bound_slack": res.bound_slack,
        "hbar": res.hbar,
        "converged": res.converged,
    }
    return payload, None, None, res.converged


def cmd_spectrum(cfg):
    hbars = cfg.hbar or [1.0]
    n = cfg.cutoff or 8
    rows = []
    for h in sorted(hbars):
        cost = build_cost(FockSpace(h, n, cfg.dim_d))
        for block in block_spectrum(cost):
            for k, w in zip(block.labels, block.eigenvalues):
                rows.append({
                    "hbar": h,
                    "total": block.total,
                    "enclosed": int(block.enclosed),
                    "k": int(k) if block.enclosed else -1,
                    "eigenvalue": float(w),
                })
    payload = {"cutoff": n, "d": cfg.dim_d}
    return payload, rows, ["hbar", "total", "enclosed", "k", "eigenvalue"], True


HANDLERS = {
    "distance": cmd_distance,
    "dual": cmd_dual,
    "certify": cmd_certify,
    "structure": cmd_structure,
    "bipartite-sweep": cmd_bipartite_sweep,
    "toeplitz-check": cmd_toeplitz_check,
    "classical": cmd_classical,
    "spectrum": cmd_spectrum,
}


def run(cfg: RunConfig) -> int:
    digest = cfg.digest()
    try:
        payload, rows, columns, converged = HANDLERS[cfg.command](cfg)
    except InputError as exc:
        print(f"qmk: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InfeasibleProblem, TruncationError, MemoryError, ValueError) as exc:
        print(f"qmk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    text = render(payload, rows, columns, cfg, digest)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    if not converged:
        print("qmk: solver did not converge; partial report written", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except InputError as exc:
        print(f"qmk: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
