"""Command-line front end.

Exit codes: 0 verified, 2 verification or computation failure, 1 usage or
configuration error. Values are resolved as CLI flags over config file over
defaults, and the resolved config is echoed in every report.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .algebra import AlgebraError, SpectrumError
from .expr import ParseError
from .massprofile import MassProfileError
from .mapping import build_mapping
from .pipeline import FAMILIES, ConfigError, RunConfig, build_state, epsilon_values, make_setup, \
    potential_for, residual_check, selected_indices, spectrum_report, verify

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _mass_param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file mirroring the flags")
    p.add_argument("--family", choices=FAMILIES, default=S)
    for name in ("ell", "b", "q", "j", "alpha", "beta", "lambda0", "lambda1", "lambda2", "r0",
                 "xmin", "xmax", "energy", "debug_shift", "tol_root", "tol_residual", "tol_match"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--residual-refine", dest="residual_refine", type=int, default=S,
                   help="largest grid refinement tried by the residual check")
    p.add_argument("--residual-order", dest="residual_order", type=int, choices=(4, 6), default=S,
                   help="accuracy order of the residual stencils")
    p.add_argument("--mass", default=S, help="expression in x, or a built-in name")
    p.add_argument("--mass-param", dest="mass_param", type=_mass_param, action="append", default=S,
                   help="name=value, repeatable")
    p.add_argument("--epsilon-index", dest="epsilon_index", type=int, default=S)
    p.add_argument("--printed-formulas", dest="printed_formulas", action="store_true", default=S,
                   help="use the Coulomb energy and Morse coefficient exactly as printed")
    p.add_argument("--out", default=S)
    p.add_argument("--format", choices=("csv", "json"), default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qespdm", description="QES potentials with position-dependent mass")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("spectrum", "algebraic epsilon roots and energies"),
        ("potential", "V(x) for one algebraic state"),
        ("wavefunction", "psi(x) for the selected states"),
        ("verify", "residual and eigensolver checks for every state"),
        ("residual", "residual of the expanded equation for the selected states"),
    ):
        _common(sub.add_parser(name, help=help_))
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _mass_dict(entries) -> dict:
    out = {}
    for item in entries:
        name, value = _mass_param(item) if isinstance(item, str) else item
        out[name] = value
    return out


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values = RunConfig().to_dict()
    cli = {k: v for k, v in vars(ns).items() if k != "command"}
    layers = []
    if "config" in cli:
        layers.append(_load_config(cli.pop("config")))
    layers.append(cli)
    for layer in layers:
        layer = dict(layer)
        if "mass_param" in layer:
            values["mass_params"] = {**values["mass_params"], **_mass_dict(layer.pop("mass_param"))}
        if "mass_params" in layer:
            extra = layer.pop("mass_params")
            if not isinstance(extra, dict):
                raise UsageError("mass_params must be an object")
            values["mass_params"] = {**values["mass_params"], **extra}
        values.update(layer)
    try:
        return RunConfig.from_dict(values).resolved()
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None


# --- formatting ----------------------------------------------------------------

def fmt(v) -> str:
    return format(float(v), ".17g")


def to_csv(header: list[str], columns: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit_table(cfg: RunConfig, header, columns, meta: dict) -> None:
    """CSV goes to --out (metadata beside it in <out>.meta.json) or stdout."""
    if cfg.format == "json":
        body = dict(meta)
        body["columns"] = {h: list(c) for h, c in zip(header, columns)}
        _write(to_json(body), cfg.out)
        return
    _write(to_csv(header, columns), cfg.out)
    if cfg.out is not None:
        _write(to_json(meta), cfg.out + ".meta.json")


# --- commands --------------------------------------------------------------------

def _base(cfg: RunConfig, setup, command: str) -> dict:
    return {"command": command, "config": cfg.to_dict(), "setup": setup.describe()}


def cmd_spectrum(cfg: RunConfig) -> int:
    setup = make_setup(cfg)
    rep = _base(setup.cfg, setup, "spectrum")
    rep.update(spectrum_report(setup))
    _write(to_json(rep), setup.cfg.out)
    return EXIT_OK if rep["roots_ok"] else EXIT_FAIL


def _gated_states(setup, indices):
    """Algebraic states whose residual passes; the first failure aborts."""
    eps, _ = epsilon_values(setup.params)
    states = []
    for k in selected_indices(setup, len(eps)) if indices is None else indices:
        res = residual_check(setup, k, eps[k])
        if not res["passed"]:
            return None, {"index": k, "epsilon": eps[k], "residual": res}
        states.append((build_state(setup, k, eps[k]), res))
    return states, None


def _fail(setup, command, detail) -> int:
    rep = _base(setup.cfg, setup, command)
    rep["failure"] = detail
    sys.stderr.write(to_json(rep))
    return EXIT_FAIL


def cmd_potential(cfg: RunConfig) -> int:
    setup = make_setup(cfg)
    eps, _ = epsilon_values(setup.params)
    k = setup.cfg.epsilon_index or 0
    if not 0 <= k < len(eps):
        raise UsageError(f"epsilon index {k} out of range 0..{len(eps) - 1}")
    states, failure = _gated_states(setup, [k])
    if failure:
        return _fail(setup, "potential", failure)
    st, res = states[0]
    # V is defined on the whole user grid; singular points are listed, not dropped silently
    sample = build_mapping(setup.fam, setup.profile, setup.grid, setup.anchor)
    V = potential_for(setup, sample, st.epsilon, st.energy)
    keep = V.valid
    meta = _base(setup.cfg, setup, "potential")
    meta["state"] = {"index": k, "epsilon": st.epsilon, "E": st.energy, "residual": res}
    meta["excluded"] = {"indices": V.excluded, "x": V.x[V.excluded]}
    _emit_table(setup.cfg, ["x", "V"], [V.x[keep], V.V[keep]], meta)
    return EXIT_OK


def cmd_wavefunction(cfg: RunConfig) -> int:
    setup = make_setup(cfg)
    states, failure = _gated_states(setup, None)
    if failure:
        return _fail(setup, "wavefunction", failure)
    header, columns = ["x"], [setup.state_grid.x]
    single = setup.cfg.epsilon_index is not None
    info = []
    for st, res in states:
        tag = "" if single else f"_{st.index}"
        header += ["psi_raw" + tag, "psi_normalized" + tag]
        columns += [st.psi.raw, st.psi.normalized]
        info.append({"index": st.index, "epsilon": st.epsilon, "E": st.energy,
                     "normalizable": st.psi.normalizable, "tail_ratio": st.psi.tail_ratio,
                     "nodes": st.nodes, "prefactor_sign": st.psi.prefactor_sign,
                     "R_coefficients": st.psi.coeffs, "residual": res})
    meta = _base(setup.cfg, setup, "wavefunction")
    meta["states"] = info
    meta["excluded"] = {"x": setup.boundary_excluded}
    _emit_table(setup.cfg, header, columns, meta)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    setup = make_setup(cfg)
    rep = _base(setup.cfg, setup, "verify")
    rep.update(verify(setup))
    _write(to_json(rep), setup.cfg.out)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_residual(cfg: RunConfig) -> int:
    setup = make_setup(cfg)
    eps, _ = epsilon_values(setup.params)
    rows = [dict(index=k, epsilon=eps[k], **residual_check(setup, k, eps[k]))
            for k in selected_indices(setup, len(eps))]
    rep = _base(setup.cfg, setup, "residual")
    rep["states"] = rows
    rep["passed"] = all(r["passed"] for r in rows)
    _write(to_json(rep), setup.cfg.out)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


COMMANDS = {
    "spectrum": cmd_spectrum,
    "potential": cmd_potential,
    "wavefunction": cmd_wavefunction,
    "verify": cmd_verify,
    "residual": cmd_residual,
}

# raised while reading the configuration: the user has to change something
_USAGE_ERRORS = (UsageError, ConfigError, ParseError, MassProfileError)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except _USAGE_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except SpectrumError as exc:
        sys.stderr.write(f"spectrum failure: {exc}\n")
        return EXIT_FAIL
    except AlgebraError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        sys.stderr.write(f"failure: {exc}\n")
        return EXIT_FAIL
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
