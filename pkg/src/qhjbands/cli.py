"""Command-line front end.

    qhjbands dispersion --v0 10 --c 1 --d 1 --emin 0.1 --emax 40 --samples 400
    qhjbands bands --v0 10 --c 1 --d 1 --format json
    qhjbands action --energy 3.5 --gamma 0.7 --delta 0.2 --out action.csv --plot-script
    qhjbands verify --energy 12 --gamma 0.5

Exit codes: 0 success, 1 usage or config error, 2 numeric or verification failure.
"""

from __future__ import annotations

import argparse
import cmath
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bloch, spectrum
from .action import (action_arrays, amplitude_profile, qshje_residual, qshje_residual_exact,
                     reconstruct_wavefunction)
from .errors import BandError, DomainError, ForbiddenEnergyError
from .matching import InterfaceSolution
from .model import LatticeSpec, Regime, schrodinger_residual, wavenumbers

DEFAULT_TOLERANCES = {
    "dispersion_transfer": 1e-12,
    "dispersion_action": 1e-9,
    "slope_match": 1e-9,
    "curvature_match": 1e-9,
    "phase_shift": 1e-9,
    "cos_squared": 1e-9,
    "squared_difference": 1e-12,
    "bloch_action": 1e-9,
    "mobius": 1e-8,
    "bohm_shift": 1e-9,
    "bohm_integer": 1e-9,
    "qshje_exact": 1e-7,
    "qshje_fd_order": 0.5,
    "schrodinger": 1e-6,
    "bloch_wavefunction": 1e-9,
    "continuity": 1e-10,
}

FD_FLOOR = 1e-9

CSV_HEADERS = {
    "dispersion": ("energy", "cos_ke", "allowed", "k_bloch"),
    "bands": ("band_index", "e_lower", "e_upper", "clipped_lower", "clipped_upper"),
    "action": ("x", "s0", "ds0", "r", "region"),
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    lattice: LatticeSpec
    e_min: float = 0.1
    e_max: float = 40.0
    n_samples: int = 4000
    gamma: float = 1.0
    delta: float = 0.0
    energy: float | None = None
    periods: int = 2
    output_format: str = "csv"
    output_path: str = "-"
    emit_plot_script: bool = False
    inject_error: bool = False
    tolerances: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = asdict(self)
        out["lattice"] = self.lattice.as_dict()
        return out


# -- config parsing --------------------------------------------------------

_FIELDS = {
    "v0": float, "c": float, "d": float, "emin": float, "emax": float,
    "samples": int, "gamma": float, "delta": float, "energy": float,
    "periods": int, "format": str, "out": str, "plot_script": bool,
}


def _coerce(key, raw):
    kind = _FIELDS[key]
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        if raw.strip().lower() in ("1", "true", "yes", "on"):
            return True
        if raw.strip().lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def read_config_file(path: str) -> dict:
    values, tolerances = {}, {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path!r}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("tol."):
            name = key[4:]
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"config line {lineno}: unknown tolerance {name!r}")
            tolerances[name] = _coerce("emin", raw)
        elif key in _FIELDS:
            values[key] = _coerce(key, raw)
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
    return {"values": values, "tolerances": tolerances}


def build_config(args: argparse.Namespace) -> RunConfig:
    merged = {"v0": 10.0, "c": 1.0, "d": 1.0, "emin": 0.1, "emax": 40.0,
              "samples": 4000, "gamma": 1.0, "delta": 0.0, "energy": None,
              "periods": 2, "format": "csv", "out": "-", "plot_script": False}
    tolerances = {}
    if args.config:
        loaded = read_config_file(args.config)
        merged.update(loaded["values"])
        tolerances.update(loaded["tolerances"])
    for key in _FIELDS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value

    for key in ("v0", "c", "d", "emin", "emax", "gamma", "delta"):
        if not math.isfinite(merged[key]):
            raise ConfigError(f"{key}: must be finite")
    if merged["v0"] < 0:
        raise ConfigError("v0: must be >= 0")
    for key in ("c", "d"):
        if merged[key] <= 0:
            raise ConfigError(f"{key}: must be > 0")
    if merged["emin"] <= 0:
        raise ConfigError("emin: must be > 0")
    if merged["emin"] >= merged["emax"]:
        raise ConfigError("emax: must exceed emin")
    if merged["samples"] < 2:
        raise ConfigError("samples: must be >= 2")
    if not -1.0 <= merged["gamma"] <= 1.0:
        raise ConfigError("gamma: must lie in [-1, 1]")
    if merged["energy"] is not None and not (merged["energy"] > 0 and math.isfinite(merged["energy"])):
        raise ConfigError("energy: must be > 0")
    if merged["periods"] < 1:
        raise ConfigError("periods: must be >= 1")
    if merged["format"] not in ("csv", "json"):
        raise ConfigError("format: must be csv or json")
    if merged["plot_script"] and merged["out"] == "-":
        raise ConfigError("plot_script: requires --out PATH")
    return RunConfig(
        lattice=LatticeSpec(merged["v0"], merged["c"], merged["d"]),
        e_min=merged["emin"], e_max=merged["emax"], n_samples=merged["samples"],
        gamma=merged["gamma"], delta=merged["delta"], energy=merged["energy"],
        periods=merged["periods"], output_format=merged["format"],
        output_path=merged["out"], emit_plot_script=merged["plot_script"],
        inject_error=bool(getattr(args, "inject_error", False)), tolerances=tolerances)


# -- formatting ------------------------------------------------------------

def fmt(value) -> str:
    """Locale-independent cell text; floats carry 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value) + 0.0, ".17g")
    return str(value)


def render_csv(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def emit(cfg: RunConfig, kind: str, rows, extra: dict | None = None) -> str:
    header = CSV_HEADERS[kind]
    if cfg.output_format == "json":
        records = [dict(zip(header, row)) for row in rows]
        key = {"dispersion": "points", "bands": "bands", "action": "rows"}[kind]
        doc = {"config": cfg.echo(), "lattice": cfg.lattice.as_dict()}
        if extra:
            doc["meta"] = extra
        doc[key] = records
        text = json.dumps(_json_ready(doc), indent=2, sort_keys=False, allow_nan=False) + "\n"
    else:
        comments = [f"{k}={fmt(v)}" for k, v in (extra or {}).items()]
        text = render_csv(header, rows, comments)
    if cfg.output_path == "-":
        sys.stdout.write(text)
    else:
        Path(cfg.output_path).write_text(text)
        if cfg.emit_plot_script:
            write_plot_script(cfg, kind)
    return text


def write_plot_script(cfg: RunConfig, kind: str) -> Path:
    """Gnuplot script next to the data file; nothing is plotted here."""
    data = Path(cfg.output_path)
    script = data.with_suffix(data.suffix + ".gp")
    columns = {"dispersion": ("1:2", "E", "cos(Ke)"),
               "bands": ("2:1:3:1", "E", "band index"),
               "action": ("1:2", "x", "S0")}[kind]
    style = "xerrorbars" if kind == "bands" else "lines"
    if kind == "bands":
        using = "(($2+$3)/2):1:2:3"
    else:
        using = columns[0]
    fmt_line = "json" if cfg.output_format == "json" else "csv"
    lines = [
        f"# plot script for {data.name} ({fmt_line})",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        f"set xlabel '{columns[1]}'",
        f"set ylabel '{columns[2]}'",
        f"set output '{data.stem}.png'",
        "set terminal pngcairo size 900,600",
        f"plot '{data.name}' every ::1 using {using} with {style} notitle",
    ]
    script.write_text("\n".join(lines) + "\n")
    return script


# -- commands --------------------------------------------------------------

def dispersion_rows(cfg: RunConfig):
    rows = []
    for e in np.linspace(cfg.e_min, cfg.e_max, cfg.n_samples):
        point = spectrum.bloch_wavenumber(float(e), cfg.lattice)
        rows.append((point.energy, point.cos_ke, point.allowed, point.k_bloch))
    return rows


def cmd_dispersion(cfg: RunConfig) -> int:
    emit(cfg, "dispersion", dispersion_rows(cfg))
    return 0


def band_rows(cfg: RunConfig):
    bands = spectrum.find_bands(cfg.lattice, cfg.e_min, cfg.e_max, cfg.n_samples)
    return [(b.index, b.e_lo, b.e_hi, b.clipped_lo, b.clipped_hi) for b in bands]


def cmd_bands(cfg: RunConfig) -> int:
    emit(cfg, "bands", band_rows(cfg))
    return 0


def _superposition(cfg: RunConfig) -> bloch.SuperpositionParams:
    return bloch.SuperpositionParams.from_gamma_delta(cfg.gamma, cfg.delta)


def _require_energy(cfg: RunConfig) -> float:
    if cfg.energy is None:
        raise ConfigError("energy: --energy is required for this command")
    return cfg.energy


def build_action(cfg: RunConfig, sp=None) -> bloch.BlochAction:
    energy = _require_energy(cfg)
    sp = sp or _superposition(cfg)
    cells = (-1, max(cfg.periods, 1))
    ba = bloch.construct_bloch_action(energy, cfg.lattice, sp, cells=cells)
    if cfg.inject_error:
        # negative control: spoil the solved constant
        ba = bloch.BlochAction(energy, cfg.lattice, sp, ba.ke, ba.mu1, ba.nu1 + 0.1, cells)
    return ba


def action_rows(cfg: RunConfig, ba: bloch.BlochAction):
    e = cfg.lattice.period
    xs = np.linspace(0.0, cfg.periods * e, cfg.n_samples)
    rows = []
    for x in xs:
        s = ba.sample(float(x))
        rows.append((s.x, s.s0, s.ds0, s.r, ba.segment_at(float(x)).region.value))
    return rows


def cmd_action(cfg: RunConfig) -> int:
    ba = build_action(cfg)
    meta = {"mu1": ba.mu1, "nu1": ba.nu1, "gamma": ba.sp.gamma, "delta": ba.sp.delta,
            "k_bloch": ba.k_bloch, "n": ba.n, "energy": ba.energy}
    emit(cfg, "action", action_rows(cfg, ba), meta)
    return 0


@dataclass
class Check:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<22} {self.residual:.3e} {self.tolerance:.1e} {status}"


def _cell_segments(ba, lat):
    """Segments of the reference cell [-d, c + d], each with an inset grid helper."""
    for seg in ba.segments:
        if seg.hi <= -lat.d or seg.lo >= lat.c + lat.d:
            continue
        yield seg


def _inset_grid(seg, h):
    lo = seg.lo + 0.02 * (seg.hi - seg.lo)
    return lo + h * np.arange(int(0.96 * (seg.hi - seg.lo) / h))


def _wave_residual(ba, energy, lat, h):
    """Stencil residual of the rebuilt wavefunction, relative to its peak modulus."""
    worst, peak = 0.0, 0.0
    alpha, beta = ba.sp.alpha, ba.sp.beta
    for seg in _cell_segments(ba, lat):
        grid = _inset_grid(seg, h)
        s0, ds0, _, _ = action_arrays(grid, seg.basis, seg.constants)
        phi = np.abs(ds0) ** -0.5 * (alpha * np.exp(1j * s0) + beta * np.exp(-1j * s0))
        peak = max(peak, float(np.max(np.abs(phi))))
        worst = max(worst, schrodinger_residual(phi.real, energy, lat, grid),
                    schrodinger_residual(phi.imag, energy, lat, grid))
    return worst / peak


def _qshje_checks(ba, energy, lat):
    exact, fd = 0.0, []
    for h in (1e-3, 5e-4):
        worst = 0.0
        for seg in _cell_segments(ba, lat):
            grid = _inset_grid(seg, h)
            worst = max(worst, qshje_residual(grid, amplitude_profile(grid, seg.basis, seg.constants),
                                              energy, lat))
            if h == 1e-3:
                exact = max(exact, qshje_residual_exact(grid, seg.basis, seg.constants, energy, lat))
        fd.append(worst)
    if fd[0] < FD_FLOOR:
        # differencing error already at rounding level; no order to measure
        return exact, 0.0
    return exact, abs(fd[0] / fd[1] - 4.0)


def verification_checks(cfg: RunConfig) -> list[Check]:
    lat = cfg.lattice
    energy = _require_energy(cfg)
    tol = dict(DEFAULT_TOLERANCES, **cfg.tolerances)
    sp = _superposition(cfg)
    f = spectrum.dispersion_rhs(energy, lat)
    checks = [
        Check("dispersion_transfer",
              abs(f - spectrum.transfer_matrix_oracle(energy, lat)[1]) / max(1.0, abs(f)),
              tol["dispersion_transfer"]),
        Check("dispersion_action", abs(f - bloch.dispersion_via_action(energy, lat, sp)),
              tol["dispersion_action"]),
    ]
    ba = build_action(cfg, sp)
    wn = wavenumbers(energy, lat)
    gamma, ke = sp.gamma, ba.ke

    if wn.regime is not Regime.THRESHOLD:
        iq = bloch.interface_quantities(ba.mu1, ba.nu1, wn, lat)
        checks.append(Check("slope_match", abs(bloch.slope_match_residual(iq, gamma, wn, lat)), tol["slope_match"]))
        checks.append(Check("curvature_match", abs(bloch.curvature_match_residual(iq, ba.mu1, gamma, wn, lat)),
                            tol["curvature_match"]))
        if abs(math.cos(ke)) > 1e-6:
            checks.append(Check("phase_shift", abs(bloch.phase_shift_residual(iq, gamma, ke)), tol["phase_shift"]))
        checks.append(Check("cos_squared", abs(bloch.cos_squared_residual(iq, gamma, ke)), tol["cos_squared"]))
        lhs, rhs = bloch.squared_difference_identity(iq.a_val, iq.b_val, gamma)
        checks.append(Check("squared_difference", abs(lhs - rhs) / max(1.0, abs(lhs)), tol["squared_difference"]))

    xs = np.linspace(-lat.d, lat.c, 20)
    mp = bloch.mobius_coefficients(sp, ke)
    d_bloch, d_mob, d5 = 0.0, 0.0, 0.0
    phis = []
    for x in xs:
        a, b = ba.sample(float(x)), ba.sample(float(x) + lat.period)
        d_bloch = max(d_bloch, bloch.bloch_defect(a.s0, b.s0, sp, ke)[0])
        d_mob = max(d_mob, abs(cmath.exp(2j * b.s0) - bloch.apply_mobius(mp, cmath.exp(2j * a.s0))))
        pa, pb = reconstruct_wavefunction(a.x, a, sp), reconstruct_wavefunction(b.x, b, sp)
        phis.append(abs(pa))
        d5 = max(d5, abs(pb - cmath.exp(1j * ke) * pa))
    checks.append(Check("bloch_action", d_bloch, tol["bloch_action"]))
    checks.append(Check("mobius", d_mob, tol["mobius"]))
    checks.append(Check("bloch_wavefunction", d5 / max(phis), tol["bloch_wavefunction"]))

    bohm = build_action(cfg, bloch.SuperpositionParams.bohm())
    d_bohm, d_int = 0.0, 0.0
    for x in xs:
        a, b = bohm.sample(float(x)), bohm.sample(float(x) + lat.period)
        defect, n_prime, shift = bloch.bohm_defect(a.s0, b.s0, bohm.ke)
        d_bohm = max(d_bohm, defect)
        d_int = max(d_int, abs(shift - n_prime))
    checks.append(Check("bohm_shift", d_bohm, tol["bohm_shift"]))
    checks.append(Check("bohm_integer", d_int, tol["bohm_integer"]))

    exact, order_gap = _qshje_checks(ba, energy, lat)
    checks.append(Check("qshje_exact", exact, tol["qshje_exact"]))
    checks.append(Check("qshje_fd_order", order_gap, tol["qshje_fd_order"]))
    # the 3-point stencil itself is off by about h^2 kmax^4 / 12 (relative)
    h = 1e-4
    kmax4 = max(energy, abs(energy - lat.v0)) ** 2
    wave_tol = tol["schrodinger"] if "schrodinger" in cfg.tolerances else \
        max(tol["schrodinger"], 2.0 * h * h * kmax4 / 12.0)
    checks.append(Check("schrodinger", _wave_residual(ba, energy, lat, h), wave_tol))

    worst = 0.0
    segs = ba.segments
    for left, right in zip(segs, segs[1:]):
        sol = InterfaceSolution(left.constants, right.constants, right.lo, left.basis, right.basis)
        worst = max(worst, *sol.residuals())
    checks.append(Check("continuity", worst, tol["continuity"]))
    return checks


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    checks = verification_checks(cfg)
    for check in checks:
        out.write(check.line() + "\n")
    return 0 if all(c.passed for c in checks) else 2


# -- entry point -----------------------------------------------------------

COMMANDS = {"dispersion": cmd_dispersion, "bands": cmd_bands,
            "action": cmd_action, "verify": cmd_verify}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qhjbands", description="Kronig-Penney bands from the reduced action")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--v0", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--d", type=float)
        p.add_argument("--emin", type=float)
        p.add_argument("--emax", type=float)
        p.add_argument("--samples", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--energy", type=float)
        p.add_argument("--periods", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out")
        p.add_argument("--plot-script", dest="plot_script", action="store_true")
        p.add_argument("--config")
        p.add_argument("--inject-error", dest="inject_error", action="store_true",
                       help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command in ("action", "verify"):
            _require_energy(cfg)
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    try:
        return COMMANDS[args.command](cfg)
    except ForbiddenEnergyError as exc:
        sys.stderr.write(f"ForbiddenEnergy: {exc}\n")
        return 2
    except BandError as exc:
        sys.stderr.write(f"numeric failure: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
