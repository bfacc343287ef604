"""
Scenario Service
Parses run configuration text into validated scenarios and evaluates the
time-dependent coefficient functions omega(t) and lambda(t).
"""
import csv
import logging
import re
from pathlib import Path
from typing import Optional, List, Tuple, Any, Dict, Union

import numpy as np
from pydantic import ValidationError

from app.exceptions import ScenarioSyntaxError, ScenarioValidationError, CoefficientRangeError
from app.models import CoefficientKind, AlphaInit
from app.schemas import Scenario, CoefficientSpec, Tolerances

logger = logging.getLogger(__name__)

_FUNCTION = re.compile(r"^([A-Za-z_]\w*)\s*\((.*)\)$", re.DOTALL)
_KEY = re.compile(r"^[A-Za-z_]\w*$")

# config key -> Scenario field
_SCALAR_KEYS = {
    "m": "m",
    "hbar": "hbar",
    "steps": "n_steps",
    "grid_L": "grid_L",
    "grid_N": "grid_N",
    "fock_dim": "fock_dim",
    "sigma0": "sigma0",
    "sigma_dot0": "sigma_dot0",
    "alpha0": "alpha0",
    "alpha_dot0": "alpha_dot0",
    "dt": "dt",
    "dt_fd": "dt_fd",
    "stencil": "stencil",
    "interior": "interior",
    "check_points": "check_points",
}
_INTEGER_KEYS = {"steps", "grid_N", "fock_dim", "stencil", "interior", "check_points"}
_FUNCTION_ARITY = {
    CoefficientKind.CONST: 1,
    CoefficientKind.LINEAR: 1,
    CoefficientKind.SIN_MOD: 3,
}

Value = Union[float, str, List[float], Tuple[str, List[Any]]]


class ScenarioService:
    """Config grammar, validation and coefficient evaluation"""

    # Parsing

    @staticmethod
    def _split_entries(text: str) -> List[Tuple[str, int, int]]:
        """Split text into (entry, line, column), honouring comments and brackets"""
        entries = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0]
            depth = 0
            start = 0
            for col, char in enumerate(line):
                if char in "([":
                    depth += 1
                elif char in ")]":
                    depth -= 1
                    if depth < 0:
                        raise ScenarioSyntaxError(f"unbalanced '{char}'", line_no, col + 1)
                elif char == "," and depth == 0:
                    entries.append((line[start:col], line_no, start + 1))
                    start = col + 1
            if depth != 0:
                raise ScenarioSyntaxError("unclosed bracket", line_no, len(line) + 1)
            entries.append((line[start:], line_no, start + 1))
        return [(e, ln, col + len(e) - len(e.lstrip())) for e, ln, col in entries if e.strip()]

    @staticmethod
    def _parse_number(token: str, line: int, column: int) -> float:
        try:
            return float(token)
        except ValueError:
            raise ScenarioSyntaxError(f"expected a number, got {token!r}", line, column)

    @staticmethod
    def _parse_value(token: str, line: int, column: int) -> Value:
        token = token.strip()
        if not token:
            raise ScenarioSyntaxError("missing value", line, column)
        if token.startswith("["):
            if not token.endswith("]"):
                raise ScenarioSyntaxError("list must end with ']'", line, column)
            inner = token[1:-1].strip()
            if not inner:
                return []
            return [ScenarioService._parse_number(part.strip(), line, column) for part in inner.split(",")]
        match = _FUNCTION.match(token)
        if match:
            name, args = match.group(1), match.group(2).strip()
            return (name, [a.strip() for a in args.split(",")] if args else [])
        try:
            return float(token)
        except ValueError:
            if _KEY.match(token):
                return token
            raise ScenarioSyntaxError(f"cannot read value {token!r}", line, column)

    @staticmethod
    def _read_table(path: Path) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        """Read a two-column t,value CSV; non-numeric rows (headers) are skipped"""
        times, values = [], []
        with open(path, newline="") as handle:
            for row in csv.reader(handle):
                if len(row) < 2:
                    continue
                try:
                    t, v = float(row[0]), float(row[1])
                except ValueError:
                    continue
                times.append(t)
                values.append(v)
        return tuple(times), tuple(values)

    @staticmethod
    def _coefficient(value: Value, key: str, line: int, column: int,
                     base_dir: Optional[Path]) -> Dict[str, Any]:
        if not isinstance(value, tuple):
            raise ScenarioSyntaxError(f"{key} expects a function literal such as const(1.0)", line, column)
        name, args = value
        try:
            kind = CoefficientKind(name)
        except ValueError:
            raise ScenarioSyntaxError(f"unknown function {name!r}", line, column)
        if kind == CoefficientKind.TABLE:
            if len(args) != 1 or not args[0]:
                raise ScenarioSyntaxError("table takes one path argument", line, column)
            path = Path(args[0].strip("'\""))
            resolved = (path if path.is_absolute() or base_dir is None else base_dir / path).resolve()
            try:
                table_t, table_v = ScenarioService._read_table(resolved)
            except OSError as exc:
                raise ScenarioValidationError(f"{key} table cannot be read: {exc}")
            return {"kind": kind, "path": str(resolved), "table_t": table_t, "table_v": table_v}
        if len(args) != _FUNCTION_ARITY[kind]:
            raise ScenarioSyntaxError(
                f"{name} takes {_FUNCTION_ARITY[kind]} argument(s), got {len(args)}", line, column
            )
        return {"kind": kind, "params": tuple(ScenarioService._parse_number(a, line, column) for a in args)}

    @staticmethod
    def parse_scenario(config_text: str, base_dir: Optional[Union[str, Path]] = None,
                       flip_lambda: bool = False) -> Scenario:
        """Parse config text and return a validated scenario"""
        base = Path(base_dir) if base_dir is not None else None
        fields: Dict[str, Any] = {}
        tolerances: Dict[str, float] = {}
        seen = set()

        for entry, line, column in ScenarioService._split_entries(config_text):
            if "=" not in entry:
                raise ScenarioSyntaxError("expected 'key = value'", line, column)
            key, raw = entry.split("=", 1)
            key = key.strip()
            if not _KEY.match(key):
                raise ScenarioSyntaxError(f"invalid key {key!r}", line, column)
            if key in seen:
                raise ScenarioSyntaxError(f"duplicate key {key!r}", line, column)
            seen.add(key)
            value = ScenarioService._parse_value(raw, line, column + len(key) + 1)

            if key in ("omega", "lambda"):
                fields[f"{key}_spec"] = ScenarioService._coefficient(value, key, line, column, base)
            elif key == "t":
                if not isinstance(value, list) or len(value) != 2:
                    raise ScenarioSyntaxError("t expects [t0, t1]", line, column)
                fields["t0"], fields["t1"] = value
            elif key == "n":
                modes = value if isinstance(value, list) else [value]
                if not all(isinstance(v, float) and v.is_integer() for v in modes):
                    raise ScenarioSyntaxError("n expects non-negative integers", line, column)
                fields["quantum_n"] = tuple(int(v) for v in modes)
            elif key == "save_t":
                if not isinstance(value, list):
                    raise ScenarioSyntaxError("save_t expects a list of times", line, column)
                fields["save_t"] = tuple(value)
            elif key == "alpha_init":
                try:
                    fields["alpha_init"] = AlphaInit(value)
                except ValueError:
                    raise ScenarioSyntaxError("alpha_init is 'zero' or 'particular'", line, column)
            elif key == "flip_lambda":
                if value not in ("true", "false"):
                    raise ScenarioSyntaxError("flip_lambda is 'true' or 'false'", line, column)
                fields["flip_lambda"] = value == "true"
            elif key.startswith("tol_"):
                check = key[4:]
                if check not in Tolerances.model_fields:
                    raise ScenarioSyntaxError(f"unknown tolerance {key!r}", line, column)
                if not isinstance(value, float):
                    raise ScenarioSyntaxError(f"{key} expects a number", line, column)
                tolerances[check] = value
            elif key in _SCALAR_KEYS:
                if not isinstance(value, float):
                    raise ScenarioSyntaxError(f"{key} expects a number", line, column)
                if key in _INTEGER_KEYS:
                    if not value.is_integer():
                        raise ScenarioSyntaxError(f"{key} expects an integer", line, column)
                    value = int(value)
                fields[_SCALAR_KEYS[key]] = value
            else:
                raise ScenarioSyntaxError(f"unknown key {key!r}", line, column)

        for required in ("omega_spec", "lambda_spec"):
            if required not in fields:
                raise ScenarioValidationError(f"{required.split('_')[0]} is required")
        if tolerances:
            fields["tolerances"] = tolerances
        if flip_lambda:
            fields["flip_lambda"] = True
        return ScenarioService.build_scenario(**fields)

    @staticmethod
    def build_scenario(**fields) -> Scenario:
        """Construct a scenario and check every invariant, including the mesh-level ones"""
        try:
            scenario = Scenario(**fields)
        except ValidationError as exc:
            first = exc.errors()[0]
            message = str(first["msg"]).removeprefix("Value error, ")
            raise ScenarioValidationError(message)
        ScenarioService.validate_scenario(scenario)
        return scenario

    @staticmethod
    def validate_scenario(s: Scenario) -> None:
        """Check coefficient invariants on the time mesh"""
        mesh = ScenarioService.time_mesh(s)
        try:
            omega = ScenarioService.eval_omega(s, mesh)
            lam = ScenarioService.eval_lambda(s, mesh)
        except CoefficientRangeError as exc:
            raise ScenarioValidationError(str(exc))
        if not np.all(np.isfinite(omega)) or not np.all(np.isfinite(lam)):
            raise ScenarioValidationError("coefficients must be finite on the mesh")
        if np.any(omega <= 0):
            bad = int(np.argmax(omega <= 0))
            raise ScenarioValidationError(
                f"omega must be positive (omega={omega[bad]!r} at t={mesh[bad]!r})"
            )
        if s.save_t is not None:
            for t in s.save_t:
                if not s.t0 <= t <= s.t1:
                    raise ScenarioValidationError(f"save_t entry {t!r} lies outside [t0, t1]")
        logger.debug("validated scenario on %d mesh points", mesh.shape[0])

    # Coefficients

    @staticmethod
    def time_mesh(s: Scenario) -> np.ndarray:
        return np.linspace(s.t0, s.t1, s.n_steps + 1)

    @staticmethod
    def eval_coefficient(spec: CoefficientSpec, t):
        """Evaluate a coefficient spec at a time or an array of times"""
        tt = np.asarray(t, dtype=float)
        if spec.kind == CoefficientKind.CONST:
            out = np.full_like(tt, spec.params[0])
        elif spec.kind == CoefficientKind.LINEAR:
            out = spec.params[0] * tt
        elif spec.kind == CoefficientKind.SIN_MOD:
            w0, eps, nu = spec.params
            out = w0 * (1.0 + eps * np.sin(nu * tt))
        else:
            lo, hi = spec.table_t[0], spec.table_t[-1]
            if np.any(tt < lo) or np.any(tt > hi):
                raise CoefficientRangeError(f"table {spec.path} covers [{lo!r}, {hi!r}] only")
            out = np.interp(tt, spec.table_t, spec.table_v)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def eval_coefficient_rate(spec: CoefficientSpec, t):
        """Time derivative of a coefficient spec; tables use the slope of the enclosing segment"""
        tt = np.asarray(t, dtype=float)
        if spec.kind == CoefficientKind.CONST:
            out = np.zeros_like(tt)
        elif spec.kind == CoefficientKind.LINEAR:
            out = np.full_like(tt, spec.params[0])
        elif spec.kind == CoefficientKind.SIN_MOD:
            w0, eps, nu = spec.params
            out = w0 * eps * nu * np.cos(nu * tt)
        else:
            knots = np.asarray(spec.table_t)
            slopes = np.diff(spec.table_v) / np.diff(knots)
            segment = np.clip(np.searchsorted(knots, tt, side="right") - 1, 0, slopes.shape[0] - 1)
            out = slopes[segment]
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def eval_omega(s: Scenario, t):
        return ScenarioService.eval_coefficient(s.omega_spec, t)

    @staticmethod
    def eval_lambda(s: Scenario, t):
        return ScenarioService.eval_coefficient(s.lambda_spec, t)

    @staticmethod
    def hamiltonian_lambda(s: Scenario, t):
        """Coupling seen by the Hamiltonian; sign-flipped for mutation runs"""
        lam = ScenarioService.eval_lambda(s, t)
        return -lam if s.flip_lambda else lam

    @staticmethod
    def lambda_vanishes(s: Scenario) -> bool:
        return bool(np.all(ScenarioService.eval_lambda(s, ScenarioService.time_mesh(s)) == 0.0))

    # Serialization

    @staticmethod
    def _format_spec(spec: CoefficientSpec) -> str:
        if spec.kind == CoefficientKind.TABLE:
            return f"table({spec.path})"
        return f"{spec.kind.value}({', '.join(repr(p) for p in spec.params)})"

    @staticmethod
    def serialize_scenario(s: Scenario) -> str:
        """Render a scenario as config text that parses back to the same scenario"""
        lines = [
            f"m = {s.m!r}",
            f"hbar = {s.hbar!r}",
            f"omega = {ScenarioService._format_spec(s.omega_spec)}",
            f"lambda = {ScenarioService._format_spec(s.lambda_spec)}",
            f"t = [{s.t0!r}, {s.t1!r}]",
            f"steps = {s.n_steps}",
            f"n = [{', '.join(str(n) for n in s.quantum_n)}]",
            f"grid_L = {s.grid_L!r}",
            f"grid_N = {s.grid_N}",
            f"fock_dim = {s.fock_dim}",
            f"sigma_dot0 = {s.sigma_dot0!r}",
            f"alpha_init = {s.alpha_init.value}",
            f"stencil = {s.stencil}",
            f"check_points = {s.check_points}",
        ]
        for key in ("sigma0", "alpha0", "alpha_dot0", "dt", "dt_fd", "interior"):
            value = getattr(s, key)
            if value is not None:
                lines.append(f"{key} = {value!r}")
        if s.save_t is not None:
            lines.append(f"save_t = [{', '.join(repr(t) for t in s.save_t)}]")
        if s.flip_lambda:
            lines.append("flip_lambda = true")
        defaults = Tolerances()
        for name, value in s.tolerances.model_dump().items():
            if value != getattr(defaults, name):
                lines.append(f"tol_{name} = {value!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def load_scenario(config_path: Union[str, Path], flip_lambda: bool = False) -> Scenario:
        """Read and parse a config file; table paths resolve against its directory"""
        path = Path(config_path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioValidationError(f"cannot read config {path}: {exc}")
        logger.info("loading scenario from %s", path)
        return ScenarioService.parse_scenario(text, base_dir=path.parent, flip_lambda=flip_lambda)
