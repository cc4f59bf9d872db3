"""Plain-text formats: result CSV series and the TOML model description."""
from __future__ import annotations

import csv
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actuator_sim import ActuatorParams
from .allocator import AircraftModel
from .polytope import BoxLimits


class ModelFileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CSV series
# ---------------------------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_series(path: str | os.PathLike, header: Sequence[str], columns: Sequence) -> None:
    """Write equal-length columns; floats use the shortest round-trip repr."""
    cols = [np.asarray(c).ravel() for c in columns]
    if len(cols) != len(header):
        raise ValueError(f"{len(header)} header names for {len(cols)} columns")
    n = {c.size for c in cols}
    if len(n) > 1:
        raise ValueError(f"columns have differing lengths {sorted(n)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_cell(x) for x in row])


def read_series(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


# ---------------------------------------------------------------------------
# model file
# ---------------------------------------------------------------------------


def _vec(table: dict, key: str, where: str, n: Optional[int] = None) -> np.ndarray:
    if key not in table:
        raise ModelFileError(f"{where}: missing key '{key}'")
    try:
        v = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{where}: '{key}' is not numeric") from exc
    if v.ndim != 1 or (n is not None and v.size != n):
        raise ModelFileError(f"{where}: '{key}' must be a list of {n or 'm'} numbers")
    return v


def _mat(table: dict, key: str, where: str, shape: tuple[int, int]) -> np.ndarray:
    try:
        M = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{where}: '{key}' must be a numeric matrix") from exc
    if M.shape != shape:
        raise ModelFileError(f"{where}: '{key}' has shape {M.shape}, expected {shape}")
    return M


def parse_model(text: str, where: str = "<model>"):
    """Parse model text; returns ``(AircraftModel, actuators or None)``."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelFileError(f"{where}: {exc}") from exc
    if "B" not in doc:
        raise ModelFileError(f"{where}: missing key 'B'")
    try:
        B = np.asarray(doc["B"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{where}: 'B' must be a numeric matrix") from exc
    if B.ndim != 2 or B.shape[0] != 3:
        raise ModelFileError(f"{where}: 'B' must have 3 rows, got shape {B.shape}")
    m = B.shape[1]
    names = doc.get("surfaces")
    if names is not None and len(names) != m:
        raise ModelFileError(f"{where}: {len(names)} surface names for {m} columns of B")

    pos = doc.get("position")
    if not isinstance(pos, dict):
        raise ModelFileError(f"{where}: missing [position] table")
    rate = doc.get("rate")
    kw = {}
    try:
        kw["position_limits"] = BoxLimits(_vec(pos, "lower", where, m), _vec(pos, "upper", where, m))
        if rate is not None:
            kw["rate_limits"] = BoxLimits(_vec(rate, "lower", where, m), _vec(rate, "upper", where, m))
        for key in ("A", "R", "R_rate"):
            if key in doc:
                kw[key] = _mat(doc, key, where, (m, m))
        model = AircraftModel(B=B, names=tuple(names) if names else None, **kw)
    except ModelFileError:
        raise
    except ValueError as exc:
        raise ModelFileError(f"{where}: {exc}") from exc

    acts = None
    tab = doc.get("actuators")
    if tab is not None:
        w = _vec(tab, "omega0", where, m)
        z = _vec(tab, "zeta", where, m)
        if model.rate_limits is not None:
            # the simulated rate clamp is symmetric; use the tighter side
            r = np.minimum(model.rate_limits.upper, -model.rate_limits.lower)
        else:
            r = np.full(m, math.inf)
        lim = model.position_limits
        try:
            acts = [ActuatorParams(float(w[j]), float(z[j]),
                                   (float(lim.lower[j]), float(lim.upper[j])), float(r[j]))
                    for j in range(m)]
        except ValueError as exc:
            raise ModelFileError(f"{where}: {exc}") from exc
    return model, acts


def load_model(path: str | os.PathLike):
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), str(path))


def _toml_num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _toml_row(v) -> str:
    return "[" + ", ".join(_toml_num(x) for x in np.asarray(v).ravel()) + "]"


def _toml_matrix(M) -> str:
    return "[\n" + "".join(f"  {_toml_row(r)},\n" for r in np.atleast_2d(M)) + "]"


def dumps_model(model: AircraftModel, actuators: Optional[Sequence[ActuatorParams]] = None) -> str:
    out = []
    if model.names:
        out.append("surfaces = [" + ", ".join(f'"{n}"' for n in model.names) + "]")
    out.append(f"B = {_toml_matrix(model.B)}")
    if model.A is not None:
        out.append(f"A = {_toml_matrix(model.A)}")
    out.append(f"R = {_toml_matrix(model.R)}")
    out.append(f"R_rate = {_toml_matrix(model.R_rate)}")
    out.append("")
    out.append("[position]")
    out.append(f"lower = {_toml_row(model.position_limits.lower)}")
    out.append(f"upper = {_toml_row(model.position_limits.upper)}")
    if model.rate_limits is not None:
        out.append("")
        out.append("[rate]")
        out.append(f"lower = {_toml_row(model.rate_limits.lower)}")
        out.append(f"upper = {_toml_row(model.rate_limits.upper)}")
    if actuators is not None:
        out.append("")
        out.append("[actuators]")
        out.append(f"omega0 = {_toml_row([a.omega0 for a in actuators])}")
        out.append(f"zeta = {_toml_row([a.zeta for a in actuators])}")
    return "\n".join(out) + "\n"


def save_model(path: str | os.PathLike, model: AircraftModel,
               actuators: Optional[Sequence[ActuatorParams]] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model, actuators))
