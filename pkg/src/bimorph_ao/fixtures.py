"""Regression of computed quantities against the printed reference tables."""

import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import plate_modes, turbulence, zernike, _disk


class FixtureError(ValueError):
    """Fixture file missing or malformed."""


def load(name, directory=None):
    try:
        if directory is None:
            text = resources.files("bimorph_ao").joinpath("data", name).read_text()
        else:
            text = Path(directory, name).read_text()
        return json.loads(text)
    except FileNotFoundError as exc:
        raise FixtureError(f"fixture {name} not found") from exc
    except json.JSONDecodeError as exc:
        raise FixtureError(f"fixture {name} is not valid JSON: {exc}") from exc


def _rows(doc, key, width, name):
    rows = doc.get(key)
    if not isinstance(rows, list) or any(len(r) != width for r in rows):
        raise FixtureError(f"fixture {name}: '{key}' must be a list of {width}-element rows")
    return rows


def check_table1(doc, cap=15):
    out = []
    flags = doc.get("flags", {})
    for i, n, m, kind, norm_sq, coeffs in _rows(doc, "rows", 6, "table1"):
        mode = zernike.noll_indices(int(i), cap=max(cap, int(i)))
        got = (mode.radial_order, mode.azimuthal_order, mode.angular_kind)
        ok = got == (n, m, kind)
        row = dict(row=int(i), expected=[n, m, kind], got=list(got), status="pass" if ok else "fail")
        # printed polynomial vs evaluated function along theta = 0 (or pi/(2m) for sines)
        x = np.linspace(0.0, 1.0, 11)
        printed = np.sqrt(norm_sq) * sum(float(c) * x ** int(p) for p, c in coeffs.items())
        theta = 0.0 if kind != "sin" else np.pi / (2 * m)
        evald = zernike.zernike_eval(mode, x, theta, 1.0)
        diff = float(np.max(np.abs(printed - evald)))
        row["formula_max_abs_diff"] = diff
        if str(i) in flags:
            row["note"] = flags[str(i)]
            if ok and diff > 1e-12:
                row["status"] = "flagged"
        elif diff > 1e-12:
            row["status"] = "fail"
        out.append(row)
    return out


def check_table2(doc, rtol=1e-3):
    out = []
    flags = doc.get("row_flags", {})
    V_over_D = float(doc["V_over_D"])
    zmap = {int(k): int(v) for k, v in doc["zernike_of_row"].items()}
    for r, c, F, _G in _rows(doc, "entries", 4, "table2"):
        if r != c:
            continue
        mode = zernike.noll_indices(zmap[int(r)])
        got = float(turbulence.build_F([mode], V_over_D)[0, 0])
        row = dict(row=int(r), zernike=mode.noll_index, printed_F=F, computed_F=got)
        if flags.get(str(r)) == "anomalous":
            row["status"] = "anomalous-skip"
        else:
            rel = abs(got - F) / abs(F)
            row["rel_err"] = rel
            row["status"] = "pass" if rel <= rtol else "fail"
        out.append(row)
    return out


def printed_G(doc):
    n = len(doc["zernike_of_row"])
    G = np.zeros((n, n))
    for r, c, _F, g in _rows(doc, "entries", 4, "table2"):
        G[int(r) - 1, int(c) - 1] = g
    return G


def pair_table3(doc, shapes):
    """Pair printed rows to solved shapes by nearest lambda."""
    pairs = []
    lams = np.array([s.lambda_kj for s in shapes])
    for i, j, k, lam, c, a in _rows(doc, "rows", 6, "table3"):
        idx = int(np.argmin(np.abs(lams - lam)))
        pairs.append(((i, j, k, lam, c, a), shapes[idx]))
    return pairs


def check_table3(doc, rtol=1e-3):
    nu, k_max = float(doc["nu"]), int(doc["k_max"])
    shapes = plate_modes.solve_mode_shapes(nu, k_max, len(doc["rows"]))
    out = []
    for (i, j, k, lam, c, a), s in pair_table3(doc, shapes):
        errs = dict(
            lambda_kj=abs(s.lambda_kj - lam) / abs(lam),
            c_kj=abs(s.c_kj - c) / abs(c),
            a_kj=abs(s.a_kj - a) / abs(a),
        )
        res = plate_modes.boundary_residuals(s, nu)
        row = dict(row=int(i), printed=[lam, c, a], computed=[s.lambda_kj, s.c_kj, s.a_kj],
                   printed_jk=[j, k], computed_jk=[s.j, s.k], rel_err=errs,
                   boundary_residual=max(res))
        row["status"] = "pass" if max(errs.values()) <= rtol and max(res) <= 1e-8 else "fail"
        if row["status"] == "pass" and (j, k) != (s.j, s.k):
            row["note"] = "printed (j, k) indices differ from the solved shape"
        out.append(row)
    return out


def zernike_orthonormality(cap=15):
    """Max |<Z_i, Z_j> - delta_ij| on a 2-D tensor quadrature grid."""
    X, T, W = _disk.disk_grid()
    vals = [zernike.zernike_eval(zernike.noll_indices(i, cap), X, T, 1.0) for i in range(1, cap + 1)]
    G = np.array([[np.sum(W * u * v) for v in vals] for u in vals])
    return float(np.max(np.abs(G - np.eye(cap))))


def validate_all(directory=None, cap=15):
    report = dict(
        table1=check_table1(load("table1.json", directory), cap),
        table2=check_table2(load("table2.json", directory)),
        table3=check_table3(load("table3.json", directory)),
    )
    err = zernike_orthonormality(cap)
    report["orthonormality"] = dict(max_abs_err=err, status="pass" if err <= 1e-8 else "fail")
    failed = [
        (name, r["row"]) for name in ("table1", "table2", "table3")
        for r in report[name] if r["status"] == "fail"
    ]
    if report["orthonormality"]["status"] == "fail":
        failed.append(("orthonormality", None))
    report["ok"] = not failed
    report["failed"] = failed
    return report
