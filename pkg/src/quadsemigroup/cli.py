"""Command-line interface: ``analyze``, ``propagate``, ``ou`` and ``verify``.

Every subcommand builds a :class:`Report` (written as JSON with ``--out-json``)
and prints a short text summary. Exit codes: 0 when every check passes
(flags do not count as failures), 1 when any check fails, 2 on input errors.

Symbol files hold ``{"n": int, "M": [[re, im], ...], "label": str}`` with the
``2n x 2n`` matrix in row-major order. Model files hold
``{"n": int, "Q": [...], "B": [...], "variant": "ou" | "fokker_planck"}``
with ``n x n`` matrices in row-major order.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys

import numpy as np

from quadsemigroup import __version__
from quadsemigroup import ensembles as ens
from quadsemigroup import multiplier as mp
from quadsemigroup import ou_models as ou
from quadsemigroup import weyl_galerkin as wg
from quadsemigroup.errors import InputError, QuadError, ShapeError
from quadsemigroup.singular_space import (
    MEMBERSHIP_TOL,
    defect_forms,
    direction_index,
    kernel_chain,
    symplectic_split,
)
from quadsemigroup.symplectic_core import (
    hamilton_map,
    make_symbol,
    poisson_bracket,
    symbol_from_dict,
    symbol_to_dict,
)

__all__ = ["Report", "build_parser", "cmd_analyze", "cmd_ou", "cmd_propagate", "cmd_verify", "main"]

TOL_DEFAULTS = {
    "rank": None,
    "membership": MEMBERSHIP_TOL,
    "lower_bound": 1e-10,
    "bracket": 1e-9,
    "deflation": 1e-13,
    "split": 1e-10,
    "pairing": wg.PAIRING_TOL,
    "spectrum": 1e-3,
    "eigen": 1e-8,
    "slope": None,
    "r2": 0.98,
    "contraction": 1e-8,
    "accretivity": 1e-10,
    "large_time": 0.1,
    "defect": 1e-8,
    "lyapunov": 1e-10,
    "angle": 1e-8,
    "residual": 1e-12,
    "omega": 1e-12,
    "oracle": 1e-4,
}

TOL_HELP = {
    "rank": "absolute rank threshold of the kernel chain (default 2n*sigma_max*1e-12)",
    "membership": "distance threshold for subspace membership",
    "lower_bound": "allowed negative relative margin of the lower-bound inequality",
    "bracket": "relative disagreement allowed between the two bracket routes",
    "deflation": "relative threshold separating Ker M_0 in the dissipation check",
    "split": "residual allowed in the symplectic splitting",
    "pairing": "distance of -i*lambda from the imaginary axis treated as ambiguous",
    "spectrum": "lattice versus Galerkin eigenvalue distance",
    "eigen": "harmonic oscillator eigenvalue error in verify",
    "slope": "allowed slope deviation (default 0.1, 0.15, then 0.1(2k+1)/2)",
    "r2": "minimal r^2 of a decay fit before it is flagged",
    "contraction": "allowed norm increase along a trajectory",
    "accretivity": "allowed negative Re<Au,u>/|u|^2",
    "large_time": "allowed |slope + omega0| of the large-time exponential fit",
    "defect": "commutation defect bound",
    "lyapunov": "relative Lyapunov residual",
    "angle": "largest principal angle between the two subspace families",
    "residual": "residual of the generator identities",
    "omega": "difference between the two omega0 routes divided by 1 + ||F||_2",
    "oracle": "relative L2 error between Galerkin and the Gaussian oracle",
}

DEFAULT_WINDOW = (10**-2.5, 10**-1)


# ---------------------------------------------------------------- report


def _clean(obj):
    """Convert to JSON-ready Python types; non-finite numbers become ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


class Report:
    """Results and named verdicts of one run."""

    def __init__(self, subcommand, config, tolerances, digest):
        self.subcommand = subcommand
        self.data = {
            "tool": "quadsemigroup",
            "version": __version__,
            "subcommand": subcommand,
            "input_digest": digest,
            "config": config,
            "tolerances": tolerances,
            "results": {},
            "verdicts": [],
        }

    @property
    def results(self):
        return self.data["results"]

    @property
    def verdicts(self):
        return self.data["verdicts"]

    def _add(self, name, status, value=None, threshold=None, detail=""):
        entry = {"check": name, "status": status}
        if value is not None:
            entry["value"] = value
        if threshold is not None:
            entry["threshold"] = threshold
        if detail:
            entry["detail"] = detail
        self.verdicts.append(entry)
        return status == "pass"

    def check(self, name, ok, value=None, threshold=None, detail=""):
        return self._add(name, "pass" if ok else "fail", value, threshold, detail)

    def fail(self, name, detail, value=None):
        return self._add(name, "fail", value, None, detail)

    def flag(self, name, detail, value=None):
        return self._add(name, "flag", value, None, detail)

    def counts(self):
        out = {"pass": 0, "fail": 0, "flag": 0}
        for v in self.verdicts:
            out[v["status"]] += 1
        return out

    @property
    def status(self):
        return "fail" if self.counts()["fail"] else "pass"

    @property
    def exit_code(self):
        return 1 if self.status == "fail" else 0

    def to_json(self):
        data = dict(self.data)
        data["status"] = self.status
        data["counts"] = self.counts()
        return json.dumps(_clean(data), indent=2) + "\n"

    def summary(self, headline=()):
        c = self.counts()
        lines = [f"quadsemigroup {self.subcommand} (version {__version__})"]
        lines += [f"  {h}" for h in headline]
        for v in self.verdicts:
            if v["status"] != "pass":
                lines.append(f"  {v['status'].upper()}: {v['check']} {v.get('detail', '')}".rstrip())
        lines.append(
            f"  checks: {c['pass']} pass, {c['fail']} fail, {c['flag']} flag"
            f" -> {self.status.upper()}"
        )
        return "\n".join(lines)


# ---------------------------------------------------------------- inputs


def _reject_constant(name):
    raise ValueError(f"non-finite constant {name} is not allowed")


def _load_json(path):
    """Read a JSON document; returns ``(data, sha256 hex digest)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(raw.decode("utf-8"), parse_constant=_reject_constant)
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 text") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return data, hashlib.sha256(raw).hexdigest()


def load_symbol(path):
    data, digest = _load_json(path)
    try:
        return symbol_from_dict(data), digest
    except QuadError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_model(path):
    data, digest = _load_json(path)
    try:
        return ou.model_from_dict(data), digest
    except QuadError as exc:
        raise InputError(f"{path}: {exc}") from exc


def basis_labels(n):
    return [f"x{i + 1}" for i in range(n)] + [f"xi{i + 1}" for i in range(n)]


def basis_vector(n, i):
    e = np.zeros(2 * n)
    e[i] = 1.0
    return e


def parse_directions(text, n):
    """Parse a comma-separated list of basis labels or raw vectors.

    Labels are ``x1..xn`` and ``xi1..xin`` (``x`` and ``xi`` when ``n = 1``).
    A raw vector lists its ``2n`` entries separated by semicolons, e.g.
    ``1;0;1j;0``.
    """
    labels = basis_labels(n)
    aliases = {"x": "x1", "xi": "xi1"} if n == 1 else {}
    if text is None:
        return [(lab, basis_vector(n, i)) for i, lab in enumerate(labels)]
    out = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            raise InputError("empty entry in --directions")
        key = aliases.get(item, item)
        if key in labels:
            out.append((key, basis_vector(n, labels.index(key))))
            continue
        parts = item.split(";")
        if len(parts) != 2 * n:
            raise InputError(
                f"direction {item!r} is neither a label of {labels} nor a vector of {2 * n} entries"
            )
        try:
            vec = np.array([complex(p.strip().replace(" ", "")) for p in parts])
        except ValueError as exc:
            raise InputError(f"direction {item!r} has a non-numeric entry") from exc
        if not np.all(np.isfinite(vec)):
            raise InputError(f"direction {item!r} has a non-finite entry")
        if not np.any(vec):
            raise InputError(f"direction {item!r} is the zero vector")
        out.append((item, vec.real if not np.any(vec.imag) else vec))
    return out


def time_grid(cfg):
    lo, hi, count = cfg.t_lo, cfg.t_hi, cfg.t_count
    if not (0 < lo < hi):
        raise InputError("time grid needs 0 < t-lo < t-hi")
    if count < 2:
        raise InputError("time grid needs at least 2 points")
    if cfg.log_grid:
        return np.logspace(np.log10(lo), np.log10(hi), count)
    return np.linspace(lo, hi, count)


def tolerances(cfg):
    return {k: getattr(cfg, f"tol_{k}") for k in TOL_DEFAULTS}


def _config_dict(cfg, keys):
    return {k: getattr(cfg, k) for k in keys}


def _new_report(cfg, subcommand, digest, keys):
    return Report(subcommand, _config_dict(cfg, keys), tolerances(cfg), digest)


# ---------------------------------------------------------------- analyze


def _fmt_complex(z):
    z = complex(z)
    if abs(z.imag) <= 1e-12 * (1 + abs(z)):
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}i"


def _chain_summary(chain):
    return {
        "k0": chain.k0 if chain.singular_space_trivial else None,
        "singular_space_trivial": chain.singular_space_trivial,
        "singular_space_dim": int(chain.S_basis.shape[1]),
        "dims": list(chain.dims),
        "rank_tol": chain.rank_tol,
        "warnings": list(chain.warnings),
    }


def _multiplier_section(report, q, chain, tol, mutate=False, prefix=""):
    """Coefficients and the three matrix inequalities; returns the dissipation result."""
    form = mp.time_form(q, chain, mutate=mutate)
    c = form.coeffs
    grid = mp.default_grid()
    report.results[prefix + "coefficients"] = {
        "k0": c.k0,
        "c0": c.c0,
        "c1": c.c1,
        "a": c.a,
        "b": c.b,
        "sign_margins": mp.sign_margins(c),
    }
    positive = bool(np.all(c.a > 0) and np.all(c.b > 0))
    report.check(prefix + "multiplier.coefficients_positive", positive)
    sm = float(np.min(mp.sign_margins(c)))
    report.check(prefix + "multiplier.sign_conditions", sm > 0, value=sm, threshold=0.0)
    lb = mp.verify_lower_bound(form, grid)
    report.results[prefix + "lower_bound"] = lb
    report.check(
        prefix + "multiplier.lower_bound",
        lb["margin"] >= -tol["lower_bound"],
        value=lb["margin"],
        threshold=-tol["lower_bound"],
    )
    br = max(mp.hamilton_flow_bracket(form, t)[1] for t in grid)
    report.results[prefix + "bracket_route_difference"] = br
    report.check(prefix + "multiplier.bracket_routes", br <= tol["bracket"], value=br, threshold=tol["bracket"])
    diss = mp.verify_dissipation(form, grid, tol=tol["deflation"])
    report.results[prefix + "dissipation"] = {
        "C_min": diss.C_min,
        "C_expl": diss.C_expl,
        "log10_C_expl": diss.log10_C_expl,
        "worst_t": diss.worst_t,
        "margin_at_expl": diss.margin_at_expl,
        "witness": diss.witness,
    }
    detail = "" if diss.admissible else f"C_min={diss.C_min!r} C_expl={diss.C_expl!r} at t={diss.worst_t!r}"
    report.check(prefix + "multiplier.dissipation", diss.admissible, detail=detail)
    return diss


def _spectrum_section(report, q, cfg, tol):
    try:
        sb = wg.spectrum_bottom(q, m=10, pairing_tol=tol["pairing"])
    except QuadError as exc:
        report.flag("spectrum.lattice", str(exc))
        return None
    report.results["spectrum"] = {
        "head": sb.eigenvalues,
        "omega0": sb.omega0,
        "mu0": sb.mu0,
        "frequencies": sb.frequencies,
        "multiplicities": sb.multiplicities,
    }
    report.check("spectrum.lattice", True)
    D = (cfg.N + 1) ** q.n
    if D > 20000:
        report.flag("spectrum.galerkin", f"skipped: Galerkin size {D} exceeds 20000")
        return sb
    gal = wg.galerkin_eigenvalues(wg.quantize(q, cfg.N), m=6)
    lat = sb.eigenvalues[:6]
    dist = float(max(np.min(np.abs(gal - z)) for z in lat))
    report.results["spectrum"]["galerkin_head"] = gal
    report.results["spectrum"]["galerkin_distance"] = dist
    if dist <= tol["spectrum"]:
        report.check("spectrum.galerkin", True, value=dist, threshold=tol["spectrum"])
    else:
        report.flag("spectrum.galerkin", f"Galerkin head differs by {dist:.3e}; raise --N", value=dist)
    return sb


def cmd_analyze(cfg):
    """Singular space, multiplier checks and spectrum of a symbol file."""
    q, digest = load_symbol(cfg.input)
    tol = tolerances(cfg)
    report = _new_report(cfg, "analyze", digest, ["input", "N"])
    report.results["symbol"] = {"n": q.n, "label": q.label, "accretive": q.accretive}
    headline = [f"symbol: n={q.n} label={q.label!r} accretive={q.accretive}"]
    if not report.check("symbol.accretive", q.accretive):
        return report, headline
    chain = kernel_chain(q, rank_tol=tol["rank"])
    report.results["chain"] = _chain_summary(chain)
    if chain.warnings:
        report.flag("chain.rank_gap", "; ".join(chain.warnings))
    if chain.singular_space_trivial:
        headline.append(f"k0={chain.k0} dims={list(chain.dims)}")
        report.results["indices"] = {
            lab: direction_index(chain, basis_vector(q.n, i), tol["membership"])
            for i, lab in enumerate(basis_labels(q.n))
        }
        try:
            _, c0 = defect_forms(q, chain)
            report.check("chain.c0_positive", c0 > 0, value=c0, threshold=0.0)
            diss = _multiplier_section(report, q, chain, tol)
            headline.append(f"C_min={diss.C_min:.6g} C_expl={diss.C_expl:.6g}")
        except QuadError as exc:
            report.fail("multiplier", str(exc))
    else:
        headline.append(f"singular space of dimension {chain.S_basis.shape[1]}")
        try:
            split = symplectic_split(q, chain, tol=tol["split"])
            report.results["split"] = {
                "S_symplectic": split.S_symplectic,
                "sigma_rank": split.sigma_rank,
                "residual": split.residual,
                "q_restricted": None if split.q_restricted is None else symbol_to_dict(split.q_restricted),
                "imq_restricted": None if split.imq_restricted is None else symbol_to_dict(split.imq_restricted),
            }
            if split.S_symplectic:
                report.check("split.residual", split.residual <= tol["split"], value=split.residual, threshold=tol["split"])
            else:
                report.flag("split.symplectic", "sigma restricted to S is degenerate")
        except QuadError as exc:
            report.fail("split", str(exc))
    sb = _spectrum_section(report, q, cfg, tol)
    if sb is not None:
        head = ", ".join(_fmt_complex(z) for z in sb.eigenvalues[:4])
        headline.append(f"omega0={sb.omega0:.12g} head=[{head}, ...]")
    return report, headline


# ---------------------------------------------------------------- propagate


def cmd_propagate(cfg):
    """Directional norms along the semigroup, CSV time series and decay fits."""
    q, digest = load_symbol(cfg.input)
    tol = tolerances(cfg)
    t = time_grid(cfg)
    directions = parse_directions(cfg.directions, q.n)
    window = (cfg.window_lo, cfg.window_hi)
    large_time = bool(np.all(t >= 1.0))
    if not large_time:
        inside = np.count_nonzero((t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12)))
        if inside < 5:
            raise InputError(f"only {inside} grid points inside the fit window; need at least 5")
    report = _new_report(
        cfg,
        "propagate",
        digest,
        ["input", "N", "t_lo", "t_hi", "t_count", "log_grid", "directions", "seed", "window_lo", "window_hi", "data_decay"],
    )
    if not report.check("symbol.accretive", q.accretive):
        return report, []
    chain = kernel_chain(q, rank_tol=tol["rank"])
    op = wg.quantize(q, cfg.N)
    u0 = wg.smooth_random_state(q.n, cfg.N, cfg.seed, decay=cfg.data_decay)
    traj = wg.propagate(op, u0, t)
    norms = np.linalg.norm(traj, axis=1)
    rise = float(np.max(np.diff(np.concatenate([[1.0], norms]))))
    report.check("propagate.contraction", rise <= tol["contraction"], value=rise, threshold=tol["contraction"])
    headline = [f"N={cfg.N} D={op.D} grid=[{t[0]:.4g}, {t[-1]:.4g}] x {t.size}"]
    omega0 = None
    if large_time:
        try:
            omega0 = wg.spectrum_bottom(q, pairing_tol=tol["pairing"]).omega0
        except QuadError as exc:
            report.fail("propagate.omega0", str(exc))
    mask = wg._boundary_mask(q.n, cfg.N)
    rows, fits = [], {}
    for label, X in directions:
        try:
            L = wg.linear_observable(X, cfg.N, n=q.n).A
            w = (L @ traj.T).T
            vals = np.linalg.norm(w, axis=1)
            edge = np.linalg.norm(w[:, mask], axis=1)
            rows.extend((ti, vi, label) for ti, vi in zip(t, vals))
            if np.any(edge >= 0.1 * vals):
                report.flag(f"propagate.{label}.truncation", "boundary modes carry at least 10% of the norm")
            fits[label] = _fit_direction(report, label, X, t, vals, chain, window, large_time, omega0, tol)
        except QuadError as exc:
            report.fail(f"propagate.{label}", str(exc))
    report.results["fits"] = fits
    for label, fit in fits.items():
        if fit is not None and "slope" in fit:
            expected = fit.get("expected")
            exp_text = "n/a" if expected is None else f"{expected:.4g}"
            headline.append(f"{label}: slope={fit['slope']:.4f} expected={exp_text}")
    if cfg.out_csv:
        with open(cfg.out_csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "norm", "direction_label", "N", "seed"])
            for ti, vi, label in rows:
                writer.writerow([repr(float(ti)), repr(float(vi)), label, cfg.N, cfg.seed])
    return report, headline


def _fit_direction(report, label, X, t, vals, chain, window, large_time, omega0, tol):
    if large_time:
        if omega0 is None:
            return None
        # the large-time estimate is an upper bound: faster decay also passes
        slope, intercept = np.polyfit(t, np.log(vals), 1)
        bound = -omega0 + tol["large_time"]
        report.check(f"propagate.{label}.exponential_rate", slope <= bound, value=float(slope),
                     threshold=bound, detail=f"slope at most {bound:.4g}")
        return {
            "mode": "exponential",
            "slope": float(slope),
            "intercept": float(intercept),
            "expected": -omega0,
            "matches_rate": bool(abs(slope + omega0) <= tol["large_time"]),
        }
    fit = wg.decay_exponent(t, vals, window=window)
    out = fit.to_dict()
    out["mode"] = "power_law"
    out["halved_window_slope"] = fit.halved_slope
    if not chain.singular_space_trivial or np.any(np.imag(X)):
        report.flag(f"propagate.{label}.slope", "no index available for this direction")
        return out
    k = direction_index(chain, np.real(X), tol["membership"])
    expected = -(2 * k + 1) / 2
    stol = wg.slope_tolerance(k) if tol["slope"] is None else tol["slope"]
    out.update(index=k, expected=expected, slope_tol=stol)
    report.check(f"propagate.{label}.slope", abs(fit.slope - expected) <= stol, value=fit.slope,
                 threshold=stol, detail=f"expected {expected}")
    if fit.r_squared < tol["r2"]:
        report.flag(f"propagate.{label}.r2", f"low-confidence fit, r2={fit.r_squared:.4f}", value=fit.r_squared)
    return out


# ---------------------------------------------------------------- ou


def cmd_ou(cfg):
    """Model analysis, conjugated symbol emission and cross-checks."""
    model, digest = load_model(cfg.input)
    tol = tolerances(cfg)
    report = _new_report(cfg, "ou", digest, ["input", "N", "oracle"])
    res = report.results
    res["model"] = {
        "n": model.n,
        "variant": model.variant,
        "kalman_rank": model.kalman_rank,
        "hypoelliptic": model.hypoelliptic,
        "k0": model.k0,
        "stable": model.stable,
        "trace_B": model.trace_B,
    }
    headline = [f"model: n={model.n} variant={model.variant} hypoelliptic={model.hypoelliptic}"]
    gv, lam, gtol = ou.gram_verdict(model)
    res["gram"] = {"lambda_min": lam, "threshold": gtol, "verdict": gv}
    report.check("ou.kalman_gram_agree", gv == model.hypoelliptic)
    if not model.hypoelliptic:
        report.flag("ou.hypoelliptic", "Kalman rank condition fails: no symbol emitted")
        return report, headline
    if not model.stable:
        report.flag("ou.stable", "drift is not stable: no invariant measure, no symbol emitted")
        return report, headline
    res["Qinf"] = model.Qinf
    res["lyapunov_residual"] = model.lyapunov_residual
    report.check("ou.lyapunov", model.lyapunov_residual <= tol["lyapunov"], value=model.lyapunov_residual,
                 threshold=tol["lyapunov"])
    try:
        q = ou.conjugated_symbol(model)
    except QuadError as exc:
        report.fail("ou.conjugated_symbol", str(exc))
        return report, headline
    res["symbol"] = symbol_to_dict(q)
    if cfg.out_symbol:
        with open(cfg.out_symbol, "w") as fh:
            fh.write(json.dumps(symbol_to_dict(q), indent=2) + "\n")
    chain = kernel_chain(q, rank_tol=tol["rank"])
    res["k0"] = chain.k0
    report.check("ou.k0_routes", chain.k0 == model.k0, detail=f"Kalman {model.k0}, chain {chain.k0}")
    w_spectral, w_tr, diff = ou.omega0_discrepancy(model, q, pairing_tol=tol["pairing"])
    res["omega0"] = w_spectral
    res["omega0_trace"] = w_tr
    report.check("ou.omega0_routes", diff <= tol["omega"], value=diff, threshold=tol["omega"])
    rows, agree = ou.index_table(model, q)
    res["index_table"] = rows
    report.check("ou.index_table", agree)
    angles = ou.subspace_angles(model)
    res["subspace_angles"] = angles
    report.check("ou.subspace_angles", max(angles) <= tol["angle"], value=max(angles), threshold=tol["angle"])
    gens = []
    for j in range(model.k0 + 1):
        g = ou.lambda_generators(model, j, q)
        gens.append({k: g[k] for k in ("Qj", "Bj", "symbol_residual", "generator_residual", "sign_residual")})
    res["generators"] = gens
    worst = max(max(g["symbol_residual"], g["generator_residual"], g["sign_residual"]) for g in gens)
    report.check("ou.generator_identities", worst <= tol["residual"], value=worst, threshold=tol["residual"])
    headline.append(f"k0={chain.k0} omega0={w_spectral:.12g} -Tr(B)/2={w_tr:.12g}")
    if cfg.oracle:
        if model.variant != "ou" or model.n > 2:
            report.flag("ou.oracle", "oracle comparison needs the ou variant and n <= 2")
        else:
            g0 = ou.GaussianState(mean=np.full(model.n, 0.3), covariance=0.7 * np.eye(model.n))
            times = [0.1, 0.5, 1.0]
            errs = ou.oracle_comparison(model, g0, times, cfg.N, q=q)
            res["oracle"] = {"times": times, "relative_errors": errs, "N": cfg.N}
            report.check("ou.oracle", max(errs) <= tol["oracle"], value=max(errs), threshold=tol["oracle"])
    return report, headline


# ---------------------------------------------------------------- verify


def _worst(report, name, values, threshold, larger_is_worse=True):
    """Aggregate an ensemble property into one verdict carrying the worst member."""
    values = np.asarray(values, dtype=float)
    idx = int(np.nanargmax(values) if larger_is_worse else np.nanargmin(values))
    v = float(values[idx])
    ok = bool(np.all(np.isfinite(values))) and (v <= threshold if larger_is_worse else v >= threshold)
    report.check(name, ok, value=v, threshold=threshold, detail=f"worst member {idx} of {values.size}")


def _verify_core(report, rng, size):
    ho = ens.harmonic_oscillator()
    F = hamilton_map(ho).F
    report.check("core.hamilton_map_oscillator", np.allclose(F, [[0, 0.5], [-0.5, 0]], atol=1e-15))
    xxi = make_symbol(1, np.array([[0.0, 1.0], [0.0, 0.0]]))
    report.check("core.hamilton_map_xxi", np.allclose(hamilton_map(xxi).F, np.diag([0.5, -0.5]), atol=1e-15))
    report.check("core.accretive_flags", ho.accretive and not xxi.accretive and ens.kramers_symbol().accretive)
    x2 = make_symbol(1, np.diag([1.0, 0.0]))
    br = poisson_bracket(xxi, x2).M
    report.check("core.bracket_example", np.allclose(br, np.diag([2.0, 0.0]), atol=1e-14))
    anti, jac, bil = [], [], []
    for _ in range(size):
        n = int(rng.integers(1, 4))
        q1, q2, q3 = (ens.random_symbol(rng, n) for _ in range(3))
        s = float(rng.standard_normal())
        anti.append(np.max(np.abs(poisson_bracket(q1, q2).M + poisson_bracket(q2, q1).M)))
        cyc = (
            poisson_bracket(q1, poisson_bracket(q2, q3)).M
            + poisson_bracket(q2, poisson_bracket(q3, q1)).M
            + poisson_bracket(q3, poisson_bracket(q1, q2)).M
        )
        jac.append(np.max(np.abs(cyc)) / (1 + np.linalg.norm(q1.M) * np.linalg.norm(q2.M) * np.linalg.norm(q3.M)))
        lhs = poisson_bracket(q1 + q2 * s, q3).M
        rhs = poisson_bracket(q1, q3).M + s * poisson_bracket(q2, q3).M
        bil.append(np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(rhs))))
    _worst(report, "core.bracket_antisymmetry", anti, 1e-12)
    _worst(report, "core.jacobi_identity", jac, 1e-10)
    _worst(report, "core.bracket_bilinearity", bil, 1e-12)
    q = ens.kramers_symbol()
    text = json.dumps(symbol_to_dict(q))
    report.check("core.symbol_round_trip", json.dumps(symbol_to_dict(symbol_from_dict(json.loads(text)))) == text)


def _verify_chain(report):
    q = ens.kramers_symbol()
    chain = kernel_chain(q)
    idx = [direction_index(chain, basis_vector(2, i)) for i in range(4)]
    report.check("chain.kramers_k0", chain.k0 == 1 and chain.singular_space_trivial, value=chain.k0)
    report.check("chain.kramers_indices", idx == [1, 0, 1, 0], detail=f"indices {idx}")
    _, c0 = defect_forms(q, chain)
    report.check("chain.kramers_c0", abs(c0 - 0.0625) <= 1e-12, value=c0)
    ho_chain = kernel_chain(ens.harmonic_oscillator())
    report.check("chain.oscillator_k0", ho_chain.k0 == 0 and ho_chain.singular_space_trivial)
    ixi = make_symbol(1, np.array([[0.0, 0.0], [0.0, 1j]]))
    ch = kernel_chain(ixi)
    split = symplectic_split(ixi, ch)
    report.check("chain.imaginary_split", ch.S_basis.shape[1] == 2 and split.S_symplectic)


def _verify_multiplier(report, rng, size, mutate, tol):
    ho = ens.harmonic_oscillator()
    c = mp.multiplier_coefficients(ho, kernel_chain(ho))
    report.check("multiplier.oscillator_coefficients",
                 np.allclose(c.a, [200 / 9, 1.0], rtol=1e-13) and np.allclose(c.b, [10 / 3], rtol=1e-13))
    for label, q in (("oscillator", ho), ("kramers", ens.kramers_symbol())):
        chain = kernel_chain(q)
        _multiplier_section(report, q, chain, tol, mutate=mutate, prefix=f"{label}.")
        form = mp.time_form(q, chain, mutate=mutate)
        rr = mp.recursion_residual(form.coeffs) / (1 + np.max(form.coeffs.a))
        report.check(f"{label}.multiplier.recursion_residual", rr <= 1e-13 or mutate, value=rr)
        cs = min(
            mp.cauchy_schwarz_margin(form, j, eps) / (1 + np.linalg.norm(form.M[j], 2) / eps + eps * np.linalg.norm(form.M[j + 1], 2))
            for j in range(form.coeffs.k0 + 1)
            for eps in (0.1, 1.0, 10.0)
        )
        report.check(f"{label}.multiplier.cauchy_schwarz", cs >= -1e-12, value=cs, threshold=-1e-12)
    signs, lower, bracket, admissible = [], [], [], []
    for _ in range(size):
        q = ens.random_accretive_symbol(rng, int(rng.integers(1, 4)))
        form = mp.time_form(q, kernel_chain(q), mutate=mutate)
        grid = mp.default_grid()
        c = form.coeffs
        signs.append(min(np.min(c.a), np.min(c.b), np.min(mp.sign_margins(c))))
        lower.append(mp.verify_lower_bound(form, grid)["margin"])
        bracket.append(max(mp.hamilton_flow_bracket(form, t)[1] for t in grid))
        admissible.append(1.0 if mp.verify_dissipation(form, grid, tol=tol["deflation"]).admissible else 0.0)
    _worst(report, "ensemble.multiplier.signs", signs, 0.0, larger_is_worse=False)
    _worst(report, "ensemble.multiplier.lower_bound", lower, -tol["lower_bound"], larger_is_worse=False)
    _worst(report, "ensemble.multiplier.bracket_routes", bracket, tol["bracket"])
    _worst(report, "ensemble.multiplier.dissipation", admissible, 1.0, larger_is_worse=False)


def _verify_galerkin(report, rng, cfg, tol):
    ho = ens.harmonic_oscillator()
    op = wg.quantize(ho, cfg.N)
    ev = np.sort(np.linalg.eigvals(op.toarray()).real)[:10]
    err = float(np.max(np.abs(ev - (np.arange(10) + 0.5))))
    report.check("galerkin.oscillator_spectrum", err <= tol["eigen"], value=err, threshold=tol["eigen"])
    q = ens.kramers_symbol()
    sb = wg.spectrum_bottom(q)
    gal = wg.galerkin_eigenvalues(wg.quantize(q, cfg.N), m=6)
    dist = float(max(np.min(np.abs(gal - z)) for z in sb.eigenvalues[:6]))
    report.check("galerkin.kramers_spectrum", dist <= tol["spectrum"], value=dist, threshold=tol["spectrum"])
    report.check("galerkin.kramers_omega0", abs(sb.omega0 - 0.5) <= 1e-12, value=sb.omega0)
    d = wg.commutation_defect(ho, np.array([1.0, 0.0]), 0.5, cfg.N)
    report.check("galerkin.oscillator_commutation", d <= tol["defect"], value=d, threshold=tol["defect"])
    defects = [wg.commutation_defect(q, basis_vector(2, 0), 0.5, N) for N in (8, 12, 16)]
    report.check("galerkin.kramers_commutation_decreasing", bool(np.all(np.diff(defects) < 0)),
                 detail=f"defects {defects}")
    op = wg.quantize(q, 16)
    U = rng.standard_normal((op.D, 1000)) + 1j * rng.standard_normal((op.D, 1000))
    ratio = np.real(np.sum(U.conj() * (op.A @ U), axis=0)) / np.sum(np.abs(U) ** 2, axis=0)
    report.check("galerkin.accretivity", float(ratio.min()) >= -tol["accretivity"], value=float(ratio.min()),
                 threshold=-tol["accretivity"])
    op = wg.quantize(q, 24)
    u0 = wg.smooth_random_state(2, 24, cfg.seed)
    norms = np.linalg.norm(wg.propagate(op, u0, np.linspace(0.0, 2.0, 21)), axis=1)
    rise = float(np.max(np.diff(norms)))
    report.check("galerkin.contraction", rise <= tol["contraction"], value=rise, threshold=tol["contraction"])


def _verify_ou(report, rng, size, tol):
    km = ens.kramers_model()
    report.check("ou.kramers_qinf", np.allclose(km.Qinf, np.eye(2), atol=1e-12))
    q = ou.conjugated_symbol(km)
    report.check("ou.kramers_symbol", np.allclose(q.M, ens.kramers_symbol().M, atol=1e-14))
    em = ens.elliptic_model(2)
    report.check("ou.elliptic", em.k0 == 0 and abs(ou.omega0(em) - 1.0) <= 1e-15)
    report.check("ou.zero_diffusion", not ou.ou_build(np.zeros((2, 2)), -np.eye(2)).hypoelliptic)
    lyap, angles, resid, omega, agree = [], [], [], [], []
    for _ in range(size):
        m = ens.random_hypoelliptic_model(rng, int(rng.integers(1, 4)))
        qm = ou.conjugated_symbol(m)
        lyap.append(m.lyapunov_residual)
        angles.append(max(ou.subspace_angles(m)))
        resid.append(max(
            max(g["symbol_residual"], g["generator_residual"], g["sign_residual"])
            for g in (ou.lambda_generators(m, j, qm) for j in range(m.k0 + 1))
        ))
        omega.append(ou.omega0_discrepancy(m, qm)[2])
        agree.append(1.0 if ou.index_table(m, qm)[1] else 0.0)
    _worst(report, "ensemble.ou.lyapunov", lyap, tol["lyapunov"])
    _worst(report, "ensemble.ou.subspace_angles", angles, tol["angle"])
    _worst(report, "ensemble.ou.generator_identities", resid, tol["residual"])
    _worst(report, "ensemble.ou.omega0_routes", omega, tol["omega"])
    _worst(report, "ensemble.ou.index_tables", agree, 1.0, larger_is_worse=False)
    mismatch = 0
    for _ in range(5 * size):
        Q, B = ens.random_kalman_pair(rng, int(rng.integers(1, 5)))
        m = ou.ou_build(Q, B)
        mismatch += int(ou.gram_verdict(m)[0] != m.hypoelliptic)
    report.check("ensemble.ou.kalman_gram", mismatch == 0, value=mismatch, threshold=0,
                 detail=f"{mismatch} disagreements in {5 * size} pairs")


def cmd_verify(cfg):
    """Property battery on canonical examples and a seeded random ensemble."""
    tol = tolerances(cfg)
    report = _new_report(cfg, "verify", None, ["N", "seed", "ensemble", "self_test_mutation"])
    rng = np.random.default_rng(cfg.seed)
    size = cfg.ensemble
    if size < 1:
        raise InputError("--ensemble must be positive")
    sections = (
        ("core", lambda: _verify_core(report, rng, size)),
        ("chain", lambda: _verify_chain(report)),
        ("multiplier", lambda: _verify_multiplier(report, rng, size, cfg.self_test_mutation, tol)),
        ("galerkin", lambda: _verify_galerkin(report, rng, cfg, tol)),
        ("ou", lambda: _verify_ou(report, rng, size, tol)),
    )
    for name, run in sections:
        try:
            run()
        except (QuadError, ArithmeticError, np.linalg.LinAlgError) as exc:
            report.fail(f"{name}.error", f"{type(exc).__name__}: {exc}")
    headline = [f"ensemble={size} seed={cfg.seed} mutation={cfg.self_test_mutation}"]
    return report, headline


# ---------------------------------------------------------------- entry


def build_parser():
    parser = argparse.ArgumentParser(
        prog="quadsemigroup",
        description="Analyze accretive quadratic operators and their semigroups.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    subcommand_help = {
        "analyze": "singular space, multiplier checks and spectrum of a symbol file",
        "propagate": "directional norms along the semigroup and decay fits",
        "ou": "analyze a diffusion model and emit its conjugated symbol",
        "verify": "run the property battery on canonical examples and a random ensemble",
    }
    for name, help_text in subcommand_help.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        if name != "verify":
            p.add_argument("--input", required=True, help="symbol file (model file for ou)")
        p.add_argument("--N", type=int, default=64, help="Hermite truncation order per dimension")
        p.add_argument("--t-lo", type=float, default=DEFAULT_WINDOW[0])
        p.add_argument("--t-hi", type=float, default=DEFAULT_WINDOW[1])
        p.add_argument("--t-count", type=int, default=16)
        p.add_argument("--log-grid", action="store_true", help="log-spaced instead of linear time grid")
        p.add_argument("--window-lo", type=float, default=DEFAULT_WINDOW[0], help="fit window start")
        p.add_argument("--window-hi", type=float, default=DEFAULT_WINDOW[1], help="fit window end")
        p.add_argument("--directions", default=None,
                       help="comma-separated labels (x1, xi1, ...) or raw vectors with ';' between entries")
        p.add_argument("--data-decay", type=float, default=2.0,
                       help="coefficient decay exponent of the random initial state")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--ensemble", type=int, default=20, help="random ensemble size for verify")
        p.add_argument("--out-csv", default=None)
        p.add_argument("--out-json", default=None)
        p.add_argument("--out-symbol", default=None, help="where ou writes the conjugated symbol file")
        p.add_argument("--oracle", action="store_true", help="ou: compare with the Gaussian oracle")
        p.add_argument("--self-test-mutation", action="store_true",
                       help="verify: inject a sign error into the coefficient recursion")
        for key, default in TOL_DEFAULTS.items():
            p.add_argument(f"--tol-{key.replace('_', '-')}", dest=f"tol_{key}", type=float,
                           default=default, help=TOL_HELP[key])
    return parser


COMMANDS = {"analyze": cmd_analyze, "propagate": cmd_propagate, "ou": cmd_ou, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    cfg = parser.parse_args(argv)
    try:
        if cfg.N < 2:
            raise InputError("--N must be at least 2")
        report, headline = COMMANDS[cfg.subcommand](cfg)
    except (InputError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.out_json:
        with open(cfg.out_json, "w") as fh:
            fh.write(report.to_json())
    print(report.summary(headline))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
