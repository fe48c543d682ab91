"""Acceptance criteria, one test each; every test records a single PASS/FAIL line."""

import json

import numpy as np

from quadsemigroup.cli import main
from quadsemigroup.ensembles import (
    harmonic_oscillator,
    kramers_model,
    kramers_symbol,
    random_accretive_symbol,
    random_hypoelliptic_model,
    random_kalman_pair,
)
from quadsemigroup.multiplier import (
    default_grid,
    hamilton_flow_bracket,
    sign_margins,
    time_form,
    verify_dissipation,
    verify_lower_bound,
)
from quadsemigroup.ou_models import (
    GaussianState,
    gram_verdict,
    lambda_generators,
    omega0_discrepancy,
    oracle_comparison,
    ou_build,
    subspace_angles,
)
from quadsemigroup.singular_space import kernel_chain
from quadsemigroup.weyl_galerkin import (
    commutation_defect,
    decay_exponent,
    galerkin_eigenvalues,
    linear_observable,
    propagate,
    quantize,
    smooth_random_state,
    spectrum_bottom,
    subelliptic_ratio,
)

WINDOW = (10**-2.5, 10**-1)


def test_criterion_01_kramers_decay_exponents(acceptance_line):
    q = kramers_symbol()
    N = 128
    op = quantize(q, N)
    u0 = smooth_random_state(2, N, seed=0)
    t = np.logspace(np.log10(WINDOW[0]), np.log10(WINDOW[1]), 16)
    traj = propagate(op, u0, t)
    targets = {
        "e_v": ([0, 1.0, 0, 0], -0.5, 0.1),
        "e_eta": ([0, 0, 0, 1.0], -0.5, 0.1),
        "e_x": ([1.0, 0, 0, 0], -1.5, 0.15),
        "e_xi": ([0, 0, 1.0, 0], -1.5, 0.15),
    }
    parts, ok = [], True
    for label, (X, expected, tol) in targets.items():
        L = linear_observable(X, N, n=2).A
        vals = np.linalg.norm(L @ traj.T, axis=0)
        fit = decay_exponent(t, vals, WINDOW)
        good = abs(fit.slope - expected) <= tol and fit.r_squared >= 0.98
        ok &= good
        parts.append(f"{label} slope={fit.slope:+.3f} (want {expected}±{tol}) r2={fit.r_squared:.3f}")
    acceptance_line(1, ok, "; ".join(parts))
    assert ok


def test_criterion_02_spectrum(acceptance_line):
    ho = galerkin_eigenvalues(quantize(harmonic_oscillator(), 64), m=10)
    ho_err = float(np.max(np.abs(np.sort(ho.real) - (np.arange(10) + 0.5))) + np.max(np.abs(ho.imag)))
    q = kramers_symbol()
    gal = np.sort_complex(galerkin_eigenvalues(quantize(q, 64), m=6))
    lat = np.sort_complex(spectrum_bottom(q, m=6).eigenvalues)
    kr_err = float(np.max(np.abs(np.sort(gal.real) - np.sort(lat.real))))
    rng = np.random.default_rng(2)
    om_err = max(
        omega0_discrepancy(random_hypoelliptic_model(rng, int(rng.integers(1, 5))))[2] for _ in range(100)
    )
    ok = ho_err <= 1e-8 and kr_err <= 1e-3 and om_err <= 1e-12
    acceptance_line(
        2, ok, f"HO err={ho_err:.2e} (<=1e-8); Kramers head err={kr_err:.2e} (<=1e-3); omega0 err={om_err:.2e} (<=1e-12)"
    )
    assert ok


def test_criterion_03_multiplier_suite(acceptance_line):
    rng = np.random.default_rng(3)
    grid = default_grid(50)
    worst_sign, worst_margin, worst_bracket, inadmissible = np.inf, np.inf, 0.0, 0
    for _ in range(200):
        q = random_accretive_symbol(rng, int(rng.integers(1, 4)))
        form = time_form(q, kernel_chain(q))
        c = form.coeffs
        worst_sign = min(worst_sign, np.min(c.a), np.min(c.b), np.min(sign_margins(c)))
        worst_margin = min(worst_margin, verify_lower_bound(form, grid)["margin"])
        worst_bracket = max(worst_bracket, max(hamilton_flow_bracket(form, t)[1] for t in grid))
        res = verify_dissipation(form, grid)
        inadmissible += not (np.isfinite(res.C_min) and res.admissible)
    ok = worst_sign > 0 and worst_margin >= -1e-10 and worst_bracket <= 1e-9 and inadmissible == 0
    acceptance_line(
        3,
        ok,
        f"min coefficient/sign margin={worst_sign:.3g} (>0); lower-bound margin={worst_margin:.2e} (>=-1e-10); "
        f"bracket routes={worst_bracket:.2e} (<=1e-9); dissipation failures={inadmissible}/200",
    )
    assert ok


def test_criterion_04_kalman_gram(acceptance_line):
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(1000):
        Q, B = random_kalman_pair(rng, int(rng.integers(1, 5)))
        m = ou_build(Q, B)
        mismatches += m.hypoelliptic != gram_verdict(m)[0]
    ok = mismatches == 0
    acceptance_line(4, ok, f"Kalman/Gram disagreements {mismatches}/1000")
    assert ok


def test_criterion_05_lyapunov_and_subspaces(acceptance_line):
    rng = np.random.default_rng(5)
    res, ang = 0.0, 0.0
    for _ in range(100):
        m = random_hypoelliptic_model(rng, int(rng.integers(1, 5)))
        res = max(res, m.lyapunov_residual)
        ang = max(ang, max(subspace_angles(m)))
    ok = res <= 1e-10 and ang <= 1e-8
    acceptance_line(5, ok, f"Lyapunov residual={res:.2e} (<=1e-10); max angle={ang:.2e} (<=1e-8)")
    assert ok


def test_criterion_06_oracle(acceptance_line):
    g = GaussianState(mean=np.array([0.3, -0.2]), covariance=np.array([[0.8, 0.1], [0.1, 0.6]]))
    errs = oracle_comparison(kramers_model(), g, [0.1, 0.5, 1.0], N=128)
    ok = max(errs) <= 1e-4
    acceptance_line(6, ok, "relative L2 errors " + ", ".join(f"{e:.2e}" for e in errs) + " (<=1e-4)")
    assert ok


def test_criterion_07_commutation(acceptance_line):
    ho = commutation_defect(harmonic_oscillator(), [1.0, 0.0], 0.3, 64)
    q = kramers_symbol()
    seqs = {
        label: [commutation_defect(q, X, 0.2, N) for N in (32, 64, 128)]
        for label, X in (("e_x", [1.0, 0, 0, 0]), ("e_eta", [0, 0, 0, 1.0]))
    }
    decreasing = all(s[0] > s[1] > s[2] for s in seqs.values())
    ok = ho <= 1e-8 and decreasing
    text = "; ".join(f"Kramers {k}: " + " > ".join(f"{v:.2e}" for v in s) for k, s in seqs.items())
    acceptance_line(7, ok, f"HO defect={ho:.2e} (<=1e-8); {text}")
    assert ok


def test_criterion_08_contraction_and_accretivity(acceptance_line):
    rng = np.random.default_rng(8)
    t = np.linspace(0.0, 2.0, 21)
    rise = -np.inf
    symbols = [kramers_symbol(), harmonic_oscillator()] + [
        random_accretive_symbol(rng, int(rng.integers(1, 3))) for _ in range(8)
    ]
    for q in symbols:
        N = 16 if q.n == 2 else 40
        op = quantize(q, N)
        for seed in range(3):
            norms = np.linalg.norm(propagate(op, smooth_random_state(q.n, N, seed), t), axis=1)
            rise = max(rise, float(np.max(np.diff(norms))))
    worst = np.inf
    for q, count in ((kramers_symbol(), 500), (random_accretive_symbol(rng, 2), 500)):
        A = quantize(q, 16).A
        u = rng.standard_normal((A.shape[0], count)) + 1j * rng.standard_normal((A.shape[0], count))
        vals = np.einsum("ij,ij->j", u.conj(), A @ u).real / np.einsum("ij,ij->j", u.conj(), u).real
        worst = min(worst, float(vals.min()))
    ok = rise <= 1e-8 and worst >= -1e-10
    acceptance_line(8, ok, f"largest norm increase={rise:.2e} (<=1e-8); min Re<Au,u>/|u|^2={worst:.3g} (>=-1e-10) on 1000 states")
    assert ok


def test_criterion_09_subelliptic_ratios(acceptance_line):
    q = kramers_symbol()
    cases = {"global 2/3": dict(k="global", k0=1), "Lambda_0": dict(k=0), "Lambda_1^(2/3)": dict(k=1)}
    parts, ok = [], True
    for label, kw in cases.items():
        lo = subelliptic_ratio(q, ensemble_size=500, N=64, N_ref=128, **kw)["max"]
        hi = subelliptic_ratio(q, ensemble_size=500, N=128, N_ref=128, **kw)["max"]
        change = abs(hi - lo) / lo
        ok &= change <= 0.2
        parts.append(f"{label}: {lo:.4f} -> {hi:.4f} ({100 * change:.2f}%)")
    acceptance_line(9, ok, "; ".join(parts) + " (<=20%)")
    assert ok


def test_criterion_10_generator_identities(acceptance_line):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        m = random_hypoelliptic_model(rng, int(rng.integers(1, 5)))
        for j in range(m.k0 + 1):
            r = lambda_generators(m, j)
            worst = max(worst, r["symbol_residual"], r["generator_residual"], r["sign_residual"])
    ok = worst <= 1e-12
    acceptance_line(10, ok, f"max residual={worst:.2e} (<=1e-12)")
    assert ok


def test_criterion_11_determinism_and_exit_codes(acceptance_line, tmp_path, capsys):
    a, b, m = (tmp_path / name for name in ("a.json", "b.json", "m.json"))
    code_a = main(["verify", "--seed", "11", "--out-json", str(a)])
    code_b = main(["verify", "--seed", "11", "--out-json", str(b)])
    code_m = main(["verify", "--seed", "11", "--self-test-mutation", "--out-json", str(m)])
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code_bad = main(["analyze", "--input", str(bad)])
    capsys.readouterr()
    same = a.read_bytes() == b.read_bytes()
    mutated_status = json.loads(m.read_text())["status"]
    ok = same and code_a == code_b == 0 and code_m == 1 and mutated_status == "fail" and code_bad == 2
    acceptance_line(
        11,
        ok,
        f"identical reports={same}; exit codes clean={code_a}/{code_b} mutation={code_m} bad input={code_bad}",
    )
    assert ok
