"""Acceptance suite: one test and one PASS/FAIL summary line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear
under "acceptance criteria" at the end of the session (and inline with -s).
"""
import time

import numpy as np
import pytest
from scipy import stats

from entsim import bridge as Br
from entsim import cavity as Cv
from entsim import distill as D
from entsim import gaussian as G
from entsim import jumpmc as J
from entsim.fock import FockDensityMatrix, log_negativity_fock, partial_trace, tmss_fock, vn_entropy_fock

from .conftest import random_density
from .oracles import direct_gaussify, procrustean_direct

PSI_A = [1.0, 0.5]


def test_criterion_01_cavity_closed_forms(report):
    t0 = time.perf_counter()
    p = float(Cv.success_probability(0.5))
    f = float(Cv.fidelity_ideal(0.5))
    elapsed = time.perf_counter() - t0
    ok = abs(p - 0.4069) <= 1e-4 and abs(f - 0.99577) <= 1e-5 and 1 - f < 4.3e-3 and elapsed < 1.0
    report(1, ok, f"P(0.5)={p:.5f} F(0.5)={f:.6f} runtime={elapsed * 1e3:.2f} ms")
    assert ok


def test_criterion_02_asymmetry(report):
    f0 = float(Cv.fidelity_asymmetric(0.8, 0.0))
    f1 = float(Cv.fidelity_asymmetric(0.8, 0.2))
    worst = Cv.collimation_worst_case(Cv.paris_geometry(), 0.25e-3)
    checks = {"F(eps=0)=0.96": abs(f0 - 0.96) <= 0.005, "F(eps=0.2)=0.93": abs(f1 - 0.93) <= 0.005,
              "eps_worst<=0.2": worst <= 0.2}
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(2, ok, f"F(0.8,0)={f0:.4f} F(0.8,0.2)={f1:.4f} eps_worst={worst:.4f}"
           + (f" failed: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_03_detector_repetition(report):
    v = Cv.detection_run_probability(0.4, 0.407)
    ok = abs(v - 0.105) <= 0.01
    report(3, ok, f"D^(1/P)={v:.4f}")
    assert ok


def _first_click_times(delta, dt, n_traj, seed):
    p = J.IonCavityParams(Omega=2.0, Delta=delta, kappa=10.0)
    cfg = J.JumpConfig(params=p, dt=dt, T_wait=30 * p.t_av, eta=1.0, n_traj=n_traj, seed=seed,
                       stop_at_first_click=True)
    recs, _ = J.run_trajectories(cfg)
    t = np.array([r.t_click for r in recs if r.outcome == "click"])
    return p, cfg, t


def test_criterion_04_waiting_time(report):
    t0 = time.perf_counter()
    p, cfg, t = _first_click_times(200.0, 10.0, 10_000, seed=2024)
    t_av = p.t_av
    mean, err = t.mean(), t.std(ddof=1) / np.sqrt(len(t))
    # exponential with rate 1/T_av, conditioned on a click before T_wait
    trunc = 1 - np.exp(-cfg.T_wait / t_av)
    ks = stats.kstest(t, lambda x: (1 - np.exp(-x / t_av)) / trunc)
    p20, _, t20 = _first_click_times(20.0, 0.1, 10_000, seed=2025)
    mean20, err20 = t20.mean(), t20.std(ddof=1) / np.sqrt(len(t20))
    elapsed = time.perf_counter() - t0
    ok = (len(t) == 10_000 and abs(mean - t_av) <= 3 * err and ks.pvalue > 0.01
          and p20.t_av == pytest.approx(1000.0) and abs(mean20 - 1000.0) <= 3 * err20)
    report(4, ok, f"Delta=200: <t>={mean:.0f}+-{err:.0f} vs T_av={t_av:.0f}, KS p={ks.pvalue:.3f}; "
           f"Delta=20: <t>={mean20:.1f}+-{err20:.1f} vs 1000; {elapsed:.1f} s")
    assert ok


def _mc_stats(eta=1.0, gamma=0.1, n_traj=20_000, seed=7):
    p = J.IonCavityParams(Omega=2.0, Delta=20.0, kappa=10.0, gamma_A=gamma, gamma_B=gamma)
    cfg = J.JumpConfig(params=p, dt=0.05, T_wait=100.0, eta=eta, n_traj=n_traj, seed=seed,
                       stop_at_first_click=True)
    return J.run_trajectories(cfg)[1]


def test_criterion_05_imperfections(report):
    ref = _mc_stats(1.0)
    ratio_ok, parts = True, []
    for eta in (0.25, 0.5, 0.75):
        s = _mc_stats(eta)
        ratio = s.p_success / ref.p_success
        err = ratio * np.hypot(s.p_success_err / s.p_success, ref.p_success_err / ref.p_success)
        ratio_ok &= abs(ratio - eta) <= 3 * err
        parts.append(f"{ratio:.3f}+-{err:.3f}")
    gammas = np.array([0.0, 0.05, 0.1, 0.15, 0.2])
    infid = np.array([1 - _mc_stats(1.0, g).mean_fidelity for g in gammas])
    fit = stats.linregress(gammas, infid)
    monotone = bool(np.all(np.diff(infid) > 0))
    ok = ratio_ok and monotone and fit.rvalue ** 2 > 0.9
    report(5, ok, f"p(eta)/p(1) at eta=.25,.5,.75: {', '.join(parts)}; "
           f"1-F(gamma)={np.round(infid, 4).tolist()} R^2={fit.rvalue ** 2:.4f}")
    assert ok


def test_criterion_06_pure_gaussification(report):
    out, prob = D.gaussify_pure_step(PSI_A)
    step_ok = np.array_equal(out, [1.0, 0.5, 0.125]) and abs(prob - 0.81) <= 1e-12
    fixed_err = 0.0
    for zeta in (0.3, -0.6, 0.45j):
        a = zeta ** np.arange(12)
        fixed_err = max(fixed_err, np.max(np.abs(D.gaussify_pure_step(a)[0][:12] - a)))
    increasing = True
    for x in np.round(np.arange(0.1, 1.0, 0.1), 1):
        en = D.run_protocol(D.schmidt_density([1.0, x]), 2, cutoff=8).column("log_negativity")
        increasing &= bool(np.all(np.diff(en) > 0))
    ok = step_ok and fixed_err <= 1e-12 and increasing
    report(6, ok, f"step={np.real(out).tolist()} p={prob:.15f} fixed-point err={fixed_err:.1e} "
           f"E_N increasing={increasing}")
    assert ok


def _closed_form_limit_gamma(lam, tau):
    a, b, c = tau + lam ** 2 * (2 * tau - 1), lam ** 2 + tau, 2 * lam * tau
    return np.array([[a, 0, c, 0], [0, a, 0, -c], [c, 0, b, 0], [0, -c, 0, b]]) / (tau - lam ** 2)


def _tail_ratio(state):
    """Ratio of the diagonal weight in total photon number 12 to that in 10 (vacuum normalized).

    Below 1 the iterates concentrate on low photon numbers; above 1 the weight
    runs off to the cutoff.
    """
    s = D.vacuum_normalized(state)
    d = [sum(s[a, n - a, a, n - a].real for a in range(n + 1)) for n in range(13)]
    return d[12] / d[10]


def test_criterion_07_mixed_gaussification(report):
    rng = np.random.default_rng(7)
    oracle_err = 0.0
    for _ in range(50):
        rho, sigma = random_density(rng, 5), random_density(rng, 5)
        res = D.gaussify_step_asymmetric(FockDensityMatrix(rho), FockDensityMatrix(sigma), out_cutoff=10,
                                         max_truncation=1.0)
        o = direct_gaussify(rho, sigma)
        tr = np.einsum("abab->", o).real
        oracle_err = max(oracle_err, np.max(np.abs(res.state.entries - o / tr)), abs(res.probability - tr))
    gamma_err = 0.0
    for lam, tau in [(0.3, 0.5), (0.5, 0.8), (0.2, 0.25), (0.6, 0.9), (0.4, 1.0)]:
        g, conv = D.gaussify_limit(D.mixed_example_state(lam, tau))
        gamma_err = max(gamma_err, np.max(np.abs(g - _closed_form_limit_gamma(lam, tau))) if conv else np.inf)
    mismatches = []
    for tau in (0.2, 0.4, 0.6, 0.8, 1.0):
        for lam in (0.15, 0.35, 0.55, 0.75, 0.95):
            rho0 = D.mixed_example_state(lam, tau)
            tr = D.run_protocol(rho0, 10, cutoff=12, keep_states=True, max_truncation=1.0)
            expected = tau > lam ** 2
            if (_tail_ratio(tr.states[-1]) < 1) != expected or D.gaussify_limit(rho0)[1] != expected:
                mismatches.append((tau, lam))
    eps = 0.5
    tr = D.run_protocol(D.topure_example_state(eps), 10, cutoff=14, keep_states=True, max_truncation=1e-6)
    lim = D.extrapolate_limit(tr.states, order=3)
    ev = np.clip(lim.eigenvalues(), 0, None)
    ev = ev[ev > 0] / ev.sum()
    s_lim = float(-np.sum(ev * np.log2(ev)))
    target = tmss_fock(np.arctanh(-eps / 2), 0.0, 14).to_density()
    target_err = np.max(np.abs(D.vacuum_normalized(lim) - D.vacuum_normalized(target)))
    ok = oracle_err <= 1e-10 and gamma_err <= 1e-9 and not mismatches and s_lim < 1e-6 and target_err < 1e-8
    report(7, ok, f"oracle err={oracle_err:.1e} Gamma err={gamma_err:.1e} dichotomy mismatches={mismatches} "
           f"topure limit S={s_lim:.1e} (TMSS dist {target_err:.1e})")
    assert ok


def test_criterion_08_gaussian_machinery(report):
    en_err = 0.0
    for r in (0.1, 0.4, 0.8, 1.2):
        for tau in (0.1, 0.3, 0.5, 0.8, 1.0):
            st_ = G.absorb(G.make_tmss(r), tau)
            en_err = max(en_err, abs(G.log_negativity_gaussian(st_) + np.log2(1 - tau * (1 - np.exp(-2 * r)))))
    rng = np.random.default_rng(8)
    vac_err = trip_err = 0.0
    for _ in range(20):
        g = _random_gamma(rng)
        rho = Br.gaussian_to_fock(g, 3)
        vac_err = max(vac_err, abs(rho.entries[0, 0, 0, 0] - 4 / np.sqrt(np.linalg.det(g + np.eye(4)))))
        trip_err = max(trip_err, np.max(np.abs(Br.sigma_to_covariance(Br.sigma_from_state(rho)) - g)))
    ok = en_err <= 1e-10 and vac_err <= 1e-10 and trip_err <= 1e-9
    report(8, ok, f"E_N closed form err={en_err:.1e} rho_0000 err={vac_err:.1e} round trip err={trip_err:.1e}")
    assert ok


def _random_gamma(rng):
    nb = rng.uniform(0, 0.5, 2)
    state = G.GaussianState(np.diag(np.repeat(2 * nb + 1, 2)))
    T = rng.uniform(0.2, 1.0)
    for op in (G.make_squeezer(rng.uniform(-0.6, 0.6)).on_modes([0], 2),
               G.make_squeezer(rng.uniform(-0.6, 0.6)).on_modes([1], 2),
               G.make_phase_shift(rng.uniform(0, 2 * np.pi)).on_modes([0], 2),
               G.make_beam_splitter(T, np.sqrt(1 - T * T))):
        state = G.apply(op, state)
    return state.covariance


def test_criterion_09_procrustean(report):
    r = np.arctanh(0.1)
    s_in = vn_entropy_fock(partial_trace(tmss_fock(r, 0.0, 20), 1))
    _, p2 = D.procrustean_pure(r, 0.1, 2, 12)
    elem_err = 0.0
    for rr, tau, T in [(np.arctanh(0.2), 0.5, 0.3), (np.arctanh(0.3), 0.8, 0.6), (np.arctanh(0.1), 0.3, 0.1)]:
        rin = Br.gaussian_to_fock(G.absorb(G.make_tmss(rr), tau).covariance, 8).entries
        o = procrustean_direct(rin, T, 1)
        blk = o[:2, :2, :2, :2] / o[0, 0, 0, 0]
        elem_err = max(elem_err, np.max(np.abs(D.procrustean_mixed_elements(rr, tau, T).entries - blk)))
    ok = abs(s_in - 0.08) <= 0.002 and abs(p2 - 3e-4) <= 0.2 * 3e-4 and elem_err <= 1e-8
    report(9, ok, f"S(tanh r=0.1)={s_in:.5f} P(m=2,T=0.1)={p2:.3e} element err={elem_err:.1e}")
    assert ok


def test_criterion_10_imperfect_detectors(report):
    rho = D.schmidt_density(PSI_A, 4)
    a = D.gaussify_step_inefficient(rho, 1.0)
    b = D.gaussify_mixed_step(rho)
    exact = np.array_equal(a.state.entries, b.state.entries) and a.probability == b.probability
    e_in = log_negativity_fock(rho)
    etas = np.round(np.linspace(0.1, 1.0, 10), 2)
    en = np.array([log_negativity_fock(D.gaussify_step_inefficient(rho, e).state) for e in etas])
    monotone = bool(np.all(np.diff(en) >= 0))
    gain = bool(np.all(en[etas >= 0.5] > e_in))
    ok = exact and monotone and gain
    report(10, ok, f"eta=1 exact={exact} E_N in={e_in:.4f} after one step at eta=.5/.6/1: "
           f"{en[4]:.4f}/{en[5]:.4f}/{en[-1]:.4f} monotone={monotone}")
    assert ok


CHANNEL_SWEEPS = {"absorb": [1.0, 0.98, 0.95, 0.9, 0.8], "dephase": [1.0, 0.95, 0.9, 0.8, 0.5],
                  "phase_diffuse": [0.0, 0.1, 0.2, 0.4, 0.8]}


def test_criterion_11_decoherence_properties(report):
    inputs = {"psi_a": D.schmidt_density(PSI_A), "rho_b": D.mixed_example_state(0.5, 0.5)}
    ident = monotone = two_sided = True
    for rho in inputs.values():
        clean = D.run_protocol(rho, 2, cutoff=8, keep_states=True)
        for kind, values in CHANNEL_SWEEPS.items():
            idt = D.run_protocol(rho, 2, channel=D.ChannelSpec(kind, values[0]), cutoff=8, keep_states=True)
            ident &= all(np.array_equal(x.entries, y.entries) for x, y in zip(idt.states, clean.states))
            en = np.array([D.run_protocol(rho, 2, channel=D.ChannelSpec(kind, v), cutoff=8)
                           .column("log_negativity")[1:] for v in values])
            monotone &= bool(np.all(np.diff(en, axis=0) < 0))
        for kappa in (0.9, 0.7, 0.5):
            ch = D.ChannelSpec("dephase", kappa)
            one = D.run_protocol(rho, 2, channel=ch, cutoff=8).column("log_negativity")[1:]
            both = D.run_protocol(rho, 2, channel=ch, channel_both=True, cutoff=8).column("log_negativity")[1:]
            two_sided &= bool(np.all(both < one))
    ok = ident and monotone and two_sided
    report(11, ok, f"identity limits={ident} monotone degradation={monotone} "
           f"two-sided dephasing worse={two_sided}")
    assert ok
