"""The twelve acceptance criteria, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the summary block
``acceptance criteria`` at the end of the session lists every line.
"""

import cmath
import math
import time

import numpy as np
import pytest

from qhjbands.action import ActionConstants, action_arrays, amplitude_profile, qshje_residual
from qhjbands.bloch import (SuperpositionParams, apply_mobius, b_minus_a_factored, bloch_defect,
                            bohm_defect, construct_bloch_action, dispersion_via_action,
                            interface_quantities, mobius_coefficients,
                            squared_difference_identity)
from qhjbands.errors import TanPoleError
from qhjbands.matching import propagate_constants, remap_constants
from qhjbands.model import (BasisKind, BasisPair, LatticeSpec, Regime, Region, basis_for_region,
                            schrodinger_residual, wavenumbers)
from qhjbands.spectrum import dispersion_rhs, find_bands, transfer_matrix_oracle

LAT = LatticeSpec(10.0, 1.0, 1.0)


def first_three_band_energies(count=20):
    bands = find_bands(LAT, 0.1, 40.0)[:3]
    per = [count // 3 + (1 if i < count % 3 else 0) for i in range(3)]
    out = []
    for band, n in zip(bands, per):
        width = band.e_hi - band.e_lo
        out.extend(np.linspace(band.e_lo + 0.02 * width, band.e_hi - 0.02 * width, n))
    return [float(e) for e in out]


_RUNS = {}


def bloch_run(energy, gamma, delta=0.0):
    key = (energy, gamma, delta)
    if key not in _RUNS:
        sp = (SuperpositionParams.bohm() if (gamma, delta) == (1.0, 0.0)
              else SuperpositionParams.from_gamma_delta(gamma, delta))
        _RUNS[key] = construct_bloch_action(energy, LAT, sp)
    return _RUNS[key]


SAMPLE_X = np.linspace(-LAT.d, LAT.c, 22)[1:-1]


def _oracle_gap(lo, hi, count):
    es = np.linspace(lo, hi, count + 2)[1:-1]
    start = time.perf_counter()
    f = [dispersion_rhs(float(e), LAT) for e in es]
    elapsed = time.perf_counter() - start
    oracle = [transfer_matrix_oracle(float(e), LAT)[1] for e in es]
    return float(np.max(np.abs(np.subtract(f, oracle)))), elapsed


def test_criterion_01_dispersion_above(criterion):
    rep = criterion(1, "E > V0 closed form vs transfer matrix")
    gap, elapsed = _oracle_gap(10.01, 60.0, 500)
    rep.check("max |diff|", gap, 1e-12)
    rep.check("runtime s", elapsed, 1.0)
    rep.finish()


def test_criterion_02_dispersion_below(criterion):
    rep = criterion(2, "E < V0 closed form vs transfer matrix")
    gap, elapsed = _oracle_gap(0.01, 9.99, 500)
    rep.check("max |diff|", gap, 1e-12)
    rep.check("runtime s", elapsed, 1.0)
    rep.finish()


def _near_tan_pole(angle, width=1e-6):
    return abs(math.remainder(angle - math.pi / 2, math.pi)) < width / 2


def test_criterion_03_action_route(criterion):
    rep = criterion(3, "dispersion via reduced action vs closed form")
    rng = np.random.default_rng(2024)
    worst = {Regime.ABOVE: 0.0, Regime.BELOW: 0.0}
    start = time.perf_counter()
    for regime in worst:
        accepted = 0
        while accepted < 200:
            lat = LatticeSpec(rng.uniform(1.0, 20.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
            if regime is Regime.ABOVE:
                energy = lat.v0 + rng.uniform(0.01, 40.0)
                barrier_angle = math.sqrt(energy - lat.v0) * lat.d
            else:
                energy = rng.uniform(0.01, lat.v0 - 0.01)
                barrier_angle = 0.0
            if _near_tan_pole(math.sqrt(energy) * lat.c) or (
                    regime is Regime.ABOVE and _near_tan_pole(barrier_angle)):
                continue
            accepted += 1
            f = dispersion_rhs(energy, lat)
            for gamma in (0.3, 0.7, 1.0):
                g = dispersion_via_action(energy, lat, SuperpositionParams.from_gamma_delta(gamma, 0.0))
                worst[regime] = max(worst[regime], abs(g - f))
    elapsed = time.perf_counter() - start
    rep.check("above max |diff|", worst[Regime.ABOVE], 1e-9)
    rep.check("below max |diff|", worst[Regime.BELOW], 1e-9)
    rep.check("runtime s", elapsed, 5.0)
    rep.finish()


def _dense_edges(lo, hi, count):
    """Band edges from a vectorised transfer-matrix half trace with linear interpolation."""
    es = np.linspace(lo, hi, count)
    k2 = np.sqrt(es)
    c, d, v0 = LAT.c, LAT.d, LAT.v0
    kb = np.sqrt(np.abs(es - v0) + 0.0)
    above = es > v0
    cb = np.where(above, np.cos(kb * d), np.cosh(kb * d))
    sb_over = np.where(above, np.sin(kb * d) / np.where(kb > 0, kb, 1), np.sinh(kb * d) / np.where(kb > 0, kb, 1))
    sb_times = np.where(above, -kb * np.sin(kb * d), kb * np.sinh(kb * d))
    # half trace of [[cb, sb/k], [sb*k, cb]] @ [[cw, sw/k2], [-k2 sw, cw]]
    cw, sw = np.cos(k2 * c), np.sin(k2 * c)
    half = 0.5 * (cb * cw - sb_over * k2 * sw + sb_times * sw / k2 + cb * cw)
    g = np.abs(half) - 1.0
    idx = np.where(np.sign(g[:-1]) != np.sign(g[1:]))[0]
    return [float(es[i] - g[i] * (es[i + 1] - es[i]) / (g[i + 1] - g[i])) for i in idx]


def test_criterion_04_band_structure(criterion):
    rep = criterion(4, "band edges on (0.1, 40)")
    start = time.perf_counter()
    bands = find_bands(LAT, 0.1, 40.0)
    elapsed = time.perf_counter() - start
    rep.check("bands missing below 3", max(0, 3 - len(bands)), 1)
    overlaps = sum(1 for a, b in zip(bands, bands[1:]) if not a.e_hi < b.e_lo)
    rep.check("overlapping pairs", overlaps, 1)
    edges = [e for b in bands for e, clipped in ((b.e_lo, b.clipped_lo), (b.e_hi, b.clipped_hi))
             if not clipped]
    rep.check("max ||f|-1| at edges", max(abs(abs(dispersion_rhs(e, LAT)) - 1.0) for e in edges), 1e-9)
    dense = _dense_edges(0.1, 40.0, 1_000_000)
    mismatch = max(min(abs(e - o) for o in dense) for e in edges) if len(dense) == len(edges) else math.inf
    rep.check("max edge offset vs dense scan", mismatch, 1e-6)
    rep.check("runtime s", elapsed, 5.0)
    rep.finish()


def test_criterion_05_bloch_condition(criterion):
    rep = criterion(5, "Bloch condition on constructed S0")
    worst = 0.0
    for gamma in (0.5, 1.0):
        for energy in first_three_band_energies():
            ba = bloch_run(energy, gamma, 0.3)
            for x in SAMPLE_X:
                a, b = ba.sample(float(x)), ba.sample(float(x) + LAT.period)
                defect, n = bloch_defect(a.s0, b.s0, ba.sp, ba.ke)
                worst = max(worst, defect)
                assert n == ba.n
    rep.check("max defect", worst, 1e-9)
    rep.finish()


def test_criterion_06_mobius(criterion):
    rep = criterion(6, "Moebius form and trace identity")
    worst = 0.0
    for gamma in (0.5, 1.0):
        for energy in first_three_band_energies():
            ba = bloch_run(energy, gamma, 0.3)
            mp = mobius_coefficients(ba.sp, ba.ke)
            for x in SAMPLE_X:
                a, b = ba.sample(float(x)), ba.sample(float(x) + LAT.period)
                worst = max(worst, abs(cmath.exp(2j * b.s0) - apply_mobius(mp, cmath.exp(2j * a.s0))))
    rep.check("max Moebius mismatch", worst, 1e-8)
    rng = np.random.default_rng(6)
    trace = 0.0
    for _ in range(100):
        g, dl, ke = rng.uniform(-1, 1), rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi)
        mp = mobius_coefficients(SuperpositionParams.from_gamma_delta(g, dl), ke)
        trace = max(trace, abs(mp.trace - 4 * g * (1 + cmath.exp(2j * ke))))
    rep.check("max trace error", trace, 1e-12)
    rep.finish()


def test_criterion_07_bohm_limit(criterion):
    rep = criterion(7, "Bohm limit affine shift")
    worst_d, worst_f = 0.0, 0.0
    for energy in first_three_band_energies():
        ba = bloch_run(energy, 1.0, 0.0)
        for x in SAMPLE_X:
            a, b = ba.sample(float(x)), ba.sample(float(x) + LAT.period)
            d, n_prime, shift = bohm_defect(a.s0, b.s0, ba.ke)
            worst_d = max(worst_d, d)
            worst_f = max(worst_f, abs(shift - round(shift)))
    rep.check("max shift defect", worst_d, 1e-9)
    rep.check("max F-shift distance to integer", worst_f, 1e-9)
    rep.finish()


def _region_grids(ba, h):
    for seg in ba.segments:
        if seg.hi <= -LAT.d or seg.lo >= LAT.c + LAT.d:
            continue
        n = int(round((seg.hi - seg.lo) / h))
        yield seg, seg.lo + h * np.arange(1, n)


def test_criterion_08_qshje(criterion):
    rep = criterion(8, "QSHJE finite-difference residual")
    energies = first_three_band_energies(6)
    coarse = fine = 0.0
    for energy in energies:
        ba = bloch_run(energy, 0.5, 0.3)
        for h, slot in ((1e-3, "coarse"), (5e-4, "fine")):
            for seg, grid in _region_grids(ba, h):
                res = qshje_residual(grid, amplitude_profile(grid, seg.basis, seg.constants), energy, LAT)
                if slot == "coarse":
                    coarse = max(coarse, res)
                else:
                    fine = max(fine, res)
    rep.check("max residual at h=1e-3", coarse, 1e-6)
    rep.check("|ratio(h)/ratio(h/2) - 4|", abs(coarse / fine - 4.0), 0.5)
    rep.finish()


def test_criterion_09_wavefunction(criterion):
    rep = criterion(9, "reconstructed wavefunction")
    worst_eq, worst_bloch = 0.0, 0.0
    for gamma in (0.5, 1.0):
        for energy in first_three_band_energies(6):
            ba = bloch_run(energy, gamma, 0.3)
            alpha, beta = ba.sp.alpha, ba.sp.beta
            for seg, grid in _region_grids(ba, 1e-4):
                s0, ds0, _, _ = action_arrays(grid, seg.basis, seg.constants)
                phi = np.abs(ds0) ** -0.5 * (alpha * np.exp(1j * s0) + beta * np.exp(-1j * s0))
                worst_eq = max(worst_eq, schrodinger_residual(phi.real, energy, LAT, grid),
                               schrodinger_residual(phi.imag, energy, LAT, grid))
            vals = [(ba.wavefunction(float(x)), ba.wavefunction(float(x) + LAT.period)) for x in SAMPLE_X]
            peak = max(abs(v) for pair in vals for v in pair)
            worst_bloch = max(worst_bloch, max(abs(b - cmath.exp(1j * ba.ke) * a) for a, b in vals) / peak)
    rep.check("max Schroedinger residual (h=1e-4)", worst_eq, 1e-7)
    rep.check("max Bloch mismatch / max|phi|", worst_bloch, 1e-9)
    rep.finish()


def test_criterion_10_identities(criterion):
    rep = criterion(10, "algebraic identities and trig/trig matching")
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(1000):
        a, b = rng.uniform(-5, 5, 2)
        lhs, rhs = squared_difference_identity(a, b, rng.uniform(-1, 1))
        worst = max(worst, abs(lhs - rhs))
    rep.check("squared-difference identity", worst, 1e-12)
    worst = 0.0
    checked = 0
    while checked < 1000:
        lat = LatticeSpec(rng.uniform(1, 20), rng.uniform(0.5, 2), rng.uniform(0.5, 2))
        wn = wavenumbers(rng.uniform(0.1, 40), lat)
        if wn.regime is Regime.THRESHOLD:
            continue
        mu1, nu1 = rng.uniform(-3, 3, 2)
        try:
            iq = interface_quantities(mu1, nu1, wn, lat)
        except TanPoleError:
            continue
        checked += 1
        diff = iq.b_val - iq.a_val
        worst = max(worst, abs(diff - b_minus_a_factored(mu1, wn, lat)) / max(1.0, abs(diff)))
    rep.check("B - A factorisation (relative)", worst, 1e-12)
    mismatches = 0
    for _ in range(200):
        k1, k2 = rng.uniform(0.1, 8, 2)
        left = ActionConstants(rng.uniform(0.1, 5) * rng.choice([-1, 1]), rng.normal(), rng.normal())
        right = propagate_constants(left, BasisPair(BasisKind.TRIG, k1), BasisPair(BasisKind.TRIG, k2), 0.0)
        mismatches += right != ActionConstants(k1 * left.mu / k2, left.nu, left.l)
    rep.check("trig/trig closed-form mismatches", mismatches, 1)
    rep.finish()


def test_criterion_11_threshold(criterion):
    rep = criterion(11, "threshold continuity")
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        lat = LatticeSpec(rng.uniform(1, 20), rng.uniform(0.3, 2), rng.uniform(0.3, 2))
        for eps in (1e-4, 1e-5, 1e-6):
            worst = max(worst, abs(dispersion_rhs(lat.v0 + eps, lat) - dispersion_rhs(lat.v0 - eps, lat)) / eps)
    rep.check("max |jump| / eps", worst, 10.0)
    rep.finish()


def test_criterion_12_recombination(criterion):
    rep = criterion(12, "basis recombination invariance")
    rng = np.random.default_rng(12)
    worst = 0.0
    done = 0
    wn = wavenumbers(12.0, LAT)
    while done < 50:
        region = Region.WELL if done % 2 else Region.BARRIER
        basis = basis_for_region(region, wn, origin=rng.uniform(-0.5, 0.5))
        kc = ActionConstants(rng.uniform(0.2, 3) * rng.choice([-1, 1]), rng.normal(), rng.normal())
        m = rng.normal(size=(2, 2))
        if abs(np.linalg.det(m)) < 0.1:
            continue
        new = basis.recombined(m)
        try:
            remapped = remap_constants(kc, basis, new, 0.1234)
        except ArithmeticError:
            continue
        grid = np.linspace(-1.0, 1.0, 100)
        ref = action_arrays(grid, basis, kc)[0]
        got = action_arrays(grid, new, remapped)[0]
        offset = round(float(np.mean(got - ref)) / math.pi) * math.pi
        worst = max(worst, float(np.max(np.abs(got - ref - offset))))
        done += 1
    rep.check("max |S0' - S0 - n pi|", worst, 1e-9)
    rep.finish()
