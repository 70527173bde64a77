"""Probe batch for test_experiments.py expecteds."""

import math
import time

import numpy as np

from artifact.experiments import (
    ExperimentConfig,
    heat_surrogate_decay,
    decay_study,
    kappa_sweep,
    kernel_study,
    make_initial,
    run_nsk,
    strichartz_study,
    triple_field,
)
from artifact.spectral import lp_norm

# --- 1. B-column monotone in the linear regime ------------------------------
for seed in (0, 3):
    cfg = ExperimentConfig(
        d=2, n=32, ldom=2 * math.pi, kappas=(50.0,), recipe="ill-prepared",
        amplitude=1e-4, seed=seed, band=(0, 2), dt=5e-3, tmax=0.2,
        cadence=0.025, besov=((0.0, 2.0, 1.0),),
    )
    s = run_nsk(cfg)
    b = s.column("B[0,2,1]")
    print(f"1) seed={seed} B ratios", np.round(b[1:] / b[:-1], 3),
          "monotone", bool(np.all(np.diff(b) <= 1e-12 * b[0])))

# --- 2. amplitude=10 behavior ------------------------------------------------
cfg = ExperimentConfig(
    d=2, n=32, ldom=2 * math.pi, kappas=(50.0,), recipe="ill-prepared",
    amplitude=10.0, seed=0, band=(0, 2), dt=1e-3, tmax=0.01, cadence=1e-3,
)
try:
    s = run_nsk(cfg)
    print("2) amp=10 run:", s.status, s.abort_time, repr(s.abort_reason[:90]))
except Exception as exc:
    print("2) amp=10 raised:", type(exc).__name__, str(exc)[:90])

# --- 3. CFL abort staging -----------------------------------------------------
cfg = ExperimentConfig(
    d=2, n=64, ldom=2 * math.pi, kappas=(1e4,), recipe="ill-prepared",
    amplitude=1e-3, seed=0, band=(0, 2), dt=0.5, tmax=1.0, cadence=0.5,
)
s = run_nsk(cfg)
print("3) CFL abort:", s.status, s.abort_time, repr(s.abort_reason[:70]),
      "nstamps", s.times.size)

# --- 4. kernel p=inf ----------------------------------------------------------
t0 = time.time()
res = kernel_study(2, [1e4], 0, math.inf)
print(f"4) kernel pinf slope {res.fit_t.slope:.4f} r2 {res.fit_t.r_squared:.4f} "
      f"expected {res.expected_t} fit_kappa {res.fit_kappa} ({time.time()-t0:.1f}s)")

# --- 5. kernel p=2 with 3 kappas ----------------------------------------------
t0 = time.time()
res2 = kernel_study(2, [1e2, 1e3, 1e4], 0, 2.0)
print(f"5) kernel p2 fit_t {res2.fit_t.slope:.4f} fit_kappa "
      f"{res2.fit_kappa.slope:.3e} expected_t {res2.expected_t} "
      f"expected_kappa {res2.expected_kappa} ({time.time()-t0:.1f}s)")

# --- 6. well-prepared degenerate ----------------------------------------------
cfg = ExperimentConfig(
    d=2, n=32, ldom=2 * math.pi, kappas=(200.0,), recipe="well-prepared",
    amplitude=1e-3, seed=5, band=(0, 2), dt=5e-3, tmax=0.1, cadence=0.025,
)
s = run_nsk(cfg)
print("6) well-prepared D:", np.max(s.column("D")), "W:", np.max(s.column("W")),
      "V0:", s.column("V")[0])

# --- 7. localization mass fraction ---------------------------------------------
cfg = ExperimentConfig(
    d=2, n=64, ldom=32 * math.pi, kappas=(200.0,), recipe="gaussian",
    amplitude=1e-3, seed=11, band=(-4, -1), dt=0.1, tmax=20.0, cadence=0.4,
    alphas=(0.0, 2.0), sigma=1.0,
)
state, ins = make_initial(cfg)
grid = state.u.grid
u2 = np.sum(np.abs(state.u.physical()) ** 2, axis=0)
r2 = sum((x - 0.5 * grid.ldom) ** 2 for x in grid.meshgrid())
frac = float(np.sum(u2[r2 <= (grid.ldom / 4.0) ** 2]) / np.sum(u2))
print(f"7) localization frac {frac:.5f}")

# --- 8. sweep structural --------------------------------------------------------
t0 = time.time()
cfg = ExperimentConfig(
    d=2, n=16, ldom=2 * math.pi, kappas=(50.0, 100.0, 200.0),
    recipe="ill-prepared", amplitude=1e-3, seed=2, band=(0, 2),
    dt=0.01, tmax=0.04, cadence=0.01,
)
sw = kappa_sweep(cfg)
v0 = [s.column("V")[0] for _, s in sw.members]
w0 = [s.column("W")[0] for _, s in sw.members]
print(f"8) sweep ok ({time.time()-t0:.1f}s) exp_comp {sw.expected_compressible} "
      f"exp_gap {sw.expected_gap} V0 spread {max(v0)-min(v0):.2e} "
      f"W0 {max(w0):.2e} comp>0 {all(c > 0 for c in [sw.fit_compressible.intercept])}")

# --- 9. surrogate pointwise oracle ----------------------------------------------
cfg = ExperimentConfig(
    d=2, n=64, ldom=32 * math.pi, kappas=(200.0,), recipe="gaussian",
    amplitude=1e-3, seed=11, band=(-4, -1), dt=0.1, tmax=20.0, cadence=0.4,
    alphas=(0.0, 2.0), sigma=1.0,
)
t0 = time.time()
sur = heat_surrogate_decay(cfg)
state, _ = make_initial(cfg)
triple0 = triple_field(state, velocity="full")
g = triple0.grid
power = np.sum(np.abs(triple0.coeffs) ** 2, axis=0)
worst = {0.0: 0.0, 2.0: 0.0}
for alpha in (0.0, 2.0):
    col = sur.series.column(f"L2_Lam[{alpha:g}]")
    for i, t in enumerate(sur.series.times):
        oracle = math.sqrt(
            g.volume / g.npoints**2
            * float(np.sum(power * g.kmod ** (2 * alpha) * np.exp(-2.0 * g.k2 * t)))
        )
        worst[alpha] = max(worst[alpha], abs(col[i] - oracle) / max(oracle, 1e-300))
print(f"9) surrogate oracle rel gaps {worst} ({time.time()-t0:.1f}s)")
print("   surrogate slopes", {a: round(f.slope, 4) for a, f in sur.fits.items()},
      "bneg", round(sur.bneg_ratio, 4))

# --- 10. strichartz study re-run -------------------------------------------------
t0 = time.time()
st = strichartz_study(2, [1e2, 1e3, 1e4], (4.0, 4.0, 0.0))
print(f"10) strichartz slope {st.fit.slope:.4f} expected {st.expected} "
      f"r2 {st.fit.r_squared:.4f} ({time.time()-t0:.1f}s)")
