"""Scratch instrumentation for scenario tuning (not part of the package)."""
import time
import numpy as np

from microclimb.gait import GaitConfig, build_gait_plan
from microclimb.motion import LrstConfig, MdConfig, assemble_motion
from microclimb.robots import default_quadruped
from microclimb.sim import ContactModel, SimConfig, Simulator
from microclimb.terrain import generate_fractal


def run(strategy, n_cycles=1, seed=42, servo=20.0, zeta=1.0, dt=0.002, sigma=0.03,
        lrst_kw=None, gait_kw=None, verbose=True):
    model = default_quadruped()
    tm = generate_fractal(seed, (2.2, 1.6), 0.04, sigma, origin=(-0.7, -0.8))
    gait = GaitConfig(n_limbs=4, swing_period=1.75, stride=0.08, step_height=0.04,
                      stance_height=0.11, clearance_margin=0.02, **(gait_kw or {}))
    lrst = LrstConfig(c1=7.0, c2=1.75, c3=30.0, step_height=0.04,
                      **(lrst_kw or dict(n_samples=32, restarts=2, max_iter=160)))
    md = MdConfig()
    t0 = time.perf_counter()
    plan = build_gait_plan(model, gait, tm, n_cycles=n_cycles,
                           adjust_base=(strategy == "proposed"))
    t1 = time.perf_counter()
    tl = assemble_motion(model, plan, lrst, md, dt=dt, strategy=strategy)
    t2 = time.perf_counter()
    sim = Simulator(model, tl, ContactModel(), SimConfig(gravity_g=1e-6, step=dt,
                    servo_frequency=servo, servo_damping=zeta), terrain=tm)
    trace, summary = sim.run()
    t3 = time.perf_counter()
    if verbose:
        print(f"[{strategy} seed={seed} servo={servo}] plan {t1-t0:.1f}s asm {t2-t1:.1f}s sim {t3-t2:.1f}s")
        print(f"  completed={summary['completed']} detach={summary['detachments'][:3]}"
              f" missed={summary['missed_grasps'][:3]}")
        print(f"  max_pull={summary['max_pull_force']:.3f} max_force={summary['max_contact_force']:.3f}"
              f" min_gia={summary['min_gia_margin']:.4f} vel={summary['mean_velocity']*100:.3f} cm/s")
        if tl.swing_results:
            апex = [r.apex for r in tl.swing_results]
            red = [1 - r.peak_lin_rate / max(r.baseline_peak_lin_rate, 1e-12) for r in tl.swing_results]
            print(f"  apexes={np.round(апex,4).tolist()} lin-rate reduction={np.round(red,2).tolist()}")
            print(f"  costs opt={np.round([r.cost for r in tl.swing_results],3).tolist()}"
                  f" base={np.round([r.baseline_cost for r in tl.swing_results],3).tolist()}")
    return trace, summary, tl


if __name__ == "__main__":
    run("baseline", n_cycles=2)
    run("proposed", n_cycles=1)
