"""Polynomial order sweep on a frequency trace hit by a short fault transient.

A 150 ms dip right after the trip looks like a very steep initial RoCoF to a
high-order polynomial. Beyond order 15 the estimate drops below the inertia
of the synchronous machines alone, which is physically impossible.
"""
import numpy as np

from inertiafit import sfr_sim
from inertiafit.estimators import sweep_poly_orders

config = sfr_sim.case5_analog()
event = sfr_sim.simulate_event(config)
sweep = sweep_poly_orders(event.dataset, range(2, 31))

floor = config.machine_inertia
print(f"truth {config.ke_true:.0f} MW.s, synchronous machines alone {floor:.0f} MW.s\n")
print("order      KE   ratio")
for order, ke in zip(sweep.hyperparameter_values, sweep.ke):
    flag = "  < machine inertia" if ke < floor else ""
    print(f"{order:5d} {ke:8.0f}  {ke / config.ke_true:5.2f}{flag}")

below = [o for o, ke in zip(sweep.hyperparameter_values, sweep.ke) if ke < floor]
print(f"\norders below the floor: {below}")
print(f"median over orders 2-12: {np.median(sweep.ke[:11]):.0f} MW.s")
