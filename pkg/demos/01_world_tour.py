"""A guided tour of the occluded pursuit grid.

Builds the reference 13x13 map, shows how sight works from intersections
versus straight roads, runs a few random steps, and prints ASCII frames.
Run:  python demos/01_world_tour.py
"""

import numpy as np

from pursuitlab.env import (
    EnvConfig,
    build_map,
    global_state,
    observable_area,
    observe,
    render_frame,
    reset,
    step,
)

# --- the map: buildings sit wherever both coordinates are odd ---------------
grid = build_map(13)
print(f"13x13 grid: {len(grid.obstacle_cells)} buildings, {len(grid.road_cells)} road cells")

# --- sight is a cross at intersections, a line on straight roads ------------
print("\nfrom the intersection (6, 6):", sorted(observable_area(grid, (6, 6))))
print("from the street cell (6, 5): ", sorted(observable_area(grid, (6, 5))))
print("from the corner (0, 0):      ", sorted(observable_area(grid, (0, 0))))

# --- spawn the reference 8v4 scenario and look at one pursuer's masks -------
world = reset(EnvConfig(width=13, n_pursuers=8, n_evaders=4), seed=7)
print("\ninitial frame (digits = pursuers, E = evaders):")
print(render_frame(world))

obs = observe(world, 0)
print(f"\npursuer 0 at {obs.center}; evader hits in its 5x5 window:")
print(obs.evaders)
print("obstacles in the window (never occluded):")
print(obs.obstacles)

state = global_state(world)
print(
    "\nglobal state channel sums (pursuers, evaders, buildings):",
    state[0].sum(),
    state[1].sum(),
    state[2].sum(),
)

# --- a few random steps; rewards appear when a pursuer lands on an evader ---
rng = np.random.default_rng(0)
for _ in range(5):
    outcome = step(world, rng.integers(0, 5, size=8).tolist())
    world = outcome.next
    if outcome.captures:
        print(f"t={world.t}: captures {outcome.captures}, rewards {outcome.per_agent_reward}")
print("\nframe after 5 random steps:")
print(render_frame(world))
