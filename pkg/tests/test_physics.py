import math

import numpy as np
import pytest

from conftest import chain_scene, circle, custom_scene, no_gravity
from triggerkit.physics import SimulationDivergedError, simulate
from triggerkit.scene import WorldConfig, build_scene


def test_free_fall_matches_closed_form():
    scene = custom_scene([circle(1, 128.0, 220.0)])
    config = WorldConfig(duration=1.0)
    sim = simulate(scene, config)
    traj = sim.trajectories[1]
    g = config.gravity
    for k in range(len(traj.positions)):
        t = k * config.dt
        expected = 220.0 - 0.5 * g * t * t
        assert abs(traj.positions[k, 1] - expected) < 1e-3
    assert all(not c for c in traj.contacts)


def test_elastic_head_on_exchanges_velocities():
    scene = custom_scene([
        circle(1, 100.0, 128.0, vx=50.0),
        circle(2, 156.0, 128.0, vx=-50.0),
    ])
    config = WorldConfig(gravity=0.0, restitution=1.0, friction=0.0, duration=2.0)
    sim = simulate(scene, config)
    v1 = sim.trajectories[1].velocities[-1]
    v2 = sim.trajectories[2].velocities[-1]
    assert abs(v1[0] - -50.0) < 1e-6
    assert abs(v2[0] - 50.0) < 1e-6
    assert abs(v1[1]) < 1e-6 and abs(v2[1]) < 1e-6


def test_resting_object_stays_exactly_put():
    scene = custom_scene([circle(1, 128.0, 14.0)])  # touching ground top (8) + radius 6
    sim = simulate(scene, WorldConfig(duration=2.0))
    ys = sim.trajectories[1].positions[:, 1]
    assert np.all(ys == 14.0)
    xs = sim.trajectories[1].positions[:, 0]
    assert np.all(xs == 128.0)


def test_determinism_bit_identical():
    scene = build_scene(3, 5)
    config = WorldConfig()
    a = simulate(scene, config)
    b = simulate(scene, config)
    for ident in a.trajectories:
        assert np.array_equal(a.trajectories[ident].positions,
                              b.trajectories[ident].positions)
        assert np.array_equal(a.trajectories[ident].velocities,
                              b.trajectories[ident].velocities)
        assert a.trajectories[ident].contacts == b.trajectories[ident].contacts
    assert a.contact_log == b.contact_log


def test_contact_symmetry_across_objects():
    scene, config = chain_scene()
    sim = simulate(scene, config)
    ids = list(sim.trajectories)
    for k in range(sim.n_states()):
        for i in ids:
            for j in sim.trajectories[i].contacts[k]:
                if j in sim.trajectories:
                    assert i in sim.trajectories[j].contacts[k]


@pytest.mark.parametrize("layout,seed", [(2, 1), (5, 2), (9, 4), (13, 0), (17, 3)])
def test_positions_bounded_and_energy_dissipates(layout, seed):
    scene = build_scene(layout, seed)
    sim = simulate(scene, WorldConfig(), record_energy=True)
    for traj in sim.trajectories.values():
        assert np.all(traj.positions[:, 0] >= -1e-6)
        assert np.all(traj.positions[:, 0] <= 256.0 + 1e-6)
        assert np.all(traj.positions[:, 1] >= -1e-6)
        assert np.all(traj.positions[:, 1] <= 256.0 + 1e-6)
    for before, after in sim.energy_trace:
        assert after <= before * (1.0 + 1e-9) + 1e-9


def test_contact_log_normalized_and_ordered():
    scene, config = chain_scene()
    sim = simulate(scene, config)
    assert len(sim.contact_log) > 0
    last_step = -1
    for rec in sim.contact_log:
        assert rec.id_a < rec.id_b
        assert rec.timestep >= last_step
        last_step = rec.timestep


def test_divergence_raises_with_timestep():
    scene = custom_scene([circle(1, 128.0, 200.0)])
    config = WorldConfig(gravity=1e9, duration=1.0)
    with pytest.raises(SimulationDivergedError) as err:
        simulate(scene, config)
    assert err.value.timestep >= 0


def test_world_config_validation():
    with pytest.raises(ValueError):
        WorldConfig(dt=-1.0)
    with pytest.raises(ValueError):
        WorldConfig(restitution=1.5)
    with pytest.raises(ValueError):
        WorldConfig(duration=0.505)  # not a whole number of steps


def test_trajectory_length_matches_duration():
    scene = custom_scene([circle(1, 128.0, 100.0)])
    config = WorldConfig(duration=2.0)
    sim = simulate(scene, config)
    assert len(sim.trajectories[1].positions) == config.n_steps + 1
    assert len(sim.trajectories[1].contacts) == config.n_steps + 1
