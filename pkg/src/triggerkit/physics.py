"""Fixed-timestep rigid-body simulation with impulse collision response.

Bodies translate but never rotate, so collisions reduce to center-of-mass
impulses along contact normals.  Integration is kick-drift-kick: velocities
get half a gravity kick, impulses are resolved against current positions,
positions drift on the half-kicked velocities, then the second half kick
lands.  This reproduces constant-acceleration trajectories exactly and
keeps objects resting on supports perfectly still.

Determinism: bodies are iterated in ascending id order and all arithmetic
is plain float64, so identical inputs give bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Circle, shape_contact
from .scene import SceneSpec, WorldConfig

CONTACT_TOL = 0.5        # separation at or below this counts as contact
RESOLVE_SLOP = 0.05      # impulses apply only this close or penetrating
CORRECTION_SLOP = 0.05
CORRECTION_PERCENT = 0.8
VELOCITY_ITERATIONS = 8
SPEED_CAP = 5000.0


class SimulationError(Exception):
    pass


class SimulationDivergedError(SimulationError):
    def __init__(self, timestep: int, speed: float):
        super().__init__(f"simulation diverged at timestep {timestep}: speed {speed:.1f}")
        self.timestep = timestep


@dataclass
class Trajectory:
    """Per-timestep kinematic record of one dynamic object."""

    object_id: int
    positions: np.ndarray   # (n_steps + 1, 2)
    velocities: np.ndarray  # (n_steps + 1, 2)
    contacts: list[frozenset[int]]


@dataclass(frozen=True)
class ContactRecord:
    timestep: int
    id_a: int
    id_b: int
    normal: tuple[float, float]   # oriented from id_a to id_b
    impulse: float


ContactLog = list


@dataclass
class SimResult:
    scene: SceneSpec
    config: WorldConfig
    trajectories: dict[int, Trajectory]
    contact_log: list[ContactRecord]
    energy_trace: list[tuple[float, float]] | None = None

    def n_states(self) -> int:
        return self.config.n_steps + 1


class _Body:
    __slots__ = ("ident", "shape", "inv_mass", "mass", "x", "y", "vx", "vy",
                 "dynamic", "bound")

    def __init__(self, ident, shape, mass, x, y, vx, vy, dynamic):
        self.ident = ident
        self.shape = shape
        self.mass = mass
        self.inv_mass = 1.0 / mass if dynamic else 0.0
        self.x, self.y, self.vx, self.vy = x, y, vx, vy
        self.dynamic = dynamic
        if isinstance(shape, Circle):
            self.bound = shape.radius
        else:
            self.bound = shape.bounding_radius()


def _pair_ke(a: _Body, b: _Body) -> float:
    ke = 0.0
    if a.dynamic:
        ke += 0.5 * a.mass * (a.vx * a.vx + a.vy * a.vy)
    if b.dynamic:
        ke += 0.5 * b.mass * (b.vx * b.vx + b.vy * b.vy)
    return ke


def simulate(scene: SceneSpec, config: WorldConfig,
             record_energy: bool = False) -> SimResult:
    """Run the scene for config.duration seconds.

    Raises SimulationDivergedError if any speed exceeds the hard cap, and
    SimulationError if an impulse resolution ever increases the kinetic
    energy of the pair it acts on (restitution <= 1 forbids that).
    """
    dyn: list[_Body] = []
    for spec in sorted(scene.dynamic_objects, key=lambda o: o.object_id):
        dyn.append(_Body(spec.object_id, spec.collision_shape(), spec.mass,
                         spec.init_position.x, spec.init_position.y,
                         spec.init_velocity.x, spec.init_velocity.y, True))
    statics: list[_Body] = []
    for element in scene.static_elements:
        for poly, px, py in element.parts:
            statics.append(_Body(element.element_id, poly, math.inf, px, py, 0.0, 0.0, False))

    n_steps = config.n_steps
    dt = config.dt
    half_g = -config.gravity * dt / 2.0
    resting_speed = 2.0 * config.gravity * dt
    world_top = scene.world_size

    pos_hist = {b.ident: [(b.x, b.y)] for b in dyn}
    vel_hist = {b.ident: [(b.vx, b.vy)] for b in dyn}
    contact_hist: dict[int, list[frozenset[int]]] = {b.ident: [] for b in dyn}
    log: list[ContactRecord] = []
    energy_trace: list[tuple[float, float]] | None = [] if record_energy else None

    def _detect():
        """Contacts at current positions: list of (a, b, normal, separation)."""
        found = []
        reach = CONTACT_TOL
        for i, a in enumerate(dyn):
            for b in dyn[i + 1:]:
                dx, dy = b.x - a.x, b.y - a.y
                lim = a.bound + b.bound + reach
                if dx * dx + dy * dy > lim * lim:
                    continue
                c = shape_contact(a.shape, a.x, a.y, b.shape, b.x, b.y)
                if c.separation <= reach:
                    found.append([a, b, c.normal, c.separation])
            for b in statics:
                dx, dy = b.x - a.x, b.y - a.y
                lim = a.bound + b.bound + reach
                if dx * dx + dy * dy > lim * lim:
                    continue
                c = shape_contact(a.shape, a.x, a.y, b.shape, b.x, b.y)
                if c.separation <= reach:
                    found.append([a, b, c.normal, c.separation])
        return found

    def _record_step_contacts(step, contacts, impulses):
        per_obj: dict[int, set[int]] = {b.ident: set() for b in dyn}
        merged: dict[tuple[int, int], list] = {}
        for idx, (a, b, normal, sep) in enumerate(contacts):
            ia, ib = a.ident, b.ident
            per_obj[ia].add(ib)
            if b.dynamic:
                per_obj[ib].add(ia)
            key = (ia, ib) if ia < ib else (ib, ia)
            nrm = normal if ia < ib else (-normal[0], -normal[1])
            entry = merged.get(key)
            if entry is None:
                merged[key] = [nrm, sep, impulses[idx]]
            else:
                entry[2] += impulses[idx]
                if sep < entry[1]:
                    entry[0], entry[1] = nrm, sep
        for (ia, ib) in sorted(merged):
            nrm, _, imp = merged[(ia, ib)]
            log.append(ContactRecord(step, ia, ib, nrm, imp))
        for b in dyn:
            contact_hist[b.ident].append(frozenset(per_obj[b.ident]))

    for step in range(n_steps):
        contacts = _detect()
        impulses = [0.0] * len(contacts)

        for b in dyn:
            b.vy += half_g

        if record_energy:
            ke_before = sum(0.5 * b.mass * (b.vx**2 + b.vy**2) for b in dyn)

        for _ in range(VELOCITY_ITERATIONS):
            any_impulse = False
            for idx, (a, b, normal, sep) in enumerate(contacts):
                if sep > RESOLVE_SLOP:
                    continue
                nx, ny = normal
                rvx, rvy = b.vx - a.vx, b.vy - a.vy
                vn = rvx * nx + rvy * ny
                if vn >= 0.0:
                    continue
                inv_sum = a.inv_mass + b.inv_mass
                if inv_sum == 0.0:
                    continue
                e = config.restitution if (a.dynamic and b.dynamic) else config.restitution_static
                if -vn < resting_speed:
                    e = 0.0
                ke0 = _pair_ke(a, b)
                jn = -(1.0 + e) * vn / inv_sum
                a.vx -= jn * nx * a.inv_mass
                a.vy -= jn * ny * a.inv_mass
                b.vx += jn * nx * b.inv_mass
                b.vy += jn * ny * b.inv_mass
                # Coulomb friction, clamped by the normal impulse.
                rvx, rvy = b.vx - a.vx, b.vy - a.vy
                vn2 = rvx * nx + rvy * ny
                tvx, tvy = rvx - vn2 * nx, rvy - vn2 * ny
                tmag = math.sqrt(tvx * tvx + tvy * tvy)
                if tmag > 1e-9:
                    tx, ty = tvx / tmag, tvy / tmag
                    jt = min(tmag / inv_sum, config.friction * jn)
                    a.vx += jt * tx * a.inv_mass
                    a.vy += jt * ty * a.inv_mass
                    b.vx -= jt * tx * b.inv_mass
                    b.vy -= jt * ty * b.inv_mass
                ke1 = _pair_ke(a, b)
                if ke1 > ke0 * (1.0 + 1e-9) + 1e-9:
                    raise SimulationError(
                        f"impulse increased pair energy at step {step}: {ke0} -> {ke1}")
                impulses[idx] += jn
                any_impulse = True
            if not any_impulse:
                break

        if record_energy:
            ke_after = sum(0.5 * b.mass * (b.vx**2 + b.vy**2) for b in dyn)
            energy_trace.append((ke_before, ke_after))

        _record_step_contacts(step, contacts, impulses)

        for b in dyn:
            b.x += b.vx * dt
            b.y += b.vy * dt
            b.vy += half_g

        # Positional correction keeps resting stacks from sinking.
        for a, b, _, _ in contacts:
            c = shape_contact(a.shape, a.x, a.y, b.shape, b.x, b.y)
            if c.separation < -CORRECTION_SLOP:
                push = CORRECTION_PERCENT * (-c.separation - CORRECTION_SLOP)
                inv_sum = a.inv_mass + b.inv_mass
                if inv_sum == 0.0:
                    continue
                nx, ny = c.normal
                a.x -= push * nx * a.inv_mass / inv_sum
                a.y -= push * ny * a.inv_mass / inv_sum
                b.x += push * nx * b.inv_mass / inv_sum
                b.y += push * ny * b.inv_mass / inv_sum

        # The frame has no ceiling element; reflect at the top edge so
        # every position stays inside the world bounds.
        for b in dyn:
            top = b.y + b.bound
            if top > world_top:
                b.y -= top - world_top
                if b.vy > 0.0:
                    b.vy = -b.vy * config.restitution_static

        for b in dyn:
            speed = math.sqrt(b.vx * b.vx + b.vy * b.vy)
            if speed > SPEED_CAP:
                raise SimulationDivergedError(step, speed)
            pos_hist[b.ident].append((b.x, b.y))
            vel_hist[b.ident].append((b.vx, b.vy))

    final_contacts = _detect()
    _record_step_contacts(n_steps, final_contacts, [0.0] * len(final_contacts))
    # The final detection pass logs proximity only; drop its zero-impulse
    # records so the log covers exactly the n_steps transitions.
    while log and log[-1].timestep == n_steps:
        log.pop()

    trajectories = {}
    for b in dyn:
        trajectories[b.ident] = Trajectory(
            b.ident,
            np.asarray(pos_hist[b.ident], dtype=np.float64),
            np.asarray(vel_hist[b.ident], dtype=np.float64),
            contact_hist[b.ident],
        )
    return SimResult(scene, config, trajectories, log, energy_trace)
