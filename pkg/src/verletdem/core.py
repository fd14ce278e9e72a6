"""Value types, 3-vector helpers and simulation configuration.

Everything is SI: lengths in meters, times in seconds, masses in kg.
Particle ids are dense 0..n-1 indices assigned at construction; pair
identity everywhere in the package is (min id, max id).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Iterator, Sequence

import numpy as np

#: A 3-vector is a float64 numpy array of shape (3,).
Vec3 = np.ndarray

UNIT_TOL = 1e-12


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SimulationError):
    """Invalid simulation configuration."""


class NonPositiveDt(ConfigError):
    pass


class EmptyDomain(ConfigError):
    pass


class CellTooSmall(ConfigError):
    pass


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=np.float64)


def as_vec3(v) -> Vec3:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ConfigError(f"expected a 3-vector, got shape {a.shape}")
    return a


def norm(v) -> float:
    """Euclidean length of a 3-vector.

    math.hypot scales internally, so components near the under/overflow
    boundaries do not lose the homogeneity |s v| = |s| |v|.
    """
    a = np.asarray(v, dtype=np.float64)
    return math.hypot(a[0], a[1], a[2])


def row_norm_sq(diff: np.ndarray) -> np.ndarray:
    """Squared row norms of an (m, 3) array.

    Every distance test in the package funnels through this one reduction so
    that boundary comparisons agree bit-for-bit across the grid search, the
    brute-force oracle, the narrow phase and the shadow scan.
    """
    return np.einsum("ij,ij->i", diff, diff)


@dataclass(frozen=True)
class Particle:
    """One sphere: kinematic plus geometric state.

    ``radius`` is the physical sphere radius, ``cutoff`` the interaction
    cut-off radius used by the broad-phase (``cutoff >= radius``).  A static
    particle never moves: it takes part in collision detection and exerts
    forces but is skipped by the integrator, and its velocity must stay zero.
    """

    id: int
    position: Vec3
    velocity: Vec3
    radius: float
    cutoff: float
    mass: float
    is_static: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "velocity", as_vec3(self.velocity))


@dataclass(frozen=True)
class WallPlane:
    """Infinite plane boundary with a unit outward normal.

    The outward normal points into the half-space where particles live.
    """

    point: Vec3
    outward_normal: Vec3

    def __post_init__(self):
        object.__setattr__(self, "point", as_vec3(self.point))
        object.__setattr__(self, "outward_normal", as_vec3(self.outward_normal))


@dataclass(frozen=True)
class ContactParams:
    """Linear spring-dashpot constants with a static-friction cap.

    k_n: normal stiffness (N/m), strictly positive.
    gamma_n: normal damping (N.s/m).
    mu_s: static friction coefficient.
    k_t: tangential stiffness (N/m).
    """

    k_n: float
    gamma_n: float = 0.0
    mu_s: float = 0.0
    k_t: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """Full configuration of one simulation run.

    ``k_factor`` sizes the per-particle skin margin (number of broad-phase
    skips the skin is provisioned for).  ``cell_size`` is the uniform edge
    of the search grid and must be at least twice the largest particle
    cut-off so that adjacent-cell search never misses a candidate pair.
    """

    dt: float
    k_factor: int
    gravity: Vec3
    cell_size: float
    domain_min: Vec3
    domain_max: Vec3
    contact: ContactParams
    seed: int
    steps: int
    walls: tuple[WallPlane, ...] = ()
    verlet_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gravity", as_vec3(self.gravity))
        object.__setattr__(self, "domain_min", as_vec3(self.domain_min))
        object.__setattr__(self, "domain_max", as_vec3(self.domain_max))
        object.__setattr__(self, "walls", tuple(self.walls))


class Particles:
    """Column-oriented storage for a set of particles.

    Holds one numpy array per field so the hot loops can stay vectorized.
    Index access returns a :class:`Particle` record; ids are the positions
    in the arrays.
    """

    __slots__ = ("position", "velocity", "radius", "cutoff", "mass", "is_static")

    def __init__(self, position, velocity, radius, cutoff, mass, is_static):
        self.position = np.ascontiguousarray(position, dtype=np.float64).reshape(-1, 3)
        self.velocity = np.ascontiguousarray(velocity, dtype=np.float64).reshape(-1, 3)
        self.radius = np.asarray(radius, dtype=np.float64).reshape(-1)
        self.cutoff = np.asarray(cutoff, dtype=np.float64).reshape(-1)
        self.mass = np.asarray(mass, dtype=np.float64).reshape(-1)
        self.is_static = np.asarray(is_static, dtype=bool).reshape(-1)
        n = len(self.position)
        for name in ("velocity",):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"{name} has {len(getattr(self, name))} rows, expected {n}")
        for name in ("radius", "cutoff", "mass", "is_static"):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"{name} has {len(getattr(self, name))} entries, expected {n}")

    @classmethod
    def from_list(cls, particles: Sequence[Particle]) -> "Particles":
        ids = [p.id for p in particles]
        if ids != list(range(len(particles))):
            raise ConfigError("particle ids must be dense 0..n-1 in order")
        return cls(
            position=np.array([p.position for p in particles], dtype=np.float64).reshape(-1, 3),
            velocity=np.array([p.velocity for p in particles], dtype=np.float64).reshape(-1, 3),
            radius=[p.radius for p in particles],
            cutoff=[p.cutoff for p in particles],
            mass=[p.mass for p in particles],
            is_static=[p.is_static for p in particles],
        )

    @classmethod
    def empty(cls) -> "Particles":
        return cls(
            np.empty((0, 3)), np.empty((0, 3)),
            np.empty(0), np.empty(0), np.empty(0), np.empty(0, dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.position)

    def __getitem__(self, i: int) -> Particle:
        return Particle(
            id=int(i),
            position=self.position[i].copy(),
            velocity=self.velocity[i].copy(),
            radius=float(self.radius[i]),
            cutoff=float(self.cutoff[i]),
            mass=float(self.mass[i]),
            is_static=bool(self.is_static[i]),
        )

    def __iter__(self) -> Iterator[Particle]:
        return (self[i] for i in range(len(self)))

    def copy(self) -> "Particles":
        return Particles(
            self.position.copy(), self.velocity.copy(),
            self.radius.copy(), self.cutoff.copy(),
            self.mass.copy(), self.is_static.copy(),
        )

    def max_cutoff(self) -> float:
        return float(self.cutoff.max()) if len(self) else 0.0


def as_particles(particles) -> Particles:
    """Accept either a Particles set or a sequence of Particle records."""
    if isinstance(particles, Particles):
        return particles
    return Particles.from_list(list(particles))


def validate_config(cfg: SimConfig, particles) -> None:
    """Check every configuration invariant against the given particle set.

    Raises a :class:`ConfigError` subclass on the first violation; returns
    None when the configuration is acceptable.
    """
    pset = as_particles(particles)
    if not (cfg.dt > 0):
        raise NonPositiveDt(f"dt must be > 0, got {cfg.dt}")
    if cfg.steps <= 0:
        raise ConfigError(f"steps must be > 0, got {cfg.steps}")
    if cfg.k_factor < 0:
        raise ConfigError(f"k_factor must be >= 0, got {cfg.k_factor}")
    if not np.all(np.isfinite(cfg.gravity)):
        raise ConfigError("gravity components must be finite")
    if not (np.all(np.isfinite(cfg.domain_min)) and np.all(np.isfinite(cfg.domain_max))):
        raise ConfigError("domain bounds must be finite")
    if not np.all(cfg.domain_min < cfg.domain_max):
        raise EmptyDomain(
            f"domain_min {cfg.domain_min.tolist()} must be < domain_max "
            f"{cfg.domain_max.tolist()} componentwise"
        )
    if not (cfg.cell_size > 0 and math.isfinite(cfg.cell_size)):
        raise ConfigError(f"cell_size must be positive and finite, got {cfg.cell_size}")
    if len(pset) and cfg.cell_size < 2.0 * pset.max_cutoff():
        raise CellTooSmall(
            f"cell_size {cfg.cell_size} < 2 x max cutoff {pset.max_cutoff()}"
        )
    for w in cfg.walls:
        if not np.all(np.isfinite(w.point)) or not np.all(np.isfinite(w.outward_normal)):
            raise ConfigError("wall plane components must be finite")
        if abs(norm(w.outward_normal) - 1.0) > UNIT_TOL:
            raise ConfigError(
                f"wall normal {w.outward_normal.tolist()} is not unit length"
            )
    c = cfg.contact
    if not (c.k_n > 0):
        raise ConfigError(f"contact k_n must be > 0, got {c.k_n}")
    if c.gamma_n < 0 or c.mu_s < 0 or c.k_t < 0:
        raise ConfigError("contact gamma_n, mu_s and k_t must be nonnegative")

    if len(pset):
        if not np.all(np.isfinite(pset.position)) or not np.all(np.isfinite(pset.velocity)):
            raise ConfigError("particle positions and velocities must be finite")
        if np.any(pset.radius <= 0):
            raise ConfigError("particle radius must be > 0")
        if np.any(pset.cutoff < pset.radius):
            raise ConfigError("particle cutoff must be >= radius")
        if np.any(pset.mass <= 0):
            raise ConfigError("particle mass must be > 0")
        moving_static = pset.is_static & np.any(pset.velocity != 0.0, axis=1)
        if np.any(moving_static):
            bad = int(np.flatnonzero(moving_static)[0])
            raise ConfigError(f"static particle {bad} has nonzero velocity")


# --- strict JSON loading -------------------------------------------------

_REQUIRED_KEYS = (
    "dt", "k_factor", "gravity", "cell_size", "domain_min", "domain_max",
    "contact", "seed", "steps",
)
_OPTIONAL_KEYS = {"walls": (), "verlet_enabled": True}


def _strict_keys(doc: dict, allowed, what: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {what} field(s): {sorted(unknown)}")


def simconfig_from_dict(doc: dict) -> SimConfig:
    """Build a SimConfig from a parsed JSON document.

    Strict mode: any field name not in the schema is an error, so typos in
    sweep configs fail fast instead of silently using defaults.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _strict_keys(doc, _REQUIRED_KEYS + tuple(_OPTIONAL_KEYS), "config")
    missing = [k for k in _REQUIRED_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing config field(s): {missing}")

    contact_doc = doc["contact"]
    if not isinstance(contact_doc, dict):
        raise ConfigError("contact must be an object")
    _strict_keys(contact_doc, ("k_n", "gamma_n", "mu_s", "k_t"), "contact")
    if "k_n" not in contact_doc:
        raise ConfigError("contact.k_n is required")
    contact = ContactParams(
        k_n=float(contact_doc["k_n"]),
        gamma_n=float(contact_doc.get("gamma_n", 0.0)),
        mu_s=float(contact_doc.get("mu_s", 0.0)),
        k_t=float(contact_doc.get("k_t", 0.0)),
    )

    walls = []
    for i, wdoc in enumerate(doc.get("walls", ())):
        if not isinstance(wdoc, dict):
            raise ConfigError(f"walls[{i}] must be an object")
        _strict_keys(wdoc, ("point", "outward_normal"), f"walls[{i}]")
        if "point" not in wdoc or "outward_normal" not in wdoc:
            raise ConfigError(f"walls[{i}] needs point and outward_normal")
        walls.append(WallPlane(as_vec3(wdoc["point"]), as_vec3(wdoc["outward_normal"])))

    try:
        return SimConfig(
            dt=float(doc["dt"]),
            k_factor=int(doc["k_factor"]),
            gravity=as_vec3(doc["gravity"]),
            cell_size=float(doc["cell_size"]),
            domain_min=as_vec3(doc["domain_min"]),
            domain_max=as_vec3(doc["domain_max"]),
            contact=contact,
            seed=int(doc["seed"]),
            steps=int(doc["steps"]),
            walls=tuple(walls),
            verlet_enabled=bool(doc.get("verlet_enabled", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def simconfig_from_json(text: str) -> SimConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return simconfig_from_dict(doc)


def config_overrides(cfg: SimConfig, overrides: dict) -> SimConfig:
    """Apply a partial, strictly-checked field override onto a SimConfig."""
    if not isinstance(overrides, dict):
        raise ConfigError("config override must be a JSON object")
    allowed = tuple(f.name for f in fields(SimConfig))
    _strict_keys(overrides, allowed, "config override")
    merged = {f.name: getattr(cfg, f.name) for f in fields(SimConfig)}
    try:
        for key, value in overrides.items():
            if key == "contact":
                _strict_keys(value, ("k_n", "gamma_n", "mu_s", "k_t"), "contact")
                base = {"k_n": cfg.contact.k_n, "gamma_n": cfg.contact.gamma_n,
                        "mu_s": cfg.contact.mu_s, "k_t": cfg.contact.k_t}
                base.update({k: float(v) for k, v in value.items()})
                merged["contact"] = ContactParams(**base)
            elif key == "walls":
                walls = []
                for i, wdoc in enumerate(value):
                    _strict_keys(wdoc, ("point", "outward_normal"), f"walls[{i}]")
                    if "point" not in wdoc or "outward_normal" not in wdoc:
                        raise ConfigError(f"walls[{i}] needs point and outward_normal")
                    walls.append(WallPlane(as_vec3(wdoc["point"]),
                                           as_vec3(wdoc["outward_normal"])))
                merged["walls"] = tuple(walls)
            elif key in ("gravity", "domain_min", "domain_max"):
                merged[key] = as_vec3(value)
            elif key in ("k_factor", "seed", "steps"):
                merged[key] = int(value)
            elif key == "verlet_enabled":
                merged[key] = bool(value)
            else:
                merged[key] = float(value)
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad config override: {exc}") from exc
    return SimConfig(**merged)
