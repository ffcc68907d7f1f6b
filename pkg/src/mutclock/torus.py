"""Geometry on the d-dimensional torus [0, L)^d.

Distances use the wrap-around metric (per coordinate, the shorter way round),
so the largest possible separation is sqrt(d)*L/2.  Growing mutant regions
are space-time cones: a region seeded at ``apex`` at ``start_time`` covers
every site within ``speed * (t - start_time)`` of the apex at time t.

Membership tests compare squared distances against squared radii; the
compiled kernel does exactly the same arithmetic, so a Python-level
``in_cone`` call reproduces kernel accept/reject decisions bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .backend import get_backend


def wrap_point(coords: Sequence[float], side: float) -> tuple[float, ...]:
    """Canonical representative of a point, every coordinate in [0, side)."""
    out = []
    for c in coords:
        r = math.fmod(c, side)
        if r < 0.0:
            r += side
        if r >= side:  # fmod can land exactly on side after the add
            r = 0.0
        out.append(r)
    return tuple(out)


def torus_distance(x: Sequence[float], y: Sequence[float], side: float) -> float:
    """Wrap-around Euclidean distance between two points."""
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    if side <= 0.0:
        raise ValueError("side must be positive")
    acc = 0.0
    for a, b in zip(x, y):
        delta = abs(a - b)
        if side - delta < delta:
            delta = side - delta
        acc += delta * delta
    return math.sqrt(acc)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d: pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError("dimension must be a positive integer")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Cone:
    """A region growing at constant speed from a seed point."""

    apex: tuple[float, ...]
    start_time: float
    speed: float


def in_cone(x: Sequence[float], t: float, cone: Cone, side: float) -> bool:
    """Is site ``x`` inside the cone's region at time ``t``?

    False for query times before the cone starts.  The comparison is done on
    squared quantities, matching the simulation kernels exactly.
    """
    if len(x) != len(cone.apex):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(cone.apex)}")
    dt = t - cone.start_time
    if dt < 0.0:
        return False
    radius = cone.speed * dt
    acc = 0.0
    for a, b in zip(x, cone.apex):
        delta = abs(a - b)
        if side - delta < delta:
            delta = side - delta
        acc += delta * delta
    return acc <= radius * radius


def hit_test_volume(events, t, alpha, side, n_samples, rng):
    """Monte Carlo estimate of the volume covered by a union of cones.

    ``events`` is a sequence of objects with ``time`` and ``location``
    attributes (or bare ``(time, location)`` pairs), each seeding a region
    that grows at speed ``alpha`` from its location.  ``n_samples`` uniform
    points are drawn from ``rng`` (consuming exactly ``n_samples * d``
    uniforms), and the covered fraction is scaled by the torus volume.

    Returns ``(estimate, std_error)``; an empty event list returns (0, 0)
    without consuming randomness.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if side <= 0.0 or alpha < 0.0:
        raise ValueError("need side > 0 and alpha >= 0")
    pairs = []
    for ev in events:
        if hasattr(ev, "time"):
            s, loc = ev.time, ev.location
        else:
            s, loc = ev
        if s <= t:  # a cone seeded after t covers nothing yet
            pairs.append((float(s), tuple(float(c) for c in loc)))
    if not pairs:
        return 0.0, 0.0
    d = len(pairs[0][1])
    if any(len(loc) != d for _, loc in pairs):
        raise ValueError("events have mixed dimensions")

    backend = get_backend()
    times = [s for s, _ in pairs]
    coords = [c for _, loc in pairs for c in loc]
    hits, new_state = backend.hit_test_count(
        times, coords, d, side, alpha, t, n_samples, rng.getstate()
    )
    rng.setstate(new_state)

    volume = side ** d
    p = hits / n_samples
    estimate = volume * p
    std_error = volume * math.sqrt(p * (1.0 - p) / n_samples)
    return estimate, std_error
