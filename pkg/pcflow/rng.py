"""Counter-based random streams for particle ensembles.

Every random number pcflow draws is a pure function of
(seed, particle, phase, step, block): a Philox4x32-10 block cipher keyed by the
64-bit seed encrypts the counter (particle, phase, step, block). Nothing is
carried between draws, so particles can be processed in any order, or in
parallel, and replays are bit-exact.
"""

import dataclasses
import math
from typing import Sequence, Union

import numba as nb
import numpy as np

# Phase tags. The phase counter word packs a tag with an epoch index.
INIT = 1
CORRECTOR = 2
VELOCITY = 3
COMPONENT = 4
MIXTURE = 5
DIRECTION = 6
DIAGNOSTIC = 7
PROJECTION = 8

_WORD = 2**32
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)
_INV_2_53 = 1.0 / 9007199254740992.0


def phase(tag: int, epoch: int = 0) -> int:
    """Pack a phase tag and an epoch index into one counter word."""
    if not 0 < tag < 256:
        raise ValueError(f"Phase tag must be in [1, 255], got {tag}")
    if not 0 <= epoch < 2**24:
        raise ValueError(f"Epoch index must be in [0, 2**24), got {epoch}")
    return tag + (epoch << 8)


@dataclasses.dataclass(frozen=True)
class RngStream:
    """The identity of one random stream."""

    seed: int
    particle: int = 0
    phase: int = INIT
    step: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"Seed must be an unsigned 64-bit integer, got {self.seed}")
        for field in ("particle", "phase", "step"):
            value = getattr(self, field)
            if not 0 <= value < _WORD:
                raise ValueError(f"Stream {field} must be in [0, 2**32), got {value}")

    def at(self, **changes) -> "RngStream":
        return dataclasses.replace(self, **changes)

    def normal(self, d: int) -> np.ndarray:
        return gaussian_vector(self, d)

    def uniform(self, count: int) -> np.ndarray:
        return uniform_vector(self, count)


def _key(seed: int):
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@nb.njit(cache=True)
def _philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK32, lo1, (hi0 ^ c3 ^ k1) & _MASK32, lo0
        k0 = (k0 + _PHILOX_W0) & _MASK32
        k1 = (k1 + _PHILOX_W1) & _MASK32
    return c0, c1, c2, c3


@nb.njit(cache=True)
def _uniform_pair(c0, c1, c2, c3, k0, k1):
    r0, r1, r2, r3 = _philox4x32(c0, c1, c2, c3, k0, k1)
    a = ((r0 << _SHIFT32) | r1) >> _SHIFT11
    b = ((r2 << _SHIFT32) | r3) >> _SHIFT11
    # 53-bit uniforms in the open interval (0, 1).
    return (np.float64(a) + 0.5) * _INV_2_53, (np.float64(b) + 0.5) * _INV_2_53


@nb.njit(parallel=True, cache=True)
def _normal_block(k0, k1, particles, phase_word, step, d):
    n = particles.shape[0]
    out = np.empty((n, d))
    blocks = (d + 1) // 2
    c1 = np.uint64(phase_word)
    c2 = np.uint64(step)
    for i in nb.prange(n):
        c0 = np.uint64(particles[i])
        for b in range(blocks):
            u1, u2 = _uniform_pair(c0, c1, c2, np.uint64(b), k0, k1)
            radius = math.sqrt(-2.0 * math.log(u1))
            angle = 2.0 * math.pi * u2
            j = 2 * b
            out[i, j] = radius * math.cos(angle)
            if j + 1 < d:
                out[i, j + 1] = radius * math.sin(angle)
    return out


@nb.njit(parallel=True, cache=True)
def _uniform_block(k0, k1, particles, phase_word, step, count):
    n = particles.shape[0]
    out = np.empty((n, count))
    blocks = (count + 1) // 2
    c1 = np.uint64(phase_word)
    c2 = np.uint64(step)
    for i in nb.prange(n):
        c0 = np.uint64(particles[i])
        for b in range(blocks):
            u1, u2 = _uniform_pair(c0, c1, c2, np.uint64(b), k0, k1)
            j = 2 * b
            out[i, j] = u1
            if j + 1 < count:
                out[i, j + 1] = u2
    return out


def _as_particles(particles: Union[int, Sequence[int], np.ndarray]) -> np.ndarray:
    if np.isscalar(particles):
        particles = np.arange(int(particles))
    particles = np.ascontiguousarray(particles, dtype=np.int64)
    if particles.size and (particles.min() < 0 or particles.max() >= _WORD):
        raise ValueError("Particle indices must be in [0, 2**32)")
    return particles


def gaussian_block(
    seed: int,
    particles: Union[int, Sequence[int], np.ndarray],
    phase_word: int,
    step: int,
    d: int,
) -> np.ndarray:
    """Standard normal draws, one row of length `d` per particle.

    Row i is identical to `gaussian_vector(RngStream(seed, particles[i],
    phase_word, step), d)`; `particles` may also be a count n meaning 0..n-1.
    """
    if d < 1:
        raise ValueError(f"Dimension must be at least 1, got {d}")
    particles = _as_particles(particles)
    k0, k1 = _key(RngStream(seed, 0, phase_word, step).seed)
    return _normal_block(k0, k1, particles, phase_word, step, d)


def uniform_block(
    seed: int,
    particles: Union[int, Sequence[int], np.ndarray],
    phase_word: int,
    step: int,
    count: int,
) -> np.ndarray:
    """Uniform (0, 1) draws, one row of length `count` per particle."""
    if count < 1:
        raise ValueError(f"Count must be at least 1, got {count}")
    particles = _as_particles(particles)
    k0, k1 = _key(RngStream(seed, 0, phase_word, step).seed)
    return _uniform_block(k0, k1, particles, phase_word, step, count)


def gaussian_vector(rng: RngStream, d: int) -> np.ndarray:
    """Draw `d` i.i.d. standard normal entries from one stream."""
    return gaussian_block(rng.seed, [rng.particle], rng.phase, rng.step, d)[0]


def uniform_vector(rng: RngStream, count: int) -> np.ndarray:
    return uniform_block(rng.seed, [rng.particle], rng.phase, rng.step, count)[0]


def unit_vector(rng: RngStream, d: int) -> np.ndarray:
    """A direction drawn uniformly from the unit sphere."""
    direction = gaussian_vector(rng, d)
    return direction / np.linalg.norm(direction)
