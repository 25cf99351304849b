"""Independent reference computations used by the test suites."""
import math

import numpy as np

G = 6.67430e-11
HBAR = 6.62607015e-34 / (2 * math.pi)
MU_B = 9.2740100783e-24
EPS0 = 8.8541878128e-12


def cumsum_branches(a_left, a_right, t1, n_steps):
    """Grid integration of the four-segment free-flight sequence.

    Accelerations are piecewise constant and swap at t1 and 3 t1. Velocity is
    a cumulative sum and position a trapezoidal cumulative sum, so the grid
    must align with t1 (n_steps divisible by 4).
    """
    assert n_steps % 4 == 0
    h = 4 * t1 / n_steps
    q = n_steps // 4
    a = np.empty((2, n_steps))
    a[0] = np.concatenate([np.full(q, a_left), np.full(2 * q, a_right), np.full(q, a_left)])
    a[1] = np.concatenate([np.full(q, a_right), np.full(2 * q, a_left), np.full(q, a_right)])
    v = np.concatenate([np.zeros((2, 1)), np.cumsum(a * h, axis=1)], axis=1)
    x = np.concatenate([np.zeros((2, 1)), np.cumsum(0.5 * (v[:, 1:] + v[:, :-1]) * h, axis=1)],
                       axis=1)
    t = np.linspace(0.0, 4 * t1, n_steps + 1)
    return t, x, v


def four_term_phase(m, tau, d, dx):
    """Entangling phase of the linear arrangement from the four branch distances."""
    phi = {k: G * m * m * tau / (HBAR * r)
           for k, r in {"LL": d, "LR": d + dx, "RL": d - dx, "RR": d}.items()}
    return phi["LR"] + phi["RL"] - phi["LL"] - phi["RR"]


def dipole_ratio(m, d, p, kappa=1.0):
    return kappa * p * p / (4 * math.pi * EPS0 * G * m * m * d * d)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_density_matrix(rng, dim, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_separable(rng, n_terms):
    """Convex mixture of product states."""
    w = rng.dirichlet(np.ones(n_terms))
    rho = np.zeros((4, 4), dtype=complex)
    for wi in w:
        ra = random_density_matrix(rng, 2, rank=int(rng.integers(1, 3)))
        rb = random_density_matrix(rng, 2, rank=int(rng.integers(1, 3)))
        rho += wi * np.kron(ra, rb)
    return 0.5 * (rho + rho.conj().T)
