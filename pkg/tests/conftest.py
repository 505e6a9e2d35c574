import math

import numpy as np
import pytest

import levymaps as lm


def single_ray(rm, coord=1.0, weight=1.0):
    return lm.PolarLevyMeasure((lm.Ray(lm.Direction((coord,)), weight, rm),))


def polar(entries):
    """entries: list of (coord, weight, radial) in dimension one."""
    return lm.PolarLevyMeasure(
        tuple(lm.Ray(lm.Direction((x,)), w, rm) for x, w, rm in entries)
    )


@pytest.fixture(scope="session")
def kernels():
    return {name: lm.builtin_kernel(name) for name in ("u", "upsilon", "g", "phi", "psi")}


@pytest.fixture(scope="session")
def battery():
    """Five light-tailed test laws, all with finite log moments of all orders."""
    gauss = lm.LevyTriplet(np.array([[1.0]]), None, np.array([0.0]))
    cp_atom = lm.LevyTriplet(np.zeros((1, 1)), single_ray(lm.AtomicRadial(((1.0, 1.0),))), np.zeros(1))
    mix = lm.LevyTriplet(
        np.array([[0.5]]),
        polar([
            (1.0, 1.0, lm.AtomicRadial(((0.5, 0.7), (2.0, 0.3)))),
            (-1.0, 0.5, lm.AtomicRadial(((1.5, 0.4),))),
        ]),
        np.array([0.1]),
    )
    two_sided = lm.LevyTriplet(
        np.zeros((1, 1)),
        polar([
            (1.0, 1.0, lm.AtomicRadial(((math.e, 1.0),))),
            (-1.0, 1.0, lm.AtomicRadial(((math.e**2, 0.5),))),
        ]),
        np.zeros(1),
    )
    tempered = lm.LevyTriplet(
        np.zeros((1, 1)), single_ray(lm.TemperedRadial(0.5, 1.0, 1.0)), np.zeros(1)
    )
    return {
        "gauss": gauss,
        "cp_atom": cp_atom,
        "mix": mix,
        "two_sided": two_sided,
        "tempered": tempered,
    }


@pytest.fixture(scope="session")
def z_grid():
    return [np.array([v]) for v in (0.6, 1.7, 3.2)]
