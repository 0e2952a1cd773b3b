"""Shared fixtures: standard algebras and approximate-pair builders."""

import importlib.resources

import numpy as np
import pytest
from hypothesis import settings

from derivstab import (
    ApproximateMapPair,
    ModuleElement,
    PowerNoise,
    Zero,
    algebra_from_json,
    inner_generalized,
    make_matrix_algebra,
    make_self_bimodule,
)

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def m2():
    return make_matrix_algebra(2)


@pytest.fixture(scope="session")
def m3():
    return make_matrix_algebra(3)


@pytest.fixture(scope="session")
def quaternion():
    text = (importlib.resources.files("derivstab.scenarios")
            / "quaternion_algebra.json").read_text(encoding="utf-8")
    return algebra_from_json(text)


def make_inner_pair(algebra, x_coords, y_coords):
    bimod = make_self_bimodule(algebra)
    return inner_generalized(ModuleElement(bimod, x_coords),
                             ModuleElement(bimod, y_coords))


# The bundled corollary24 configuration: scale-invariant p = 1/2 noise on f.
X2 = [0.5, 1.0, -0.25, 0.5j]
Y2 = [0.25, -0.5j, 0.75, 1.0]


@pytest.fixture(scope="session")
def corollary_pair(m2):
    return ApproximateMapPair(
        exact=make_inner_pair(m2, X2, Y2),
        f_perturbation=PowerNoise(beta=0.1, p=0.5, seed=15),
        g_perturbation=Zero())


def max_abs(arr) -> float:
    return float(np.max(np.abs(arr))) if np.asarray(arr).size else 0.0
