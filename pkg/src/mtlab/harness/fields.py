"""Named test fields used by configs and the acceptance suite."""
from __future__ import annotations

from ..geometry import ConfigurationError, ModelSpace
from ..spectral import (SpectralField, hermite_field, quartic_eigenfunction, sphere_field,
                        torus_field, zero_field)


def _cos(space):
    if space.kind != "torus":
        raise ConfigurationError("field 'cos' lives on a torus")
    key = (1,) + (0,) * (space.dim - 1)
    return torus_field(space.dim, {key: (1.0, 0.0)})


def _cos_halfsin2(space):
    if space.key != "torus1":
        raise ConfigurationError("field 'cos+halfsin2' lives on torus1")
    return torus_field(1, {(1,): (1.0, 0.0), (2,): (0.0, 0.5)})


def _hermite(degree):
    def build(space):
        if space.kind != "gauss":
            raise ConfigurationError(f"field 'h{degree}' lives on a Gaussian space")
        key = degree if space.dim == 1 else (degree,) + (0,) * (space.dim - 1)
        return hermite_field(space, {key: 1.0})
    return build


def _quartic(space):
    if space.kind != "quartic":
        raise ConfigurationError("field 'quartic-e1' lives on quartic1")
    return quartic_eigenfunction(1)


def _y10(space):
    if space.kind != "sphere":
        raise ConfigurationError("field 'Y10' lives on sphere2")
    return sphere_field({(1, 0): 1.0})


def _form(k, comp):
    def build(space):
        if space.key != "torus2":
            raise ConfigurationError("1-form fields live on torus2")
        return torus_field(2, {k + (comp,): (1.0, 0.0)}, kind="form")
    return build


def _zero(space):
    return zero_field(space)


FIELDS = {
    "cos": _cos,
    "cos+halfsin2": _cos_halfsin2,
    "h1": _hermite(1),
    "h2": _hermite(2),
    "quartic-e1": _quartic,
    "Y10": _y10,
    "cosx-dx": _form((1, 0), 0),
    "cosy-dx": _form((0, 1), 0),
    "zero": _zero,
}


def build_field(name: str, space: ModelSpace) -> SpectralField:
    if name not in FIELDS:
        raise ConfigurationError(f"unknown field {name!r}; known: {', '.join(sorted(FIELDS))}")
    return FIELDS[name](space)

