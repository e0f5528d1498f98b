"""Finite-difference checks of tape gradients, used by the test suite."""
from collections import namedtuple

import numpy as np

from otfslab.autodiff.tensor import Tape, Tensor

GradientMismatch = namedtuple('GradientMismatch', 'input_index element analytic numeric')


def analytic_gradients(fn, arrays):
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        root = fn(*leaves)
    grads = tape.backward(root, leaves)
    return [grads[leaf] for leaf in leaves]


def numeric_derivative(fn, arrays, input_index, element, h=1e-4):
    """Central difference with a step relative to the coordinate."""
    shifted = [np.array(a, dtype=np.float64) for a in arrays]
    step = h * max(1.0, abs(shifted[input_index][element]))
    shifted[input_index][element] += step
    upper = fn(*[Tensor(a) for a in shifted]).item()
    shifted[input_index][element] -= 2 * step
    lower = fn(*[Tensor(a) for a in shifted]).item()
    return (upper - lower) / (2 * step)


def gradient_mismatches(fn, arrays, h=1e-4, rtol=1e-4, atol=1e-7, samples=None, seed=0):
    """Compares tape gradients of scalar-valued `fn` against central
    differences. With `samples`, only that many randomly chosen
    coordinates are checked. Returns the list of coordinates that disagree."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = analytic_gradients(fn, arrays)
    coords = [(i, element) for i, a in enumerate(arrays) for element in np.ndindex(a.shape)]
    if samples is not None and samples < len(coords):
        picks = np.random.default_rng(seed).choice(len(coords), size=samples, replace=False)
        coords = [coords[p] for p in sorted(picks)]
    mismatches = []
    for i, element in coords:
        numeric = numeric_derivative(fn, arrays, i, element, h=h)
        analytic = float(grads[i][element])
        if abs(numeric - analytic) > max(atol, rtol * max(abs(numeric), abs(analytic))):
            mismatches.append(GradientMismatch(i, element, analytic, numeric))
    return mismatches
