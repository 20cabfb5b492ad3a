"""Multilinear machinery for homogeneous vector polynomials.

Fixes one global monomial order (degree-k multi-indices in descending
lexicographic order) and builds on it:

* the D-dimensional monomial basis, D = C(n+k-1, k);
* the grouping map collapsing a multi-index over n variables to weights over
  m coordinate blocks;
* Kronecker products and the lifted matrices of x -> (Ax)^tau expansions;
* the derivation h -> (dh/dx) A x and the homological operator
  h -> A h - (dh/dx) A x on coefficient vectors;
* the factorized evolution blocks of the homological flow for block-diagonal
  coefficient matrices.

Coefficient vectors for vector-valued polynomials are ordered basis-major:
all d value components of the first monomial, then the second, and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import SizeCapError

SIZE_CAP = 20000  # guard on D * n for lifted operators


def _descending_indices(n, k):
    if n == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _descending_indices(n - 1, k - first):
            yield (first,) + rest


@dataclass(frozen=True)
class MultiIndexBasis:
    """All multi-indices of weight k over n variables, descending-lex ordered."""

    n: int
    k: int
    indices: tuple
    index_of: dict = field(compare=False, repr=False)

    @property
    def D(self):
        return len(self.indices)

    def position(self, index):
        return self.index_of[tuple(index)]


@lru_cache(maxsize=None)
def enumerate_basis(n, k):
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if k < 0:
        raise ValueError(f"need k >= 0, got {k}")
    d = math.comb(n + k - 1, k)
    if d * n > SIZE_CAP:
        raise SizeCapError(f"basis size D*n = {d * n} exceeds cap {SIZE_CAP}")
    indices = tuple(_descending_indices(n, k))
    assert len(indices) == d
    return MultiIndexBasis(n=n, k=k, indices=indices,
                           index_of={idx: p for p, idx in enumerate(indices)})


def group_map(index, block_sizes):
    """Collapse a multi-index over n variables to weights over coordinate blocks."""
    if sum(block_sizes) != len(index):
        raise ValueError(f"block sizes {block_sizes} do not partition {len(index)} variables")
    out = []
    pos = 0
    for size in block_sizes:
        out.append(sum(index[pos:pos + size]))
        pos += size
    return tuple(out)


def group_blocks(basis, block_sizes):
    """Basis positions per group image; this ordering is the block permutation."""
    blocks = {}
    for pos, idx in enumerate(basis.indices):
        blocks.setdefault(group_map(idx, tuple(block_sizes)), []).append(pos)
    return blocks


def block_dimension(tau, block_sizes):
    """q_tau: the number of degree-tau_i monomials drawn from each block."""
    q = 1
    for ti, ni in zip(tau, block_sizes):
        q *= math.comb(ti + ni - 1, ti)
    return q


def kronecker(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size * b.size > SIZE_CAP ** 2:
        raise SizeCapError("Kronecker product exceeds size cap")
    return np.kron(a, b)


def kronecker_det(a, b):
    """det(A kron B) = det(A)^q * det(B)^p for A p-by-p, B q-by-q.

    The exponent convention (each determinant raised to the *other* factor's
    dimension) is fixed by brute-force evaluation on asymmetric sizes.
    """
    p = a.shape[0]
    q = b.shape[0]
    return float(np.linalg.det(a)) ** q * float(np.linalg.det(b)) ** p


def _multinomial(total, parts):
    value = math.factorial(total)
    for p in parts:
        value //= math.factorial(p)
    return value


def _linear_form_power(coeffs, power):
    """Expansion of (sum_j coeffs[j] x_j)^power as {multi-index: coefficient}."""
    n = len(coeffs)
    if power == 0:
        return {(0,) * n: 1.0}
    out = {}
    for alpha in enumerate_basis(n, power).indices:
        c = float(_multinomial(power, alpha))
        for aj, cj in zip(alpha, coeffs):
            if aj:
                c *= cj ** aj
            if c == 0.0:
                break
        if c != 0.0:
            out[alpha] = c
    return out


def _poly_multiply(p1, p2):
    out = {}
    for i1, c1 in p1.items():
        for i2, c2 in p2.items():
            key = tuple(a + b for a, b in zip(i1, i2))
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def lift_matrix(a, k):
    """D-by-D matrix of the substitution x -> Ax on degree-k monomials.

    Column tau holds the monomial coefficients of (Ax)^tau; the multinomial
    combinatorics are exact integers, so floats enter only through A.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if k < 1:
        raise ValueError("need k >= 1")
    basis = enumerate_basis(n, k)
    out = np.zeros((basis.D, basis.D))
    for col, tau in enumerate(basis.indices):
        poly = {(0,) * n: 1.0}
        for i, ti in enumerate(tau):
            if ti:
                poly = _poly_multiply(poly, _linear_form_power(a[i], ti))
        for idx, c in poly.items():
            out[basis.position(idx), col] = c
    return out


def lift_derivation(a, k):
    """D-by-D matrix of h -> (dh/dx) A x on scalar degree-k polynomials."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if k < 1:
        raise ValueError("need k >= 1")
    basis = enumerate_basis(n, k)
    out = np.zeros((basis.D, basis.D))
    for col, tau in enumerate(basis.indices):
        for j in range(n):
            tj = tau[j]
            if not tj:
                continue
            for l in range(n):
                if a[j, l] == 0.0:
                    continue
                shifted = list(tau)
                shifted[j] -= 1
                shifted[l] += 1
                out[basis.position(tuple(shifted)), col] += tj * a[j, l]
    return out


def homological_operator(a, k):
    """(Dn)-by-(Dn) matrix of h -> A h - (dh/dx) A x on coefficient vectors."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if k < 2:
        raise ValueError("need k >= 2")
    basis = enumerate_basis(n, k)
    if basis.D * n > SIZE_CAP:
        raise SizeCapError(f"homological operator size {basis.D * n} exceeds cap")
    return np.kron(np.eye(basis.D), a) - np.kron(lift_derivation(a, k), np.eye(n))


@dataclass
class CoeffVector:
    """Coefficients of a degree-k vector polynomial, basis-major layout."""

    basis: MultiIndexBasis
    d: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.basis.D * self.d:
            raise ValueError(
                f"expected {self.basis.D * self.d} values, got {self.values.shape[-1]}"
            )

    def slot(self, index, component):
        return self.basis.position(index) * self.d + component

    def coefficient(self, index, component):
        return self.values[..., self.slot(index, component)]


def evolution_factorization(block_evs, block_sizes, k, tau, j, t, s):
    """The (tau, j) diagonal block of the homological flow, by factorization.

    For block-diagonal A the evolution operator of h' = L_k(t) h splits into
    blocks  N(Phi_A(s, t))_tau  kron  Phi_{A_j}(t, s), where N(.)_tau is the
    diagonal block of the lifted inverse propagator selected by the grouping
    map.  Block sizes must match the given evolution operators.
    """
    m = len(block_sizes)
    if len(block_evs) != m:
        raise ValueError("one evolution operator per block required")
    if len(tau) != m or sum(tau) != k:
        raise ValueError(f"tau {tau} incompatible with k={k}, m={m}")
    if not 0 <= j < m:
        raise ValueError(f"block index j={j} outside 0..{m - 1}")
    n = sum(block_sizes)
    back = np.zeros((n, n))
    pos = 0
    for ev, size in zip(block_evs, block_sizes):
        back[pos:pos + size, pos:pos + size] = ev.propagate(s, t)
        pos += size
    basis = enumerate_basis(n, k)
    lifted = lift_matrix(back, k)
    rows = group_blocks(basis, tuple(block_sizes))[tuple(tau)]
    n_tau = lifted[np.ix_(rows, rows)]
    return np.kron(n_tau, block_evs[j].propagate(t, s))
