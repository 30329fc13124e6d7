"""Quadrature rules and the modal Legendre basis on the reference cell [0, 1].

All rules live on [0, 1] with weights summing to one, so applying a rule to
nodal values returns a reference-cell average; multiply by the cell width to
get a physical integral.  Gauss rules with n points are exact for polynomial
degree 2n-1, Gauss-Lobatto rules for degree 2n-3.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [0, 1]: (nodes, weights), weights sum to 1."""
    if n < 1:
        raise ValueError("need at least one quadrature point")
    x, w = npleg.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def gauss_lobatto(n):
    """n-point Gauss-Lobatto rule on [0, 1]: (nodes, weights), weights sum to 1.

    Nodes include both endpoints; interior nodes are the roots of P'_{n-1}.
    """
    if n < 2:
        raise ValueError("Lobatto rules need at least two points")
    # roots of the derivative of the (n-1)-th Legendre polynomial on [-1, 1]
    cn = np.zeros(n)
    cn[-1] = 1.0
    interior = npleg.legroots(npleg.legder(cn))
    x = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    pn1 = npleg.legval(x, cn)
    w = 2.0 / (n * (n - 1) * pn1**2)
    return (x + 1.0) / 2.0, w / 2.0


class ModalBasis:
    """Orthonormal Legendre modes phi_j on [0, 1]; mode 0 is the constant 1.

    phi_j(s) = sqrt(2j+1) * P_j(2s - 1), so <phi_i, phi_j> = delta_ij in the
    unit-measure inner product and a modal coefficient 0 equals the cell mean.
    """

    def __init__(self, degree):
        self.degree = degree
        self.nmodes = degree + 1
        self._scale = np.sqrt(2.0 * np.arange(self.nmodes) + 1.0)

    def eval(self, points):
        """Values phi_j(points): array (npoints, nmodes)."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        v = npleg.legvander(2.0 * pts - 1.0, self.degree)
        return v * self._scale

    def eval_deriv(self, points):
        """Derivatives phi_j'(points) (d/ds on [0, 1]): array (npoints, nmodes)."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        out = np.zeros((pts.size, self.nmodes))
        for j in range(1, self.nmodes):
            cj = np.zeros(j + 1)
            cj[j] = 1.0
            out[:, j] = 2.0 * self._scale[j] * npleg.legval(2.0 * pts - 1.0, npleg.legder(cj))
        return out


def project_values(values, weights, basis_at_nodes):
    """Modal coefficients of the L2 projection from nodal samples.

    values: (..., npoints) samples at the rule's nodes, weights: (npoints,),
    basis_at_nodes: (npoints, nmodes).  Exact when the sampled function times
    each mode is within the rule's exactness degree.
    """
    return np.asarray(values) @ (weights[:, None] * basis_at_nodes)
