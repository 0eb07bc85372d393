"""scikit-learn style wrappers around the Hodge split and the modal basis.

Both estimators are fitted on a cavity domain and then transform batches of
edge fields, one field per row of ``X`` with ``n_dof_edges`` columns.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._linalg import CG_RTOL
from .geometry import DomainSpec, Grid, build_grid
from .hodge import harmonic_basis, project_q_values
from .modes import transverse_modes


def _as_grid(domain) -> Grid:
    if isinstance(domain, Grid):
        return domain
    if isinstance(domain, DomainSpec):
        return build_grid(domain)
    if isinstance(domain, dict):
        return build_grid(DomainSpec.from_dict(domain))
    raise TypeError(f"expected a Grid, DomainSpec or domain dict, got {type(domain).__name__}")


class _DomainFitted(TransformerMixin, BaseEstimator):

    def _check_fields(self, X):
        check_is_fitted(self, "grid_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} is expecting "
                f"{self.n_features_in_} (one per interior edge)"
            )
        return X


class HodgeDecomposition(_DomainFitted):
    """Project edge fields onto their divergence-free part ``R v``.

    Parameters
    ----------
    rtol : float
        Relative residual of the Dirichlet Poisson solves.
    compute_harmonic : bool
        Also compute the harmonic basis (``harmonic_components_``) at fit time.

    Attributes
    ----------
    grid_ : Grid
    n_features_in_ : int
        Number of interior edges.
    n_harmonic_ : int
        Dimension of the harmonic space, if ``compute_harmonic``.
    """

    def __init__(self, rtol=CG_RTOL, compute_harmonic=True):
        self.rtol = rtol
        self.compute_harmonic = compute_harmonic

    def fit(self, X, y=None):
        self.grid_ = _as_grid(X)
        self.n_features_in_ = self.grid_.n_dof_edges
        if self.compute_harmonic:
            hb = harmonic_basis(self.grid_)
            self.harmonic_components_ = hb.as_matrix().T
            self.n_harmonic_ = hb.dimension
        return self

    def split(self, X):
        """Return ``(gradient_parts, divfree_parts, potentials)`` row-wise."""
        X = self._check_fields(X)
        q, U = project_q_values(self.grid_, X.T, self.rtol)
        return q.T, X - q.T, U.T

    def transform(self, X):
        return self.split(X)[1]


class TransverseModeProjector(_DomainFitted):
    """Expand edge fields in the lowest transverse cavity modes.

    ``transform`` returns the modal amplitudes ``<f_k, v>`` and
    ``inverse_transform`` resynthesizes ``sum_k c_k f_k``.

    Parameters
    ----------
    n_modes : int
        Number of modes, zero-frequency (harmonic) modes included.
    shift : float
        Weight of the gradient penalty ``G G^T`` in the eigenproblem.
    """

    def __init__(self, n_modes=10, shift=1.0):
        self.n_modes = n_modes
        self.shift = shift

    def fit(self, X, y=None):
        self.grid_ = _as_grid(X)
        self.n_features_in_ = self.grid_.n_dof_edges
        self.modes_ = transverse_modes(self.grid_, self.n_modes, shift=self.shift)
        self.omegas_ = self.modes_.omegas
        self.components_ = self.modes_.as_matrix().T
        return self

    def transform(self, X):
        X = self._check_fields(X)
        return self.grid_.h ** 2 * (X @ self.components_.T)

    def inverse_transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return X @ self.components_
