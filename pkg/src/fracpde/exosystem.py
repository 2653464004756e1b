"""Linear signal generator V' = S V for disturbances, reference and measurement spans."""

from __future__ import annotations

import numpy as np

__all__ = ["Exosystem"]

_REAL_TOL = 1e-12


class Exosystem:
    """V(t) = exp(S t) V0 with readouts d1 = a.V, d2 = b.V, y_d = c.V, y_m = q.V.

    S must have distinct eigenvalues with non-positive real parts. Eigenvalues on the
    imaginary axis (needed for a persistent sinusoidal reference) are accepted and
    flagged through ``marginal``; eigenvalues with positive real part are rejected.
    """

    def __init__(self, S, V0, a=None, b=None, c=None, q=None):
        S = np.atleast_2d(np.asarray(S, dtype=np.float64))
        n = S.shape[0]
        if S.shape != (n, n):
            raise ValueError(f"S must be square, got shape {S.shape}")
        self.S = S
        self.n = n
        self.V0 = self._vec(V0, "V0")
        self.a = self._vec(a, "a")
        self.b = self._vec(b, "b")
        self.c = self._vec(c, "c")
        self.q = self._vec(q, "q")
        try:
            lam, W = np.linalg.eig(S)
            Winv = np.linalg.inv(W)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"eigendecomposition of S failed: {exc}") from exc
        scale = max(1.0, float(np.max(np.abs(lam))))
        if n > 1:
            gaps = np.abs(lam[:, None] - lam[None, :])
            np.fill_diagonal(gaps, np.inf)
            if np.min(gaps) < 1e-9 * scale:
                raise ValueError("S must have distinct eigenvalues")
        re_max = float(np.max(lam.real))
        if re_max > _REAL_TOL * scale:
            raise ValueError(f"S has an unstable eigenvalue (max real part {re_max:g})")
        self.eigenvalues = lam
        self._W = W
        self._Winv = Winv
        self._coef = Winv @ self.V0
        self.marginal = bool(re_max >= -_REAL_TOL * scale)

    def _vec(self, v, name):
        if v is None:
            return np.zeros(self.n)
        v = np.atleast_1d(np.asarray(v, dtype=np.float64)).ravel()
        if v.size != self.n:
            raise ValueError(f"{name} must have length {self.n}, got {v.size}")
        return v

    @property
    def max_real_part(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def transition(self, t: float) -> np.ndarray:
        """exp(S t)."""
        if t < 0:
            raise ValueError("the exosystem is evolved forward only (t >= 0)")
        return (self._W @ np.diag(np.exp(self.eigenvalues * t)) @ self._Winv).real

    def evolve(self, t) -> np.ndarray:
        """V(t); a vector for scalar t, an array of shape (len(t), n) otherwise."""
        ts = np.asarray(t, dtype=np.float64)
        if np.any(ts < 0):
            raise ValueError("the exosystem is evolved forward only (t >= 0)")
        modes = np.exp(np.multiply.outer(ts, self.eigenvalues)) * self._coef
        out = (modes @ self._W.T).real
        return out

    def signals(self, t):
        """(d1, d2, y_d, y_m) at time t."""
        V = self.evolve(t)
        return V @ self.a, V @ self.b, V @ self.c, V @ self.q

    def modal(self):
        """Eigenvalues, eigenvector matrix W and its inverse (S = W diag(lam) W^-1)."""
        return self.eigenvalues, self._W, self._Winv

    def to_dict(self) -> dict:
        return {
            "S": self.S.tolist(),
            "V0": self.V0.tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "q": self.q.tolist(),
        }

    def __repr__(self):
        return f"Exosystem(n={self.n}, eigenvalues={np.round(self.eigenvalues, 6).tolist()}, marginal={self.marginal})"
