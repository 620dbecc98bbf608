"""Continuous-time linear system algebra.

Everything in the toolkit is expressed as a :class:`StateSpace` with named
scalar input and output signals.  Block diagrams are closed with
:func:`interconnect`, which wires signals by name (an input called ``"e"`` is
driven by whichever block produces ``"e"``), in the spirit of MATLAB's
``connect``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import signal

__all__ = [
    "LinsysError",
    "WiringError",
    "WellPosednessError",
    "UnstableSystemError",
    "EvaluationError",
    "MetricsError",
    "ClassificationError",
    "StateSpace",
    "FreqResponse",
    "StepMetrics",
    "PoleClassification",
    "tf",
    "static_gain",
    "integrator",
    "sumblock",
    "signal_names",
    "series",
    "parallel",
    "append",
    "feedback",
    "inverse",
    "interconnect",
    "minreal",
    "freq_response",
    "hinf_norm",
    "step_response",
    "step_metrics",
    "classify_poles",
]


class LinsysError(ValueError):
    """Base class for linear-system errors."""


class WiringError(LinsysError):
    pass


class WellPosednessError(LinsysError):
    pass


class UnstableSystemError(LinsysError):
    pass


class EvaluationError(LinsysError):
    pass


class MetricsError(LinsysError):
    pass


class ClassificationError(LinsysError):
    pass


def signal_names(base: str, n: int) -> list[str]:
    """``signal_names("m_c", 3) -> ["m_c0", "m_c1", "m_c2"]``."""
    return [f"{base}{i}" for i in range(n)]


@dataclass(eq=False)
class StateSpace:
    """Realization ``x' = Ax + Bu, y = Cx + Du`` with named signals."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: tuple[str, ...] = field(default=None)
    outputs: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        self.A, self.B, self.C, self.D = A, B, C, D
        if self.inputs is None:
            self.inputs = tuple(signal_names("u", m))
        if self.outputs is None:
            self.outputs = tuple(signal_names("y", p))
        self.inputs = tuple(self.inputs)
        self.outputs = tuple(self.outputs)
        if len(self.inputs) != m or len(self.outputs) != p:
            raise LinsysError(
                f"signal names ({len(self.inputs)} in, {len(self.outputs)} out) "
                f"do not match D shape {D.shape}"
            )

    # -- shape -----------------------------------------------------------
    @property
    def nstates(self) -> int:
        return self.A.shape[0]

    @property
    def ninputs(self) -> int:
        return self.D.shape[1]

    @property
    def noutputs(self) -> int:
        return self.D.shape[0]

    def __repr__(self):
        return (f"StateSpace(n={self.nstates}, inputs={list(self.inputs)}, "
                f"outputs={list(self.outputs)})")

    # -- analysis --------------------------------------------------------
    def poles(self) -> np.ndarray:
        if self.nstates == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.A)

    def is_stable(self) -> bool:
        return bool(np.all(self.poles().real < 0))

    def dcgain(self) -> np.ndarray:
        if self.nstates == 0:
            return self.D.copy()
        return self.D - self.C @ np.linalg.solve(self.A, self.B)

    def __call__(self, s) -> np.ndarray:
        """Transfer matrix at complex frequency ``s`` (scalar)."""
        n = self.nstates
        if n == 0:
            return self.D.astype(complex)
        X = np.linalg.solve(s * np.eye(n) - self.A, self.B)
        return self.C @ X + self.D

    # -- signal bookkeeping ----------------------------------------------
    def rename(self, inputs=None, outputs=None) -> "StateSpace":
        return StateSpace(self.A, self.B, self.C, self.D,
                          inputs if inputs is not None else self.inputs,
                          outputs if outputs is not None else self.outputs)

    def select(self, inputs: Sequence[str] | None = None,
               outputs: Sequence[str] | None = None) -> "StateSpace":
        """Sub-system restricted to the named channels (order as given)."""
        ii = [self.inputs.index(s) for s in inputs] if inputs is not None \
            else list(range(self.ninputs))
        oo = [self.outputs.index(s) for s in outputs] if outputs is not None \
            else list(range(self.noutputs))
        return StateSpace(self.A, self.B[:, ii], self.C[oo, :],
                          self.D[np.ix_(oo, ii)],
                          [self.inputs[i] for i in ii],
                          [self.outputs[o] for o in oo])

    # -- algebra ---------------------------------------------------------
    def __mul__(self, other):
        if np.isscalar(other):
            return StateSpace(self.A, self.B, other * self.C, other * self.D,
                              self.inputs, self.outputs)
        return series(other, self)

    def __rmul__(self, other):
        if np.isscalar(other):
            return self.__mul__(other)
        return NotImplemented

    def __add__(self, other):
        if np.isscalar(other):
            other = static_gain(other * np.eye(self.noutputs, self.ninputs))
        return parallel(self, other)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other


def tf(num, den, inputs=None, outputs=None) -> StateSpace:
    """SISO realization of ``num(s)/den(s)`` (coefficients highest power first)."""
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    if len(num) > len(den):
        raise LinsysError("improper transfer function")
    A, B, C, D = signal.tf2ss(num, den)
    return StateSpace(A, B, C, D, inputs or ("u0",), outputs or ("y0",))


def static_gain(K, inputs=None, outputs=None) -> StateSpace:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    p, m = K.shape
    return StateSpace(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), K,
                      inputs, outputs)


def integrator(input_name="u0", output_name="y0") -> StateSpace:
    return StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]], (input_name,), (output_name,))


_TERM = re.compile(r"([+-]?)\s*([A-Za-z_][A-Za-z_0-9]*)")


def sumblock(expr: str) -> StateSpace:
    """Static summing junction from an expression like ``"e = r - y"``."""
    try:
        lhs, rhs = expr.split("=")
    except ValueError as exc:
        raise WiringError(f"bad sum expression {expr!r}") from exc
    out = lhs.strip()
    rhs = rhs.strip()
    if not rhs.startswith(("+", "-")):
        rhs = "+" + rhs
    terms = _TERM.findall(rhs.replace(" ", ""))
    if not terms:
        raise WiringError(f"bad sum expression {expr!r}")
    names = [t[1] for t in terms]
    gains = [[-1.0 if t[0] == "-" else 1.0 for t in terms]]
    return static_gain(gains, names, [out])


# ---------------------------------------------------------------------------
# elementary composition (signal names are dropped where ambiguous)


def series(first: StateSpace, second: StateSpace) -> StateSpace:
    """``second * first``: output of ``first`` feeds ``second``."""
    if first.noutputs != second.ninputs:
        raise WiringError("series: dimension mismatch")
    n1 = first.nstates
    A = np.block([[first.A, np.zeros((n1, second.nstates))],
                  [second.B @ first.C, second.A]])
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D, first.inputs, second.outputs)


def parallel(a: StateSpace, b: StateSpace) -> StateSpace:
    if a.D.shape != b.D.shape:
        raise WiringError("parallel: dimension mismatch")
    A = sla.block_diag(a.A, b.A)
    return StateSpace(A, np.vstack([a.B, b.B]), np.hstack([a.C, b.C]),
                      a.D + b.D, a.inputs, a.outputs)


def append(*systems: StateSpace) -> StateSpace:
    """Block-diagonal stacking; names are concatenated."""
    n = sum(s.nstates for s in systems)
    m = sum(s.ninputs for s in systems)
    p = sum(s.noutputs for s in systems)
    A, B = np.zeros((n, n)), np.zeros((n, m))
    C, D = np.zeros((p, n)), np.zeros((p, m))
    i = j = k = 0
    for s in systems:
        ns, ms, ps = s.nstates, s.ninputs, s.noutputs
        A[i:i + ns, i:i + ns] = s.A
        B[i:i + ns, j:j + ms] = s.B
        C[k:k + ps, i:i + ns] = s.C
        D[k:k + ps, j:j + ms] = s.D
        i, j, k = i + ns, j + ms, k + ps
    ins = [n for s in systems for n in s.inputs]
    outs = [n for s in systems for n in s.outputs]
    return StateSpace(A, B, C, D, ins, outs)


def inverse(sys: StateSpace) -> StateSpace:
    """Inverse system; requires a square, invertible feedthrough."""
    if sys.ninputs != sys.noutputs:
        raise LinsysError("inverse of non-square system")
    try:
        Di = np.linalg.inv(sys.D)
    except np.linalg.LinAlgError as exc:
        raise WellPosednessError("singular feedthrough, system not invertible") from exc
    return StateSpace(sys.A - sys.B @ Di @ sys.C, sys.B @ Di, -Di @ sys.C, Di,
                      sys.outputs, sys.inputs)


def feedback(G: StateSpace, K: StateSpace | None = None, sign: float = -1.0) -> StateSpace:
    """Closed loop ``G / (I - sign*K*G)``; ``K`` defaults to identity."""
    if K is None:
        K = static_gain(np.eye(G.noutputs))
    nG = G.nstates
    M = np.eye(G.ninputs) - sign * K.D @ G.D
    if np.linalg.cond(M) > 1e12:
        raise WellPosednessError("feedback loop is ill-posed (I - D_K D_G singular)")
    Mi = np.linalg.inv(M)
    # u = r + sign*yK ; yK = CK xK + DK y ; y = CG xG + DG u
    # u = Mi (r + sign (CK xK + DK CG xG))
    Fu_xG = sign * Mi @ K.D @ G.C
    Fu_xK = sign * Mi @ K.C
    A = np.block([
        [G.A + G.B @ Fu_xG, G.B @ Fu_xK],
        [K.B @ (G.C + G.D @ Fu_xG), K.A + K.B @ G.D @ Fu_xK],
    ])
    B = np.vstack([G.B @ Mi, K.B @ G.D @ Mi])
    C = np.hstack([G.C + G.D @ Fu_xG, G.D @ Fu_xK])
    D = G.D @ Mi
    return StateSpace(A.reshape(nG + K.nstates, -1), B, C, D, G.inputs, G.outputs)


# ---------------------------------------------------------------------------
# interconnection


def _prune(blocks: Sequence[StateSpace], outputs: Sequence[str],
           producer: dict[str, int], open_at: set[str]) -> list[int]:
    """Indices of blocks upstream of the requested outputs."""
    needed: set[int] = set()
    stack = [producer[o] for o in outputs if o in producer]
    while stack:
        k = stack.pop()
        if k in needed:
            continue
        needed.add(k)
        for name in blocks[k].inputs:
            if name in producer and name not in open_at:
                stack.append(producer[name])
    return sorted(needed)


def interconnect(blocks: Sequence[StateSpace], inputs: Sequence[str],
                 outputs: Sequence[str], open_at: Iterable[str] = (),
                 minimal: bool = True, tol: float = 1e-9) -> StateSpace:
    """Wire named blocks into a single system.

    A block input named ``s`` is driven by the block output named ``s``.  If
    no block produces ``s`` it must appear in ``inputs``.  Signals listed in
    ``open_at`` are cut: their consumers read the external input ``s``
    instead, while the output ``s`` still reports the produced value.  This
    is how loops are broken at analysis points.
    """
    inputs = list(inputs)
    outputs = list(outputs)
    open_at = set(open_at)
    if len(set(inputs)) != len(inputs):
        raise WiringError("duplicate external input names")

    producer: dict[str, int] = {}
    for k, b in enumerate(blocks):
        for name in b.outputs:
            if name in producer:
                raise WiringError(f"signal {name!r} is driven by two blocks")
            producer[name] = k
    for name in open_at:
        if name not in producer:
            raise WiringError(f"cannot open unknown signal {name!r}")
    for name in outputs:
        if name not in producer and name not in inputs:
            raise WiringError(f"requested output {name!r} is not produced")

    keep = _prune(blocks, outputs, producer, open_at)
    blocks = [blocks[k] for k in keep]
    producer = {}
    for k, b in enumerate(blocks):
        for name in b.outputs:
            producer[name] = k

    # global output/input indexing
    y_names = [n for b in blocks for n in b.outputs]
    y_index = {n: i for i, n in enumerate(y_names)}
    u_names = [n for b in blocks for n in b.inputs]
    e_index = {n: i for i, n in enumerate(inputs)}
    ny, nu, ne = len(y_names), len(u_names), len(inputs)

    Q = np.zeros((nu, ny))
    R = np.zeros((nu, ne))
    for j, name in enumerate(u_names):
        if name in producer and name not in open_at:
            Q[j, y_index[name]] = 1.0
        elif name in e_index:
            R[j, e_index[name]] = 1.0
        else:
            raise WiringError(f"dangling signal {name!r}: no producer and not an external input")

    big = append(*blocks) if blocks else StateSpace(np.zeros((0, 0)), np.zeros((0, 0)),
                                                   np.zeros((0, 0)), np.zeros((0, 0)), (), ())
    A, B, C, D = big.A, big.B, big.C, big.D
    M = np.eye(ny) - D @ Q
    if ny:
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= 1e-12 * max(1.0, sv[0]):
            raise WellPosednessError("algebraic loop is ill-posed (I - D*Q is singular)")
        Psi = np.linalg.inv(M)
    else:
        Psi = np.zeros((0, 0))
    # y = Psi (C x + D R e)
    Yx = Psi @ C
    Ye = Psi @ D @ R
    Acl = A + B @ Q @ Yx
    Bcl = B @ (Q @ Ye + R)

    Sy = np.zeros((len(outputs), ny))
    Se = np.zeros((len(outputs), ne))
    for i, name in enumerate(outputs):
        if name in producer:
            Sy[i, y_index[name]] = 1.0
        else:
            Se[i, e_index[name]] = 1.0
    Ccl = Sy @ Yx
    Dcl = Sy @ Ye + Se
    sys = StateSpace(Acl, Bcl, Ccl, Dcl, inputs, outputs)
    return minreal(sys, tol) if minimal else sys


# ---------------------------------------------------------------------------
# minimal realization


def _reachable_basis(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    n = A.shape[0]
    if n == 0 or B.size == 0:
        return np.zeros((n, 0))
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1e-300)
    V = np.zeros((n, 0))
    Z = B
    while V.shape[1] < n and Z.shape[1]:
        for _ in range(2):
            Z = Z - V @ (V.T @ Z)
        U, s, _ = np.linalg.svd(Z, full_matrices=False)
        r = int(np.sum(s > tol * scale))
        if r == 0:
            break
        r = min(r, n - V.shape[1])
        Vn = U[:, :r]
        V = np.hstack([V, Vn])
        Z = A @ Vn
    return V


def minreal(sys: StateSpace, tol: float = 1e-9) -> StateSpace:
    """Remove uncontrollable and unobservable states.

    Orthogonal Krylov (staircase) projection on a diagonally balanced copy;
    the retained subspaces are invariant so the projection is exact.
    """
    n = sys.nstates
    if n == 0:
        return sys
    A, B, C = sys.A, sys.B, sys.C
    _, (scale, perm) = sla.matrix_balance(A, permute=False, separate=True)
    A = A * (1.0 / scale)[:, None] * scale[None, :]
    B = B / scale[:, None]
    C = C * scale[None, :]

    V = _reachable_basis(A, B, tol)
    A, B, C = V.T @ A @ V, V.T @ B, C @ V
    W = _reachable_basis(A.T, C.T, tol)
    A, B, C = W.T @ A @ W, W.T @ B, C @ W
    return StateSpace(A, B, C, sys.D, sys.inputs, sys.outputs)


# ---------------------------------------------------------------------------
# frequency domain


@dataclass
class FreqResponse:
    frequencies: np.ndarray
    values: np.ndarray  # (n_w, p, m) complex

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        if w.size == 0 or np.any(np.diff(w) <= 0):
            raise LinsysError("frequency grid must be nonempty and strictly increasing")
        self.frequencies = w

    @property
    def siso(self) -> np.ndarray:
        return self.values[:, 0, 0]

    def sigma_max(self) -> np.ndarray:
        v = self.values
        if v.shape[1] == 1 or v.shape[2] == 1:
            return np.sqrt(np.sum(np.abs(v) ** 2, axis=(1, 2)))
        return np.linalg.svd(v, compute_uv=False)[:, 0]


def _evaluate(sys: StateSpace, w: np.ndarray) -> np.ndarray:
    n, p, m = sys.nstates, sys.noutputs, sys.ninputs
    out = np.empty((len(w), p, m), dtype=complex)
    out[:] = sys.D
    if n == 0:
        return out
    # Hessenberg form keeps the batched solves well conditioned
    H, Q = sla.hessenberg(sys.A, calc_q=True)
    Bh = Q.T @ sys.B
    Ch = sys.C @ Q
    I = np.eye(n)
    chunk = max(1, 2_000_000 // (n * n + 1))
    for k in range(0, len(w), chunk):
        ww = w[k:k + chunk]
        M = 1j * ww[:, None, None] * I - H
        X = np.linalg.solve(M, np.broadcast_to(Bh, (len(ww), n, m)))
        out[k:k + chunk] += Ch @ X
    return out


def freq_response(sys: StateSpace, grid) -> FreqResponse:
    """``C (jwI - A)^-1 B + D`` on a sorted positive grid (rad/s)."""
    w = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise LinsysError("grid must be positive and strictly increasing")
    poles = sys.poles()
    on_axis = poles[np.abs(poles.real) <= 1e-12 * np.maximum(1.0, np.abs(poles))]
    for p in on_axis:
        hit = np.abs(w - abs(p.imag)) <= 1e-12 * max(1.0, abs(p.imag))
        if np.any(hit):
            raise EvaluationError(f"frequency {w[hit][0]:g} rad/s coincides with pole {p:g}")
    return FreqResponse(w, _evaluate(sys, w))


def _sigma_at(sys: StateSpace, w) -> np.ndarray:
    v = _evaluate(sys, np.atleast_1d(np.asarray(w, dtype=float)))
    if v.shape[1] == 1 or v.shape[2] == 1:
        return np.sqrt(np.sum(np.abs(v) ** 2, axis=(1, 2)))
    return np.linalg.svd(v, compute_uv=False)[:, 0]


def hinf_norm(sys: StateSpace, rel_tol: float = 1e-4, max_iter: int = 60) -> float:
    """Peak singular value over frequency.

    Two-step Hamiltonian iteration (Bruinsma & Steinbuch): each pass tests a
    level slightly above the current lower bound; imaginary-axis eigenvalues
    of the Hamiltonian mark the frequency intervals where the gain exceeds
    it, and their midpoints give the next lower bound.  The returned value
    is attained at some frequency and lies within ``rel_tol`` (relative)
    below the true peak.
    """
    if sys.nstates and not sys.is_stable():
        raise UnstableSystemError("H-infinity norm undefined for an unstable system")
    D = sys.D
    dnorm = np.linalg.norm(D, 2) if D.size else 0.0
    if sys.nstates == 0:
        return float(dnorm)
    A, B, C = sys.A, sys.B, sys.C
    n = A.shape[0]
    poles = sys.poles()
    cand = [0.0]
    mags = np.abs(poles)
    cand += list(mags[mags > 0])
    cand += list(np.abs(poles.imag[poles.imag > 0]))
    cand = np.unique(np.asarray(cand))
    sig = _sigma_at(sys, cand)
    lb = max(dnorm, float(np.max(sig)))
    if lb == 0.0:
        return 0.0
    for _ in range(max_iter):
        g = lb * (1.0 + 2.0 * rel_tol)
        R = D.T @ D - g * g * np.eye(D.shape[1])
        S = D @ D.T - g * g * np.eye(D.shape[0])
        Ri = np.linalg.inv(R)
        Si = np.linalg.inv(S)
        Ah = A - B @ Ri @ D.T @ C
        H = np.block([[Ah, -g * B @ Ri @ B.T],
                      [g * C.T @ Si @ C, -Ah.T]])
        ev = np.linalg.eigvals(H)
        scale = max(1.0, np.linalg.norm(H, 1))
        imag = ev[np.abs(ev.real) <= 1e-7 * np.maximum(np.abs(ev), 1e-3 * scale)]
        wi = np.unique(np.round(np.abs(imag.imag), 12))
        if wi.size == 0:
            return float(lb)
        if wi.size == 1:
            mids = wi
        else:
            mids = np.concatenate([(wi[1:] + wi[:-1]) / 2.0, wi])
        new = float(np.max(_sigma_at(sys, mids)))
        if new <= lb * (1.0 + 1e-14):
            # no progress: eigenvalues flagged imaginary are numerical noise
            return float(lb)
        lb = new
    return float(lb)


# ---------------------------------------------------------------------------
# time domain


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float
    rise_time: float
    settle_time: float
    final_value: float


def step_response(sys: StateSpace, horizon: float, dt: float | None = None):
    """Exact (zero-order-hold) unit-step response of the first channel.

    Returns ``(t, y)``.  Default step follows the fixed-step rule
    ``dt = min(tau_fastest / 20, horizon / 1e4)``.
    """
    sys = sys.select([sys.inputs[0]], [sys.outputs[0]])
    n = sys.nstates
    if dt is None:
        poles = sys.poles()
        fastest = np.max(np.abs(poles)) if n else 1.0
        dt = min(1.0 / fastest / 20.0, horizon / 1e4)
    nt = int(np.floor(horizon / dt + 1e-9)) + 1
    t = np.arange(nt) * dt
    if n == 0:
        return t, np.full(nt, sys.D[0, 0])
    lam, V = np.linalg.eig(sys.A)
    if np.linalg.cond(V) < 1e8 and np.all(np.abs(lam) > 0):
        Vi_b = np.linalg.solve(V, sys.B[:, 0])
        cv = sys.C[0] @ V
        # x(t) = V diag((e^{lam t} - 1)/lam) V^-1 B
        coef = cv * Vi_b / lam
        E = np.expm1(np.outer(t, lam))
        y = (E @ coef).real + sys.D[0, 0]
        return t, y
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = sys.A * dt
    M[:n, n] = sys.B[:, 0] * dt
    Phi = sla.expm(M)
    Ad, Bd = Phi[:n, :n], Phi[:n, n]
    x = np.zeros(n)
    y = np.empty(nt)
    for k in range(nt):
        y[k] = sys.C[0] @ x + sys.D[0, 0]
        x = Ad @ x + Bd
    return t, y


def step_metrics(sys: StateSpace, horizon: float | None = None) -> StepMetrics:
    """Overshoot, 10-90% rise time and 2% settling time of a stable SISO system."""
    if sys.nstates and not sys.is_stable():
        raise UnstableSystemError("step metrics need a stable system")
    dc = float(sys.select([sys.inputs[0]], [sys.outputs[0]]).dcgain()[0, 0])
    scale = max(1.0, float(np.abs(sys.D).max(initial=0.0)))
    if abs(dc) < 1e-12 * scale:
        raise MetricsError("zero DC gain: step metrics undefined")
    if horizon is None:
        slow = np.min(np.abs(sys.poles().real)) if sys.nstates else 1.0
        horizon = 12.0 / slow
    t, y = step_response(sys, horizon)
    yn = y / dc
    overshoot = max(0.0, float(yn.max() - 1.0))
    rise = np.nan
    i10 = np.argmax(yn >= 0.1)
    i90 = np.argmax(yn >= 0.9)
    if yn[i10] >= 0.1 and yn[i90] >= 0.9:
        rise = float(t[i90] - t[i10])
    outside = np.nonzero(np.abs(yn - 1.0) > 0.02)[0]
    if outside.size == 0:
        settle = 0.0
    elif outside[-1] + 1 < len(t):
        settle = float(t[outside[-1] + 1])
    else:
        settle = np.nan
    return StepMetrics(overshoot, rise, settle, dc)


# ---------------------------------------------------------------------------
# pole structure


@dataclass(frozen=True)
class PoleClassification:
    dominant: complex  # upper half-plane member of the dominant pair
    omega_n: float
    zeta: float
    real_poles: np.ndarray  # ascending magnitude
    complex_poles: np.ndarray  # upper half-plane members


def classify_poles(sys: StateSpace, imag_tol: float = 1e-9) -> PoleClassification:
    """Dominant complex pair (smallest |Re|) plus the real poles."""
    p = sys.poles()
    scale = np.maximum(1.0, np.abs(p))
    is_cplx = np.abs(p.imag) > imag_tol * scale
    upper = p[is_cplx & (p.imag > 0)]
    real = np.sort(np.abs(p[~is_cplx].real)) * -1.0
    real = real[np.argsort(np.abs(real))]
    if upper.size == 0:
        raise ClassificationError(f"no complex pole pair among {np.round(p, 6)}")
    upper = upper[np.argsort(np.abs(upper.real))]
    dom = complex(upper[0])
    wn = abs(dom)
    return PoleClassification(dom, float(wn), float(-dom.real / wn), real, upper)
