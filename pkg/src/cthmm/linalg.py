"""Dense kernels for generator (rate) matrices.

Everything here operates on plain numpy arrays. Matrices may be stacked
along leading axes; all kernels broadcast over the stack, which is what
keeps the EM E-step fast on cohorts with hundreds of distinct visit
intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Pade-13 numerator coefficients (Higham 2005) and the matching 1-norm
# threshold for double precision.
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152

# Endpoint pairs with transition probability below this are unreachable.
UNREACHABLE_PROB = 1e-300


def _pade13(A: np.ndarray) -> np.ndarray:
    n = A.shape[-1]
    ident = np.broadcast_to(np.eye(n), A.shape)
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6
        + b[5] * A4
        + b[3] * A2
        + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6
        + b[4] * A4
        + b[2] * A2
        + b[0] * ident
    )
    return np.linalg.solve(V - U, V + U)


def expm(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(A*t) by scaling-and-squaring with Pade-13.

    Parameters
    ----------
    A : (..., K, K) array
        One matrix or a stack of matrices.
    t : float
        Non-negative duration multiplying A.

    Returns
    -------
    (..., K, K) array with exp(A*t) for each stacked matrix.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("matrix exponential of non-finite input")
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"duration must be finite and >= 0, got {t}")
    A = A * t
    # One scaling exponent for the whole stack: extra squarings of the
    # small-norm members are benign and the batched squaring stays simple.
    norms = np.abs(A).sum(axis=-2).max(axis=-1)
    nmax = float(norms.max()) if norms.size else 0.0
    s = int(np.ceil(np.log2(nmax / _THETA13))) if nmax > _THETA13 else 0
    X = _pade13(A / 2.0**s)
    for _ in range(s):
        X = X @ X
    return X


def validate_generator(Q: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Check generator-matrix invariants, returning Q as a float array.

    Rows must sum to 0 within 1e-12, off-diagonals must be non-negative,
    and entries disallowed by ``mask`` must be exactly zero.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"generator must be square, got shape {Q.shape}")
    if not np.isfinite(Q).all():
        raise ValueError("generator has non-finite entries")
    K = Q.shape[0]
    off = Q.copy()
    off[np.arange(K), np.arange(K)] = 0.0
    if (off < 0).any():
        raise ValueError("generator has negative off-diagonal rates")
    rowsum = Q.sum(axis=1)
    if np.abs(rowsum).max(initial=0.0) > 1e-12:
        raise ValueError(f"generator rows must sum to 0, max |sum| = {np.abs(rowsum).max()}")
    if mask is not None and (off[~np.asarray(mask, dtype=bool)] != 0).any():
        raise ValueError("generator has nonzero rates on masked-out transitions")
    return Q


def transition_matrix(Q: np.ndarray, dt: float) -> np.ndarray:
    """exp(Q*dt) with round-off cleanup: clamp tiny negatives, renormalize rows.

    Downstream likelihood code must never see negative probabilities, so
    entries in [-1e-12, 0) are clamped to 0 and each row is rescaled to
    sum to 1.
    """
    P = expm(Q, dt)
    P = np.where(P < 0.0, 0.0, P)
    P /= P.sum(axis=-1, keepdims=True)
    return P


def vanloan_integrals(Q: np.ndarray, B: np.ndarray, dt: float) -> np.ndarray:
    """Integrals of exp(Q s) @ B @ exp(Q (dt-s)) over s in [0, dt].

    Computed as the top-right block of the exponential of the 2K x 2K
    block matrix [[Q, B], [0, Q]] * dt. ``B`` may be a stack; one batched
    exponential covers all blocks.
    """
    Q = np.asarray(Q, dtype=float)
    B = np.asarray(B, dtype=float)
    K = Q.shape[-1]
    stack = B.shape[:-2]
    G = np.zeros(stack + (2 * K, 2 * K))
    G[..., :K, :K] = Q
    G[..., :K, K:] = B
    G[..., K:, K:] = Q
    return expm(G, dt)[..., :K, K:]


@dataclass
class ConditionedMoments:
    """End-point-conditioned sufficient statistics over one interval.

    ``occupation[a, b, k]`` is E[time in state k | X(0)=a, X(dt)=b] and
    ``jumps[a, b, e]`` is E[#jumps along edge ``edges[e]`` | a, b]. Pairs
    with transition probability below ``UNREACHABLE_PROB`` carry zero
    moments and ``reachable[a, b] = False`` so accumulators can skip them.
    """

    dt: float
    occupation: np.ndarray
    jumps: np.ndarray
    edges: list[tuple[int, int]]
    reachable: np.ndarray
    transition: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.occupation.shape[0]


def conditioned_moments(
    Q: np.ndarray, dt: float, mask: np.ndarray | None = None
) -> ConditionedMoments:
    """Expected occupation times and jump counts conditioned on end points.

    One Van Loan block exponential per target index: K blocks for the
    occupation times, one per allowed off-diagonal edge for the jump
    counts, all batched into a single call.

    Parameters
    ----------
    Q : (K, K) array
        Generator matrix.
    dt : float
        Interval length, must be > 0.
    mask : (K, K) bool array, optional
        Allowed transitions. Defaults to every off-diagonal edge.
    """
    if dt <= 0:
        raise ValueError(f"interval length must be > 0, got {dt}")
    Q = validate_generator(Q, mask)
    K = Q.shape[0]
    if mask is None:
        mask = ~np.eye(K, dtype=bool)
    edges = [(i, j) for i in range(K) for j in range(K) if i != j and mask[i, j]]

    basis = np.zeros((K + len(edges), K, K))
    for k in range(K):
        basis[k, k, k] = 1.0
    for e, (i, j) in enumerate(edges):
        basis[K + e, i, j] = 1.0
    integrals = vanloan_integrals(Q, basis, dt)

    P = expm(Q, dt)
    reachable = P >= UNREACHABLE_PROB
    safe_P = np.where(reachable, P, 1.0)

    occupation = np.transpose(integrals[:K], (1, 2, 0)) / safe_P[:, :, None]
    occupation = np.where(reachable[:, :, None], occupation, 0.0)
    occupation = np.clip(occupation, 0.0, dt)

    rates = np.array([Q[i, j] for i, j in edges])
    jumps = np.transpose(integrals[K:], (1, 2, 0)) * rates / safe_P[:, :, None]
    jumps = np.where(reachable[:, :, None], jumps, 0.0)
    jumps = np.clip(jumps, 0.0, None)

    return ConditionedMoments(
        dt=dt,
        occupation=occupation,
        jumps=jumps,
        edges=edges,
        reachable=reachable,
        transition=P,
    )


def weighted_moment_integrals(
    Q: np.ndarray, dts: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Endpoint-weighted Van Loan integrals for a stack of intervals.

    For interval i with weight matrix W_i this returns

        M_i = integral over s of P(s)^T W_i P(dt_i - s)^T ds

    so that ``M_i[k, k]`` is the W_i-weighted expected occupation of state
    k and ``Q[k, l] * M_i[k, l]`` the weighted expected jump count along
    (k, l). With W_i the pairwise endpoint posterior divided by the
    transition probability, these are exactly the EM E-step accumulators,
    at one 2K x 2K exponential per interval.
    """
    Q = np.asarray(Q, dtype=float)
    dts = np.asarray(dts, dtype=float)
    weights = np.asarray(weights, dtype=float)
    K = Q.shape[-1]
    n = weights.shape[0]
    G = np.zeros((n, 2 * K, 2 * K))
    # Fold dt into the block matrix so one batched expm covers mixed dts.
    G[:, :K, :K] = Q.T * dts[:, None, None]
    G[:, :K, K:] = weights * dts[:, None, None]
    G[:, K:, K:] = Q.T * dts[:, None, None]
    return expm(G)[:, :K, K:]
