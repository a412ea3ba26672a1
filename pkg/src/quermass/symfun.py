"""Elementary symmetric functions and Newton tensors of symmetric matrices.

All matrix routines accept a single ``(n, n)`` array or a stack ``(..., n, n)``
and broadcast over the leading axes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# Power-sum recursion is used up to this size; beyond it the spectrum is computed.
_TRACE_RECURSION_MAX_N = 12


def _check_k(k: int, n: int) -> None:
    if not 0 <= k <= n:
        raise ValueError(f"order k={k} outside [0, {n}]")


def sigma_from_eigenvalues(lam, k: int):
    """k-th elementary symmetric polynomial of the last axis of ``lam``.

    Uses the one-eigenvalue-at-a-time recurrence e_j <- e_j + lam_i e_{j-1}.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    _check_k(k, n)
    e = [np.ones(lam.shape[:-1])] + [np.zeros(lam.shape[:-1]) for _ in range(k)]
    for i in range(n):
        li = lam[..., i]
        for j in range(min(i + 1, k), 0, -1):
            e[j] = e[j] + li * e[j - 1]
    out = e[k]
    return float(out) if out.ndim == 0 else out


def sigmas_from_eigenvalues(lam, kmax: int | None = None) -> np.ndarray:
    """All of sigma_0..sigma_kmax stacked on a new leading axis."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    kmax = n if kmax is None else kmax
    e = np.zeros((kmax + 1,) + lam.shape[:-1])
    e[0] = 1.0
    for i in range(n):
        for j in range(min(i + 1, kmax), 0, -1):
            e[j] = e[j] + lam[..., i] * e[j - 1]
    return e


def _as_stack(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def sigmas_matrix(a, kmax: int | None = None) -> np.ndarray:
    """sigma_0..sigma_kmax of each matrix in the stack, shape ``(kmax+1, ...)``.

    For n <= 12 the Newton power-sum identities
    k sigma_k = sum_i (-1)^(i-1) sigma_{k-i} tr(A^i) are used; larger
    matrices go through ``eigvalsh``.  Diagonal input skips both and uses the
    eigenvalue recurrence on the diagonal.
    """
    a = _as_stack(a)
    n = a.shape[-1]
    kmax = n if kmax is None else kmax
    _check_k(kmax, n)
    diag = np.diagonal(a, axis1=-2, axis2=-1)
    if not np.any(a - diag[..., None] * np.eye(n)):
        return sigmas_from_eigenvalues(diag, kmax)
    if n > _TRACE_RECURSION_MAX_N:
        return sigmas_from_eigenvalues(np.linalg.eigvalsh(a), kmax)
    batch = a.shape[:-2]
    p = np.zeros((kmax + 1,) + batch)
    power = np.broadcast_to(np.eye(n), a.shape)
    for i in range(1, kmax + 1):
        power = power @ a
        p[i] = np.trace(power, axis1=-2, axis2=-1)
    s = np.zeros((kmax + 1,) + batch)
    s[0] = 1.0
    for k in range(1, kmax + 1):
        acc = np.zeros(batch)
        for i in range(1, k + 1):
            acc = acc + (-1) ** (i - 1) * s[k - i] * p[i]
        s[k] = acc / k
    return s


def sigma_matrix(a, k: int):
    """sigma_k of the eigenvalues of a symmetric matrix (or a stack of them)."""
    a = _as_stack(a)
    _check_k(k, a.shape[-1])
    out = sigmas_matrix(a, k)[k]
    return float(out) if out.ndim == 0 else out


def newton_tensors(a, kmax: int) -> list[np.ndarray]:
    """[T_0](A), ..., [T_kmax](A) from T_{m+1} = sigma_{m+1} Id - A T_m."""
    a = _as_stack(a)
    n = a.shape[-1]
    _check_k(kmax, n)
    s = sigmas_matrix(a, kmax)
    eye = np.eye(n)
    t = [np.broadcast_to(eye, a.shape).copy()]
    for m in range(kmax):
        nxt = s[m + 1][..., None, None] * eye - a @ t[m]
        t.append(0.5 * (nxt + np.swapaxes(nxt, -1, -2)))
    return t


def newton_tensor(a, k: int) -> np.ndarray:
    return newton_tensors(a, k)[k]


def generalized_kronecker(upper: tuple[int, ...], lower: tuple[int, ...]) -> int:
    """delta^{j_1..j_k}_{i_1..i_k} = det[delta^{j_a}_{i_b}]."""
    k = len(upper)
    if len(set(upper)) < k or sorted(upper) != sorted(lower):
        return 0
    perm = [upper.index(i) for i in lower]
    # parity via cycle count
    seen, cycles = [False] * k, 0
    for s in range(k):
        if not seen[s]:
            cycles += 1
            while not seen[s]:
                seen[s] = True
                s = perm[s]
    return 1 if (k - cycles) % 2 == 0 else -1


def polarized_sigma(mats, k: int | None = None) -> float:
    """Sigma_k(A_1, ..., A_k) by direct generalized-Kronecker expansion.

    Factorial cost; intended as a check on small matrices (k <= 4, n <= 8).
    """
    mats = [_as_stack(m) for m in mats]
    k = len(mats) if k is None else k
    if len(mats) != k:
        raise ValueError(f"need exactly k={k} matrices, got {len(mats)}")
    if k < 1 or k > 4:
        raise ValueError("polarized_sigma supports 1 <= k <= 4")
    n = mats[0].shape[-1]
    if any(m.shape != (n, n) for m in mats):
        raise ValueError("all matrices must share one (n, n) shape")
    if n > 8:
        raise ValueError("polarized_sigma supports n <= 8")
    total = 0.0
    for lower in itertools.permutations(range(n), k):
        for upper in itertools.permutations(lower):
            sgn = generalized_kronecker(upper, lower)
            prod = 1.0
            for r in range(k):
                prod *= mats[r][lower[r], upper[r]]
            total += sgn * prod
    return total / math.factorial(k - 1)
