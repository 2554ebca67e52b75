"""Seeded Lloyd k-means shared by the angle model and the visual vocabulary.

Distances are squared Euclidean, accumulation is float64 and nearest-centroid
ties always resolve to the lowest centroid index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, InvalidArgumentError

_CHUNK_ROWS = 32768
REFINE_LIMIT = 2000
SWAP_LIMIT = 64


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: float
    history: tuple[float, ...]
    n_iter: int
    converged: bool


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D point array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("points must be finite")
    return x


def _exact_sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def nearest_centroid(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of, and squared distance to, the nearest centroid for every row of ``x``.

    The bulk of the work uses the ``|x|^2 - 2 x.c + |c|^2`` expansion. Rows
    whose best and runner-up candidates are within rounding of each other
    are recomputed from explicit differences, so exact ties go to the
    lowest index and returned distances are exact.
    """
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(centroids, dtype=np.float64)
    n, k = x.shape[0], c.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    if k == 1:
        diff = x - c[0]
        labels[:] = 0
        dists[:] = np.einsum("nd,nd->n", diff, diff)
        return labels, dists
    cc = np.einsum("kd,kd->k", c, c)
    cmax = float(cc.max())
    for start in range(0, n, _CHUNK_ROWS):
        xs = x[start:start + _CHUNK_ROWS]
        xx = np.einsum("nd,nd->n", xs, xs)
        d2 = xx[:, None] - 2.0 * (xs @ c.T) + cc[None, :]
        best = d2.min(axis=1)
        margin = 1e-9 * (xx + cmax) + 1e-300
        ambiguous = (d2 <= (best + margin)[:, None]).sum(axis=1) > 1
        lab = d2.argmin(axis=1)
        if np.any(ambiguous):
            rows = np.flatnonzero(ambiguous)
            exact = _exact_sqdist(xs[rows], c)
            lab[rows] = exact.argmin(axis=1)
        diff = xs - c[lab]
        labels[start:start + len(xs)] = lab
        dists[start:start + len(xs)] = np.einsum("nd,nd->n", diff, diff)
    return labels, dists


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding. Raises if fewer than ``k`` distinct points exist."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    d2 = np.einsum("nd,nd->n", x - centers[0], x - centers[0])
    for i in range(1, k):
        total = d2.sum()
        if not total > 0.0:
            raise DegenerateInputError(
                f"need at least {k} distinct points, found {i}"
            )
        idx = int(rng.choice(n, p=d2 / total))
        centers[i] = x[idx]
        diff = x - centers[i]
        np.minimum(d2, np.einsum("nd,nd->n", diff, diff), out=d2)
    return centers


def _reseed_empty(x, centroids, labels, dists, counts):
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return
    order = np.argsort(-dists, kind="stable")
    taken = 0
    for j in empty:
        centroids[j] = x[order[taken]]
        dists[order[taken]] = 0.0
        taken += 1


def hartigan_refine(x: np.ndarray, labels: np.ndarray, k: int, max_passes: int = 50) -> np.ndarray:
    """Single-point exchange passes: move a point whenever that lowers the objective.

    Moving ``x`` from cluster ``a`` (size ``n_a``) to ``b`` changes the
    objective by ``n_b/(n_b+1) |x-mu_b|^2 - n_a/(n_a-1) |x-mu_a|^2``. Every
    exchange-stable partition is also Lloyd-stable, but not vice versa.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    for _ in range(max_passes):
        moved = False
        for i in range(x.shape[0]):
            a = labels[i]
            if counts[a] <= 1:
                continue
            mu = sums / np.maximum(counts, 1.0)[:, None]
            diff = x[i] - mu
            d2 = np.einsum("kd,kd->k", diff, diff)
            remove = counts[a] / (counts[a] - 1.0) * d2[a]
            add = counts / (counts + 1.0) * d2
            add[a] = np.inf
            add[counts == 0] = 0.0
            b = int(np.argmin(add))
            if add[b] < remove * (1.0 - 1e-12):
                labels[i] = b
                counts[a] -= 1.0
                counts[b] += 1.0
                sums[a] -= x[i]
                sums[b] += x[i]
                moved = True
        if not moved:
            break
    return labels


def lloyd(x: np.ndarray, init: np.ndarray, max_iter: int = 100, tol: float = 1e-7,
          refine: bool = False) -> KMeansResult:
    centroids = np.array(init, dtype=np.float64, copy=True)
    k = centroids.shape[0]
    labels, dists = nearest_centroid(x, centroids)
    history = [float(dists.sum())]
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        _reseed_empty(x, centroids, labels, dists, counts)

        new_labels, dists = nearest_centroid(x, centroids)
        objective = float(dists.sum())
        prev = history[-1]
        history.append(objective)
        unchanged = np.array_equal(new_labels, labels)
        labels = new_labels
        if unchanged or objective == 0.0 or (prev - objective) <= tol * prev:
            converged = True
            break
    if refine:
        labels = hartigan_refine(x, labels, k)
    # Centroids must be the means of their final clusters.
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, x)
    nonempty = counts > 0
    final = centroids.copy()
    final[nonempty] = sums[nonempty] / counts[nonempty, None]
    diff = x - final[labels]
    objective = float(np.einsum("nd,nd->n", diff, diff).sum())
    if objective <= history[-1]:
        centroids = final
        if objective < history[-1]:
            history.append(objective)
    return KMeansResult(
        centroids=centroids,
        labels=labels,
        objective=history[-1],
        history=tuple(history),
        n_iter=n_iter,
        converged=converged,
    )


def swap_search(x: np.ndarray, start: KMeansResult, max_iter: int = 100, tol: float = 1e-7,
                max_rounds: int = 100) -> KMeansResult:
    """Center-swap local search around a converged solution.

    Each round tries replacing one centroid by one distinct data point,
    reruns Lloyd with exchange refinement, and keeps the first strictly
    better result. It stops when no swap helps. Costs ``k * n`` Lloyd runs
    per round, so it is only meant for small inputs, where a solution can
    be stable under single-point moves and still not be optimal.
    """
    best = start
    candidates = np.unique(x, axis=0)
    k = best.centroids.shape[0]
    for _ in range(max_rounds):
        improved = False
        for j in range(k):
            for p in candidates:
                init = best.centroids.copy()
                init[j] = p
                if np.unique(init, axis=0).shape[0] < k:
                    continue
                run = lloyd(x, init, max_iter=max_iter, tol=tol, refine=True)
                if run.objective < best.objective * (1.0 - 1e-12):
                    best = run
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return best


def kmeans(
    x,
    k: int,
    *,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 100,
    tol: float = 1e-7,
    refine: bool | None = None,
    swap: bool | None = None,
) -> KMeansResult:
    """Best-of-``restarts`` k-means with k-means++ seeding.

    Parameters
    ----------
    x : array_like, shape (n, d)
        Points to cluster.
    k : int
        Number of clusters.
    seed : int
        Root seed; restart ``r`` uses the ``r``-th spawned child stream.
    restarts : int
        Independent runs; the lowest final objective wins, earliest on ties.
    max_iter, tol :
        Stop after ``max_iter`` Lloyd iterations or when the relative
        objective decrease drops below ``tol``.
    refine : bool, optional
        Follow each Lloyd run with :func:`hartigan_refine`. The default
        enables it for inputs of at most ``REFINE_LIMIT`` points, where
        seeding from data points alone can miss the optimum entirely.
    swap : bool, optional
        Finish with :func:`swap_search` on the best restart. Enabled by
        default for at most ``SWAP_LIMIT`` points.
    """
    x = _as_points(x)
    if x.shape[0] == 0:
        raise EmptyInputError("cannot cluster an empty point set")
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be positive, got {restarts!r}")
    k = int(k)
    if refine is None:
        refine = x.shape[0] <= REFINE_LIMIT
    best: KMeansResult | None = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        run = lloyd(x, kmeans_plusplus(x, k, rng), max_iter=max_iter, tol=tol, refine=refine)
        if best is None or run.objective < best.objective:
            best = run
    if swap is None:
        swap = x.shape[0] <= SWAP_LIMIT
    if swap and k > 1:
        best = swap_search(x, best, max_iter=max_iter, tol=tol)
    return best
