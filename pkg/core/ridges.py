"""
Ridge extraction and component recovery.

Per t plane: keep the points whose modulus exceeds the threshold, split them
into clusters by single linkage under d((η, λ), (η′, λ′)) = |η - η′| + ρ|λ - λ′|
with cutoff Δ, and take the maximum of |Q| in each cluster. Across t the
cluster maxima are associated with component slots by a greedy tracker that
extrapolates every slot linearly from its last two ridge points. The recovered
component is the transform value read at its ridge.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

import config
from core.errors import GridError, InvalidArgumentError, SeparationError
from core.models import (
    RecoveredComponent, RidgePeak, RidgeSet, SeparationParams, ThresholdSet, TransformCube,
)

logger = logging.getLogger(__name__)


def resolve_threshold(plane: np.ndarray, params: SeparationParams) -> float:
    """ε̃₁ for one plane: absolute, or a fraction of the plane's largest modulus."""
    if params.threshold_mode == "absolute":
        return float(params.threshold)
    return float(params.threshold * np.max(np.abs(plane))) if plane.size else 0.0


def threshold_set(
    plane: np.ndarray,
    eta_axis: np.ndarray,
    lambda_axis: np.ndarray,
    params: SeparationParams,
) -> ThresholdSet:
    """
    Grid points of an (η, λ) plane with modulus strictly above the threshold.

    Points come out in row-major (η index, λ index) order. An empty set is
    returned, not raised.
    """
    plane = np.asarray(plane)
    if plane.shape != (len(eta_axis), len(lambda_axis)):
        raise GridError(f"plane shape {plane.shape} does not match axes ({len(eta_axis)}, {len(lambda_axis)})")
    if not np.all(np.isfinite(plane)):
        raise InvalidArgumentError("plane contains non-finite values")

    magnitude = np.abs(plane)
    level = resolve_threshold(plane, params)
    indices = np.argwhere(magnitude > level)
    coords = np.column_stack([np.asarray(eta_axis)[indices[:, 0]], np.asarray(lambda_axis)[indices[:, 1]]])
    return ThresholdSet(
        indices=indices.reshape(-1, 2),
        coords=coords.reshape(-1, 2),
        magnitudes=magnitude[indices[:, 0], indices[:, 1]],
        threshold=level,
    )


def _subset(points: ThresholdSet, members: np.ndarray) -> ThresholdSet:
    return ThresholdSet(
        indices=points.indices[members],
        coords=points.coords[members],
        magnitudes=points.magnitudes[members],
        threshold=points.threshold,
    )


def cluster(points: ThresholdSet, params: SeparationParams) -> List[ThresholdSet]:
    """
    Single-linkage clusters of a threshold set.

    Two points are linked when d < Δ, so distinct clusters are at least Δ
    apart. Clusters are ordered by their first member in the input order.
    """
    n = len(points)
    if n == 0:
        return []
    if n == 1:
        return [points]

    scaled = np.column_stack([points.coords[:, 0], params.rho * points.coords[:, 1]])
    pairs = cKDTree(scaled).query_pairs(r=np.nextafter(params.delta, 0.0), p=1, output_type="ndarray")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_clusters, labels = connected_components(graph, directed=False)

    first_member = np.full(n_clusters, n)
    np.minimum.at(first_member, labels, np.arange(n))
    order = np.argsort(first_member, kind="stable")
    return [_subset(points, np.flatnonzero(labels == label)) for label in order]


def argmax_per_cluster(
    plane: np.ndarray,
    clusters: Sequence[ThresholdSet],
) -> List[RidgePeak]:
    """
    The grid point of largest |Q| in each cluster.

    Ties go to the smallest η index, then the smallest λ index.
    """
    peaks = []
    for members in clusters:
        if members.is_empty:
            raise InvalidArgumentError("clusters must be non-empty")
        order = np.lexsort((members.indices[:, 1], members.indices[:, 0], -members.magnitudes))
        best = order[0]
        i, j = (int(v) for v in members.indices[best])
        peaks.append(RidgePeak(
            eta_index=i, lambda_index=j,
            eta=float(members.coords[best, 0]), lam=float(members.coords[best, 1]),
            value=complex(plane[i, j]),
        ))
    return peaks


def extract_peaks(
    plane: np.ndarray,
    eta_axis: np.ndarray,
    lambda_axis: np.ndarray,
    params: SeparationParams,
) -> List[RidgePeak]:
    """Threshold, cluster and take the per-cluster maxima of one plane."""
    points = threshold_set(plane, eta_axis, lambda_axis, params)
    clusters = cluster(points, params)
    logger.debug("%d points above %.3g in %d clusters", len(points), points.threshold, len(clusters))
    return argmax_per_cluster(plane, clusters)


def _strongest(peaks: List[RidgePeak], keep: int) -> List[RidgePeak]:
    ranked = sorted(peaks, key=lambda p: (-p.magnitude, p.eta_index, p.lambda_index))
    return ranked[:keep]


def _predict(history: List[Tuple[float, float, float]], t: float) -> Optional[Tuple[float, float]]:
    if not history:
        return None
    t2, eta2, lam2 = history[-1]
    if len(history) == 1:
        return eta2, lam2
    t1, eta1, lam1 = history[-2]
    scale = (t - t2) / (t2 - t1)
    return eta2 + (eta2 - eta1) * scale, lam2 + (lam2 - lam1) * scale


def track(
    peaks_per_t: Sequence[Sequence[RidgePeak]],
    t_axis: Sequence[float],
    params: SeparationParams,
) -> RidgeSet:
    """
    Associate per-t cluster maxima with component slots.

    Slots are matched greedily: the globally closest (slot, peak) pair under d,
    measured from each slot's linear extrapolation, is taken first. A slot
    with one previous point predicts that point; a slot with none only takes
    peaks left over after every other slot matched, in (λ̂, η̂) order. With a
    trend, slot 0 takes the maximum nearest (0, 0). A frame with more maxima
    than slots keeps the strongest and is flagged.

    Returns:
        RidgeSet with one row per slot; unmatched slots are gaps
    """
    t_axis = np.asarray(t_axis, dtype=float)
    if len(peaks_per_t) != t_axis.size:
        raise InvalidArgumentError(f"{len(peaks_per_t)} peak lists for {t_axis.size} times")

    n_slots, n_t = params.n_slots, t_axis.size
    eta_hat = np.full((n_slots, n_t), np.nan)
    lambda_hat = np.full((n_slots, n_t), np.nan)
    eta_index = np.full((n_slots, n_t), -1, dtype=np.int64)
    lambda_index = np.full((n_slots, n_t), -1, dtype=np.int64)
    q_value = np.full((n_slots, n_t), np.nan + 0j, dtype=complex)
    gap = np.ones((n_slots, n_t), dtype=bool)
    empty = np.zeros(n_t, dtype=bool)
    excess = np.zeros(n_t, dtype=bool)
    history: List[List[Tuple[float, float, float]]] = [[] for _ in range(n_slots)]

    def assign(slot: int, j: int, peak: RidgePeak) -> None:
        eta_hat[slot, j], lambda_hat[slot, j] = peak.eta, peak.lam
        eta_index[slot, j], lambda_index[slot, j] = peak.eta_index, peak.lambda_index
        q_value[slot, j] = peak.value
        gap[slot, j] = False
        history[slot] = (history[slot] + [(float(t_axis[j]), peak.eta, peak.lam)])[-2:]

    for j, t in enumerate(t_axis):
        peaks = list(peaks_per_t[j])
        if not peaks:
            empty[j] = True
            continue
        if len(peaks) > n_slots:
            excess[j] = True
            peaks = _strongest(peaks, n_slots)

        slots = list(range(n_slots))
        if params.trend:
            nearest = min(range(len(peaks)), key=lambda p: abs(peaks[p].eta) + params.rho * abs(peaks[p].lam))
            assign(0, j, peaks.pop(nearest))
            slots = slots[1:]

        predictions = [_predict(history[s], float(t)) for s in slots]
        dist = np.full((len(slots), len(peaks)), np.inf)
        for a, pred in enumerate(predictions):
            if pred is None:
                continue
            for b, peak in enumerate(peaks):
                dist[a, b] = abs(peak.eta - pred[0]) + params.rho * abs(peak.lam - pred[1])

        free_slots, free_peaks = set(range(len(slots))), set(range(len(peaks)))
        while dist.size and np.isfinite(dist).any():
            a, b = np.unravel_index(np.argmin(dist), dist.shape)
            assign(slots[a], j, peaks[b])
            dist[a, :] = np.inf
            dist[:, b] = np.inf
            free_slots.discard(a)
            free_peaks.discard(b)

        leftovers = sorted(free_peaks, key=lambda b: (peaks[b].lam, peaks[b].eta))
        for a, b in zip(sorted(free_slots), leftovers):
            assign(slots[a], j, peaks[b])

    if empty.any():
        logger.warning("%d of %d slices had an empty threshold set", int(empty.sum()), n_t)
    if excess.any():
        logger.warning("%d slices had more maxima than the %d expected components", int(excess.sum()), n_slots)
    n_gaps = int(gap[:, ~empty].sum())
    if n_gaps:
        logger.warning("%d ridge gaps in non-empty slices", n_gaps)

    arrays = [eta_hat, lambda_hat, eta_index, lambda_index, q_value, gap, empty, excess]
    for arr in arrays:
        arr.setflags(write=False)
    return RidgeSet(
        t_axis=t_axis, eta_hat=eta_hat, lambda_hat=lambda_hat, eta_index=eta_index,
        lambda_index=lambda_index, q_value=q_value, gap=gap, empty_slices=empty,
        excess_slices=excess, labels=tuple(range(n_slots)),
    )


def extract_ridges(
    cube: TransformCube,
    params: SeparationParams,
    max_workers: Optional[int] = None,
) -> RidgeSet:
    """
    Cluster maxima of every plane of a cube, tracked into a RidgeSet.

    Raises:
        SeparationError: if every threshold set is empty
    """
    grid = cube.grid

    def plane_peaks(i: int) -> List[RidgePeak]:
        return extract_peaks(cube.values[i], grid.eta_axis, grid.lambda_axis, params)

    workers = max(1, max_workers or config.MAX_WORKERS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        peaks_per_t = list(pool.map(plane_peaks, range(grid.t_axis.size)))

    if not any(peaks_per_t):
        raise SeparationError("every threshold set is empty; the signal has no detectable component")
    ridge = track(peaks_per_t, grid.t_axis, params)
    logger.info("tracked %d ridges over %d times", ridge.n_components, grid.t_axis.size)
    return ridge


def retrieve(cube: TransformCube, ridge: RidgeSet) -> List[RecoveredComponent]:
    """
    x_k(t) ≈ Q_x(t, η̂_k(t), λ̂_k(t)) for every slot.

    Gap samples are NaN and flagged missing; the amplitude estimate is the
    modulus of the same value.
    """
    grid = cube.grid
    if ridge.t_axis.shape != grid.t_axis.shape or not np.allclose(ridge.t_axis, grid.t_axis, rtol=0, atol=1e-12):
        raise GridError("ridge and cube t axes differ")
    present = ~ridge.gap
    if np.any(ridge.eta_index[present] >= grid.eta_axis.size) or np.any(ridge.eta_index[present] < 0) or \
            np.any(ridge.lambda_index[present] >= grid.lambda_axis.size) or np.any(ridge.lambda_index[present] < 0):
        raise GridError("ridge indices fall outside the cube grid")

    recovered = []
    t_idx = np.arange(grid.t_axis.size)
    for k in range(ridge.n_components):
        ok = present[k]
        samples = np.full(grid.t_axis.size, np.nan + 0j, dtype=complex)
        samples[ok] = cube.values[t_idx[ok], ridge.eta_index[k, ok], ridge.lambda_index[k, ok]]
        amplitude = np.abs(samples)
        samples.setflags(write=False)
        amplitude.setflags(write=False)
        recovered.append(RecoveredComponent(
            component_index=k, t_axis=grid.t_axis, samples=samples,
            amplitude_estimate=amplitude, missing=~ok,
        ))
    return recovered
