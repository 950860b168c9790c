"""k-means over measures with flow barycenters as centroids.

Every measure is represented by one flow profile per tree slice. The
distance to a centroid is the slice mean of the univariate 2-Wasserstein
distances; centroids are per-slice flow barycenters of their members.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from transitions import Machine, MachineError

from .barycenter import FlowBarycenter, flow_barycenter
from .errors import ConvergenceError, InputError
from .parallel import ordered_map
from .sampling import PointArray
from .seeding import STREAM_INIT, derive_rng
from .sliced import BaseDiscrepancy, SliceSpec, slice_profiles
from .tree import FlowProfile
from .univariate import LossKind, univariate_cost

logger = logging.getLogger(__name__)

Centroid = list[FlowBarycenter]  # one barycenter per slice


@dataclass
class ClusteringResult:
    """Outcome of a k-means run."""

    assignment: np.ndarray
    centroids: list[Centroid]
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


class FlowKMeans:
    """Lloyd iterations driven by a state machine.

    idle -> seeding -> assigning <-> updating, and assigning -> converged once
    the assignment stops changing or ``max_iter`` assignments were made.
    """

    states = [
        "idle",  # nothing computed yet
        "seeding",  # k-means++ centroid selection
        "assigning",  # measures move to their nearest centroid
        "updating",  # centroids are recomputed from their members
        "converged",  # result available
        "error",  # a step failed
    ]

    # Type hint for state attribute added by transitions
    state: str

    def __init__(
        self,
        profiles: Sequence[Sequence[FlowProfile]],
        k_clusters: int,
        k_supports: int = 100,
        max_iter: int = 20,
        seed: int = 0,
        barycenter_iter: int = 50,
        barycenter_tol: float = 1e-9,
        threads: int = 1,
    ) -> None:
        """Prepare a clustering of precomputed slice profiles.

        Args:
            profiles: profiles[i][s] is the flow profile of measure i in slice s
            k_clusters: number of clusters
            k_supports: maximum support count of every centroid barycenter
            max_iter: maximum number of assignment steps
            seed: root seed for k-means++ draws
            barycenter_iter: iteration cap of each barycenter update
            barycenter_tol: objective tolerance of each barycenter update
            threads: worker threads for distance rows
        """
        if k_clusters < 1:
            raise InputError(f"k_clusters must be >= 1, got {k_clusters}")
        if len(profiles) < k_clusters:
            raise InputError(
                f"Need at least {k_clusters} measures for {k_clusters} clusters, got {len(profiles)}"
            )
        n_slices = {len(p) for p in profiles}
        if len(n_slices) != 1 or 0 in n_slices:
            raise InputError("Every measure needs the same nonzero number of slice profiles")
        if threads < 1:
            raise InputError(f"threads must be >= 1, got {threads}")
        if k_supports < 1 or max_iter < 1:
            raise InputError("k_supports and max_iter must be >= 1")

        self.profiles = [list(p) for p in profiles]
        self.n_measures = len(profiles)
        self.n_slices = n_slices.pop()
        self.k_clusters = k_clusters
        self.k_supports = k_supports
        self.max_iter = max_iter
        self.seed = seed
        self.barycenter_iter = barycenter_iter
        self.barycenter_tol = barycenter_tol
        self.threads = threads

        self.centroids: list[Centroid] = []
        self.assignment: Optional[np.ndarray] = None
        self.distances: Optional[np.ndarray] = None
        self.inertia_history: list[float] = []
        self.iterations = 0

        self.machine = Machine(
            model=self, states=self.states, initial="idle", auto_transitions=False
        )
        self._add_transitions()

    def _add_transitions(self) -> None:
        """Define state transitions."""
        for trigger, source, dest in [
            ("start_seeding", "idle", "seeding"),
            ("seeding_done", "seeding", "assigning"),
            ("start_update", "assigning", "updating"),
            ("update_done", "updating", "assigning"),
            ("converge", "assigning", "converged"),
        ]:
            self.machine.add_transition(
                trigger=trigger,
                source=source,
                dest=dest,
                after=lambda t=trigger, s=source, d=dest: self._log_transition(t, s, d),
            )
        self.machine.add_transition(
            trigger="error_occurred",
            source=["idle", "seeding", "assigning", "updating"],
            dest="error",
            after=lambda: self._log_transition("error_occurred", "*", "error"),
        )
        self.machine.add_transition(
            trigger="recover",
            source="error",
            dest="idle",
            after=self._reset,
        )

    if TYPE_CHECKING:  # triggers are bound at runtime by transitions
        def start_seeding(self) -> bool:  # type: ignore[empty-body]
            """Enter seeding. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def seeding_done(self) -> bool:  # type: ignore[empty-body]
            """Seeding finished. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def start_update(self) -> bool:  # type: ignore[empty-body]
            """Enter centroid update. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def update_done(self) -> bool:  # type: ignore[empty-body]
            """Centroid update finished. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def converge(self) -> bool:  # type: ignore[empty-body]
            """Finish the run. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def error_occurred(self) -> bool:  # type: ignore[empty-body]
            """Transition to error state. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

        def recover(self) -> bool:  # type: ignore[empty-body]
            """Recover from error state. Added by transitions library."""
            ...  # This method is dynamically created by transitions library

    def _log_transition(self, trigger: str, source: str, dest: str) -> None:
        """Log state transitions for debugging."""
        logger.info(f"State transition: {source} -> {dest} (trigger: {trigger})")

    def _reset(self) -> None:
        self.centroids = []
        self.assignment = None
        self.distances = None
        self.inertia_history = []
        self.iterations = 0
        self._log_transition("recover", "error", "idle")

    def _fire(self, trigger: str) -> None:
        try:
            getattr(self, trigger)()
        except MachineError as e:
            raise ConvergenceError(f"Cannot {trigger} in state {self.state}: {e}") from e

    # Distances

    def _slice_distance(self, i: int, centroid: Centroid) -> float:
        total = [
            math.sqrt(univariate_cost(self.profiles[i][s], centroid[s].profile(), LossKind.SQUARED))
            for s in range(self.n_slices)
        ]
        return math.fsum(total) / self.n_slices

    def distance(self, i: int, c: int) -> float:
        """Slice-mean W2 distance between measure ``i`` and centroid ``c``."""
        return self._slice_distance(i, self.centroids[c])

    def _distances_to(self, centroid: Centroid) -> np.ndarray:
        return np.array(
            ordered_map(
                lambda i: self._slice_distance(i, centroid), range(self.n_measures), self.threads
            )
        )

    def _centroid_of(self, i: int) -> Centroid:
        return [FlowBarycenter.from_profile(p, self.k_supports) for p in self.profiles[i]]

    # Steps

    def seed_centroids(self) -> None:
        """k-means++: first centroid uniform, then proportional to squared distance."""
        self._fire("start_seeding")
        try:
            rng = derive_rng(self.seed, STREAM_INIT)
            chosen = [int(rng.integers(self.n_measures))]
            self.centroids = [self._centroid_of(chosen[0])]
            nearest = self._distances_to(self.centroids[0])
            while len(chosen) < self.k_clusters:
                weights = nearest**2
                weights[chosen] = 0.0
                if weights.sum() <= 0.0:
                    weights = np.ones(self.n_measures)
                    weights[chosen] = 0.0
                nxt = int(rng.choice(self.n_measures, p=weights / weights.sum()))
                chosen.append(nxt)
                self.centroids.append(self._centroid_of(nxt))
                nearest = np.minimum(nearest, self._distances_to(self.centroids[-1]))
            logger.info(f"Seeded {self.k_clusters} centroids from measures {chosen}")
        except Exception:
            self.error_occurred()
            raise
        self._fire("seeding_done")

    def assign_step(self) -> None:
        """Assign every measure to its nearest centroid (lowest index on ties)."""
        if self.state != "assigning":
            raise ConvergenceError(f"assign_step requires state assigning, not {self.state}")
        try:
            dist = np.array(
                ordered_map(
                    lambda i: [self.distance(i, c) for c in range(self.k_clusters)],
                    range(self.n_measures),
                    self.threads,
                )
            )
            new_assignment = np.argmin(dist, axis=1)
        except Exception:
            self.error_occurred()
            raise
        changed = self.assignment is None or bool(np.any(new_assignment != self.assignment))
        self.assignment = new_assignment
        self.distances = dist
        inertia = math.fsum(
            float(dist[i, new_assignment[i]]) ** 2 for i in range(self.n_measures)
        )
        self.inertia_history.append(inertia)
        self.iterations += 1
        logger.info(f"Iteration {self.iterations}: inertia {inertia:.6g}")
        if not changed or self.iterations >= self.max_iter:
            self._fire("converge")
        else:
            self._fire("start_update")

    def _member_cost(self, members: np.ndarray, centroid: Centroid) -> float:
        return math.fsum(self._slice_distance(int(i), centroid) ** 2 for i in members)

    def update_step(self) -> None:
        """Recompute centroids as per-slice barycenters of their members.

        A new centroid replaces the old one only when it does not raise the
        cluster's sum of squared distances. Empty clusters are reseeded from
        the measure farthest from its own centroid.
        """
        if self.state != "updating":
            raise ConvergenceError(f"update_step requires state updating, not {self.state}")
        assert self.assignment is not None and self.distances is not None
        try:
            own = self.distances[np.arange(self.n_measures), self.assignment]
            taken: set[int] = set()
            for c in range(self.k_clusters):
                members = np.flatnonzero(self.assignment == c)
                if members.shape[0] == 0:
                    order = np.argsort(-own, kind="stable")
                    far = next(int(i) for i in order if int(i) not in taken)
                    taken.add(far)
                    logger.info(f"Cluster {c} is empty, reseeding from measure {far}")
                    self.centroids[c] = self._centroid_of(far)
                    continue
                candidate = [
                    flow_barycenter(
                        [self.profiles[int(i)][s] for i in members],
                        k=self.k_supports,
                        max_iter=self.barycenter_iter,
                        tol=self.barycenter_tol,
                    )
                    for s in range(self.n_slices)
                ]
                if self._member_cost(members, candidate) <= self._member_cost(
                    members, self.centroids[c]
                ):
                    self.centroids[c] = candidate
        except Exception:
            self.error_occurred()
            raise
        self._fire("update_done")

    def run(self) -> ClusteringResult:
        """Seed, then alternate assignment and update until converged."""
        if self.state != "idle":
            raise ConvergenceError(f"run requires state idle, not {self.state}")
        self.seed_centroids()
        while self.state != "converged":
            self.assign_step()
            if self.state == "updating":
                self.update_step()
        assert self.assignment is not None
        return ClusteringResult(
            assignment=self.assignment.copy(),
            centroids=self.centroids,
            inertia=self.inertia_history[-1],
            iterations=self.iterations,
            inertia_history=list(self.inertia_history),
        )


def kmeans(
    measure_points: Sequence[PointArray],
    k_clusters: int,
    spec: Optional[SliceSpec] = None,
    k_supports: int = 100,
    max_iter: int = 20,
    seed: int = 0,
    weights: Optional[Sequence[Optional[Sequence[float]]]] = None,
    threads: int = 1,
) -> ClusteringResult:
    """k-means over point-set measures with tree-sliced FlowAlign.

    Args:
        measure_points: support points of every measure
        k_clusters: number of clusters
        spec: slicing parameters (aligned-root FlowAlign base); default SliceSpec()
        k_supports: maximum support count of centroid barycenters
        max_iter: maximum number of assignment steps
        seed: root seed for k-means++
        weights: optional per-measure support weights
        threads: worker threads for slice profiles and distance rows

    Raises:
        InputError: If there are fewer measures than clusters or the spec is not
            aligned-root FlowAlign
    """
    spec = spec or SliceSpec()
    if spec.base is not BaseDiscrepancy.FLOW or not spec.aligned or spec.joint:
        raise InputError("kmeans needs per-measure aligned-root FlowAlign slices")
    if len(measure_points) < k_clusters:
        raise InputError(
            f"Need at least {k_clusters} measures for {k_clusters} clusters, got {len(measure_points)}"
        )
    ws = weights if weights is not None else [None] * len(measure_points)
    profiles = ordered_map(
        lambda item: slice_profiles(item[0], spec, item[1]),
        list(zip(measure_points, ws)),
        threads,
    )
    logger.info(
        f"Clustering {len(profiles)} measures into {k_clusters} clusters "
        f"over {spec.n_slices} slices"
    )
    return FlowKMeans(profiles, k_clusters, k_supports, max_iter, seed, threads=threads).run()
