"""Decomposition of a compound action into per-task, shared and disjoint parts."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class ActionPartition:
    """Which coordinates of the compound action belong to which task.

    ``task_indices[i]`` lists the compound-action coordinates that drive task
    ``i``. Coordinates owned by more than one task form the shared set; all of
    them must be owned by the same group of ``k`` tasks (the shared tasks), so
    the shared set is the intersection of those tasks' index lists. Tasks
    outside that group are independent.

    Per-task views are ordered ``[disjoint..., shared...]``.
    """

    task_indices: tuple
    compound_dim: int
    shared: tuple = field(init=False)
    disjoint: tuple = field(init=False)
    shared_tasks: tuple = field(init=False)

    def __init__(self, task_indices: Sequence[Sequence[int]], compound_dim: int | None = None):
        lists = [tuple(int(j) for j in idx) for idx in task_indices]
        if not lists:
            raise PartitionError("at least one task is required")
        for i, idx in enumerate(lists):
            if len(set(idx)) != len(idx):
                raise PartitionError(f"task {i} lists a coordinate twice")
        union = set().union(*map(set, lists))
        if compound_dim is None:
            compound_dim = max(union) + 1 if union else 0
        if union != set(range(compound_dim)):
            raise PartitionError(f"task index lists must cover exactly 0..{compound_dim - 1}")

        owners = {j: tuple(i for i, idx in enumerate(lists) if j in idx) for j in range(compound_dim)}
        shared = sorted(j for j, own in owners.items() if len(own) > 1)
        groups = {owners[j] for j in shared}
        if len(groups) > 1:
            raise PartitionError(f"shared coordinates are owned by different task groups: {sorted(groups)}")
        shared_tasks = groups.pop() if groups else ()
        if shared_tasks:
            common = set.intersection(*(set(lists[i]) for i in shared_tasks))
            assert common == set(shared)
        shared_set = set(shared)
        disjoint = tuple(tuple(sorted(j for j in idx if j not in shared_set)) for idx in lists)

        object.__setattr__(self, "task_indices", tuple(lists))
        object.__setattr__(self, "compound_dim", int(compound_dim))
        object.__setattr__(self, "shared", tuple(shared))
        object.__setattr__(self, "disjoint", disjoint)
        object.__setattr__(self, "shared_tasks", shared_tasks)

    @property
    def n_tasks(self) -> int:
        return len(self.task_indices)

    @property
    def k(self) -> int:
        """Number of tasks sharing ``shared``; 0 when nothing is shared."""
        return len(self.shared_tasks)

    def task_view(self, i: int) -> np.ndarray:
        """Indices of task ``i``'s action ``a_i`` in view order (disjoint, then shared)."""
        shared = self.shared if i in self.shared_tasks else ()
        return np.array(self.disjoint[i] + shared, dtype=np.intp)

    def task_dim(self, i: int) -> int:
        return len(self.task_indices[i])

    def mask(self, i: int) -> np.ndarray:
        m = np.zeros(self.compound_dim, dtype=bool)
        m[list(self.task_indices[i])] = True
        return m

    def split(self, a):
        """Return ``(task_views, shared_view, disjoint_views)`` of compound action(s) ``a``.

        Works on a single vector or on rows of a batch.
        """
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-1] != self.compound_dim:
            raise PartitionError(f"compound action must have length {self.compound_dim}, got {a.shape[-1]}")
        tasks = [a[..., self.task_view(i)] for i in range(self.n_tasks)]
        shared = a[..., np.array(self.shared, dtype=np.intp)]
        disjoint = [a[..., np.array(d, dtype=np.intp)] for d in self.disjoint]
        return tasks, shared, disjoint


def partition_compound(partition: ActionPartition, a):
    return partition.split(a)
