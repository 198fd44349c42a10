import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from digrad.partition import ActionPartition, PartitionError, partition_compound


def test_fourteen_dim_partition():
    # disjoint parts of sizes 3, 4, 5 plus 2 shared coordinates
    shared = [0, 1]
    part = ActionPartition([shared + [2, 3, 4], shared + [5, 6, 7, 8], shared + list(range(9, 14))])
    a = np.arange(14.0)
    tasks, a_s, disjoint = partition_compound(part, a)
    np.testing.assert_array_equal(a_s, [0, 1])
    assert [len(t) for t in tasks] == [5, 6, 7]
    assert part.k == 3 and part.compound_dim == 14
    for t, d in zip(tasks, disjoint):
        np.testing.assert_array_equal(t, np.concatenate([d, a_s]))


def test_eight_link_partition():
    part = ActionPartition([[0, 1, 2], [0, 1, 3, 4], [0, 1, 5, 6, 7]])
    assert [part.task_dim(i) for i in range(3)] == [3, 4, 5]
    assert part.shared == (0, 1) and part.compound_dim == 8


def test_empty_shared_set():
    part = ActionPartition([[0, 1], [2], [3, 4, 5]])
    assert part.shared == () and part.k == 0
    tasks, a_s, disjoint = part.split(np.arange(6.0))
    assert a_s.size == 0
    for t, d in zip(tasks, disjoint):
        np.testing.assert_array_equal(t, d)


def test_fully_shared():
    part = ActionPartition([[0, 1, 2], [0, 1, 2]])
    _, a_s, disjoint = part.split(np.array([3.0, 4.0, 5.0]))
    np.testing.assert_array_equal(a_s, [3, 4, 5])
    assert all(d.size == 0 for d in disjoint)


def test_independent_task_alongside_shared_group():
    part = ActionPartition([[0, 1, 2], [0, 1, 3], [4, 5]])
    assert part.shared_tasks == (0, 1) and part.k == 2
    assert part.disjoint[2] == (4, 5)


@pytest.mark.parametrize("lists, dim", [
    ([[0, 1], [1, 2]], 4),            # coordinate 3 uncovered
    ([[0, 1], [1, 2], [2, 3]], None),  # two different shared groups
    ([[0, 0, 1]], None),               # duplicate coordinate
])
def test_invalid_partitions(lists, dim):
    with pytest.raises(PartitionError):
        ActionPartition(lists, dim)


def test_length_mismatch():
    part = ActionPartition([[0, 1], [1, 2]])
    with pytest.raises(PartitionError):
        part.split(np.zeros(4))


@st.composite
def partitions(draw):
    """Random valid task lists: one shared group of k >= 2 tasks (or none) plus disjoint parts."""
    n_tasks = draw(st.integers(1, 4))
    k = draw(st.sampled_from([0] + list(range(2, n_tasks + 1))))
    n_shared = draw(st.integers(1, 3)) if k else 0
    sizes = [draw(st.integers(0 if i < k else 1, 3)) for i in range(n_tasks)]
    dim = n_shared + sum(sizes)
    perm = draw(st.permutations(list(range(dim))))
    shared, rest = list(perm[:n_shared]), list(perm[n_shared:])
    lists, start = [], 0
    for i, size in enumerate(sizes):
        lists.append(rest[start:start + size] + (shared if i < k else []))
        start += size
    return lists, dim


@given(partitions(), st.data())
def test_split_reassembles(spec, data):
    lists, dim = spec
    part = ActionPartition(lists, dim)
    a = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=dim, max_size=dim)))
    tasks, a_s, disjoint = part.split(a)
    covered = sorted(list(part.shared) + [j for d in part.disjoint for j in d])
    assert covered == list(range(dim))
    rebuilt = np.empty(dim)
    rebuilt[list(part.shared)] = a_s
    for d, view in zip(part.disjoint, disjoint):
        rebuilt[list(d)] = view
    np.testing.assert_array_equal(rebuilt, a)
    for i in part.shared_tasks:
        np.testing.assert_array_equal(tasks[i], np.concatenate([disjoint[i], a_s]))
    for i in set(range(part.n_tasks)) - set(part.shared_tasks):
        assert not set(part.shared) & set(part.task_indices[i])
