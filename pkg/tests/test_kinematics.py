import numpy as np
import pytest

from digrad.envs import BUILTIN_TREES, TreeError, forward_kinematics, joint_positions, load_tree, tree_from_dict

from oracles import fk_oracle


def serial(n, **extra):
    joints = [{"parent": i - 1, "length": 1.0} for i in range(n)]
    return tree_from_dict({"joints": joints, "end_effectors": [n - 1], **extra})


def test_straight_serial_chain():
    np.testing.assert_array_equal(forward_kinematics(serial(3), np.zeros(3)), [[3.0, 0.0]])


def test_quarter_turn():
    np.testing.assert_allclose(forward_kinematics(serial(1), [np.pi / 2]), [[0.0, 1.0]], atol=1e-12)


def test_folded_chain_returns_to_base():
    np.testing.assert_allclose(forward_kinematics(serial(2), [0.3, np.pi]), [[0.0, 0.0]], atol=1e-12)


@pytest.mark.parametrize("name", BUILTIN_TREES)
def test_builtin_trees_match_oracle(name):
    tree = load_tree(name)
    rng = np.random.default_rng(0)
    for _ in range(100):
        q = tree.sample_q(rng)
        np.testing.assert_allclose(forward_kinematics(tree, q), fk_oracle(tree, q), rtol=0, atol=1e-10)


def test_paper_tree_shape():
    tree = load_tree("paper-8link")
    assert tree.n_joints == 8 and tree.n_tasks == 3
    part = tree.partition()
    assert list(part.shared) == [0, 1]
    assert [len(c) for c in tree.chains] == [3, 4, 5]
    np.testing.assert_array_equal(tree.max_reach(), [3.0, 4.0, 5.0])


def test_upper_body_topology():
    tree = load_tree("upper-body")
    assert not tree.planar and tree.dim == 3
    part = tree.partition()
    assert len(part.shared) == 5 and [len(d) for d in part.disjoint] == [4, 4]
    q = tree.sample_q(np.random.default_rng(1))
    assert forward_kinematics(tree, q).shape == (2, 3)


@pytest.mark.parametrize("name", BUILTIN_TREES)
def test_partition_shared_set_is_chain_intersection(name):
    tree = load_tree(name)
    common = set.intersection(*(set(c) for c in tree.chains))
    assert set(tree.partition().shared) == common


def test_joint_positions_tip_of_each_link():
    tips = joint_positions(serial(3), [np.pi / 2, -np.pi / 2, 0.0])
    np.testing.assert_allclose(tips, [[0, 1], [1, 1], [2, 1]], atol=1e-12)


def test_wrong_angle_count():
    with pytest.raises(ValueError):
        forward_kinematics(serial(3), np.zeros(2))


def test_angle_strings_and_defaults():
    tree = serial(2, planar=True)
    np.testing.assert_allclose(tree.limits, [[-np.pi, np.pi]] * 2)
    tree = tree_from_dict({"joints": [{"limits": ["-pi/2", "pi/2"]}], "end_effectors": [0]})
    np.testing.assert_allclose(tree.limits, [[-np.pi / 2, np.pi / 2]])


@pytest.mark.parametrize("bad, match", [
    ({"joints": [{"parent": 1}, {"parent": 0}], "end_effectors": [1]}, "parent"),
    ({"joints": [{"length": 0.0}], "end_effectors": [0]}, "positive"),
    ({"joints": [{"limits": [1, -1]}], "end_effectors": [0]}, "limits"),
    ({"joints": [{}, {"parent": 0}], "end_effectors": [1], "tasks": [[1]]}, "root path"),
    ({"joints": [{"axis": [1, 0, 0]}], "end_effectors": [0]}, "planar"),
    ({"joints": [{"name": "a"}], "end_effectors": ["b"]}, "unknown joint"),
])
def test_invalid_trees(bad, match):
    with pytest.raises(TreeError, match=match):
        tree_from_dict(bad)


def test_load_tree_from_file(tmp_path):
    p = tmp_path / "t.yaml"
    p.write_text("joints:\n  - {name: s}\n  - {parent: s, length: 2}\n  - {parent: s, length: 3}\n"
                 "end_effectors: [1, 2]\n")
    tree = load_tree(p)
    assert tree.chains == ((0, 1), (0, 2))
    np.testing.assert_allclose(forward_kinematics(tree, np.zeros(3)), [[3, 0], [4, 0]])
    with pytest.raises(FileNotFoundError):
        load_tree(tmp_path / "missing.yaml")
