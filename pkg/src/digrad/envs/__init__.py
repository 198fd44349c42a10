from .kinematics import (BUILTIN_TREES, KinematicTree, TreeError, forward_kinematics, joint_positions,
                         load_tree, tree_from_dict)
from .reach import ReachEnv, RewardSpec, StepResult, scores

__all__ = [
    "BUILTIN_TREES", "KinematicTree", "TreeError", "forward_kinematics", "joint_positions",
    "load_tree", "tree_from_dict", "ReachEnv", "RewardSpec", "StepResult", "scores",
]
