from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Sequence

import numpy as np

from src.data.multigoal_env import MultiGoalEnvSpec
from src.utils.errors import ConfigError

COLUMNS = ["sx", "sy", "ax", "ay", "r", "nsx", "nsy", "terminal"]


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass
class TransitionBatch:
    """Minibatch with normalized states; `indices` point back into the dataset."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    indices: np.ndarray


@dataclass
class OfflineDataset:
    """Column-stored transitions plus the metadata that produced them."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    env_spec: MultiGoalEnvSpec
    seed: int
    state_mean: np.ndarray
    state_std: np.ndarray
    episode_goals: List[int] = field(default_factory=list)

    def __post_init__(self):
        if self.states.shape[0] == 0:
            raise ConfigError("an offline dataset needs at least one transition")

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition], **metadata) -> "OfflineDataset":
        """Column-stacks records; `metadata` fills the remaining fields."""
        if not transitions:
            raise ConfigError("an offline dataset needs at least one transition")
        return cls(
            states=np.array([tr.state for tr in transitions], dtype=np.float64),
            actions=np.array([tr.action for tr in transitions], dtype=np.float64),
            rewards=np.array([tr.reward for tr in transitions], dtype=np.float64),
            next_states=np.array([tr.next_state for tr in transitions], dtype=np.float64),
            terminals=np.array([tr.terminal for tr in transitions], dtype=bool),
            **metadata,
        )

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, i: int) -> Transition:
        return Transition(
            self.states[i], self.actions[i], float(self.rewards[i]),
            self.next_states[i], bool(self.terminals[i]),
        )

    def __iter__(self) -> Iterator[Transition]:
        for i in range(len(self)):
            yield self[i]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    def to_matrix(self) -> np.ndarray:
        """Rows in the on-disk column order."""
        return np.column_stack([
            self.states, self.actions, self.rewards, self.next_states,
            self.terminals.astype(np.float64),
        ])

    def equals(self, other: "OfflineDataset") -> bool:
        return (
            self.env_spec == other.env_spec
            and self.seed == other.seed
            and self.episode_goals == other.episode_goals
            and np.array_equal(self.to_matrix(), other.to_matrix())
            and np.array_equal(self.state_mean, other.state_mean)
            and np.array_equal(self.state_std, other.state_std)
        )
