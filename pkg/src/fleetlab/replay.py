"""Learning machinery shared by all commanders: prioritized replay on a sum
tree, Double-DQN targets over segmented Q-heads, soft target-network
updates, and the epsilon-greedy exploration schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import SegmentLayout
from .nn import QNetwork, forward_batch


# ---------------------------------------------------------------------------
# Sum tree

class SumTree:
    """Sum tree over `capacity` leaves, padded to a power of two so leaf
    intervals follow index order (find(mass) returns the first index whose
    cumulative sum exceeds mass). set/find are O(log capacity).
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        base = 1
        while base < capacity:
            base *= 2
        self._base = base
        self.nodes = np.zeros(2 * base)

    def set(self, index: int, value: float) -> None:
        if not 0 <= index < self.capacity:
            raise IndexError(f"leaf {index} outside 0..{self.capacity - 1}")
        if value < 0:
            raise ValueError("leaf values must be non-negative")
        i = self._base + index
        delta = value - self.nodes[i]
        while i >= 1:
            self.nodes[i] += delta
            i //= 2

    def get(self, index: int) -> float:
        return float(self.nodes[self._base + index])

    def total(self) -> float:
        return float(self.nodes[1])

    def find(self, mass: float) -> int:
        """Leaf index whose cumulative-sum interval contains `mass`.

        mass must lie in [0, total); padding leaves hold zero mass and are
        unreachable.
        """
        i = 1
        while i < self._base:
            left = 2 * i
            if mass < self.nodes[left]:
                i = left
            else:
                mass -= self.nodes[left]
                i = left + 1
        return i - self._base


# ---------------------------------------------------------------------------
# Prioritized replay

@dataclass
class Transition:
    """One stored experience; `actions` are per-segment argmax indices."""

    obs: np.ndarray
    actions: list[int]
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Ring buffer with proportional prioritized sampling.

    Stored priorities are already exponentiated: p_i = (|delta| + eps)^alpha.
    Pushes without an explicit priority bootstrap at the current maximum (1
    for an empty buffer) so fresh transitions get sampled soon.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, epsilon: float = 0.01):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.alpha = alpha
        self.epsilon = epsilon
        self.data: list = []
        self.tree = SumTree(capacity)
        self._next = 0          # ring write position
        self._max_priority = 0.0

    def __len__(self) -> int:
        return len(self.data)

    def ready(self, batch_size: int) -> bool:
        return len(self.data) >= batch_size

    def priority_from_delta(self, delta: float) -> float:
        return (abs(float(delta)) + self.epsilon) ** self.alpha

    def push(self, transition, priority: float | None = None) -> None:
        if priority is None:
            priority = self._max_priority if self.data else 1.0
        if priority <= 0:
            raise ValueError("priority must be positive")
        if len(self.data) < self.capacity:
            self.data.append(transition)
        else:
            self.data[self._next] = transition
        self.tree.set(self._next, priority)
        self._max_priority = max(self._max_priority, priority)
        self._next = (self._next + 1) % self.capacity

    def update_priorities(self, indices, deltas) -> None:
        """Refresh sampled transitions' priorities from fresh TD errors."""
        for i, d in zip(indices, deltas):
            p = self.priority_from_delta(d)
            self.tree.set(int(i), p)
            self._max_priority = max(self._max_priority, p)

    def probabilities(self) -> np.ndarray:
        """Current sampling distribution over stored transitions (for
        verification against the closed form)."""
        n = len(self.data)
        leaves = self.tree.nodes[self.tree._base:self.tree._base + n]
        return leaves / self.tree.total()

    def sample(self, batch_size: int, beta: float,
               rng: np.random.Generator):
        """Draw proportionally to priority; importance weights are
        (N * P(i))^-beta, normalized by the batch maximum."""
        if not self.ready(batch_size):
            raise ValueError(
                f"buffer holds {len(self.data)} < batch {batch_size}")
        total = self.tree.total()
        masses = rng.uniform(0.0, total, size=batch_size)
        indices = np.array([self.tree.find(m) for m in masses])
        probs = np.array([self.tree.get(i) for i in indices]) / total
        weights = (len(self.data) * probs) ** (-beta)
        weights = weights / weights.max()
        transitions = [self.data[i] for i in indices]
        return transitions, indices, weights


def beta_at(step: int, total_steps: int, beta0: float = 0.4) -> float:
    """Importance-sampling exponent, annealed linearly beta0 -> 1.0."""
    if total_steps <= 0:
        return 1.0
    return beta0 + (1.0 - beta0) * min(1.0, step / total_steps)


# ---------------------------------------------------------------------------
# Exploration

@dataclass
class ExplorationSchedule:
    """Exponential epsilon decay with a floor."""

    eps_start: float = 1.0
    eps_min: float = 0.01
    decay: float = 0.995
    step: int = 0

    def value(self) -> float:
        return epsilon_at(self, self.step)

    def advance(self) -> None:
        self.step += 1


def epsilon_at(schedule: ExplorationSchedule, t: int) -> float:
    return max(schedule.eps_min, schedule.eps_start * schedule.decay ** t)


def select_action(qvec, layout: SegmentLayout, epsilon: float,
                  rng: np.random.Generator) -> list[int]:
    """Independent epsilon-greedy pick per segment; greedy ties resolve to
    the lowest index."""
    q = np.asarray(qvec, dtype=float)
    if q.shape != (layout.total,):
        raise ValueError(f"expected q of shape ({layout.total},), got {q.shape}")
    out = []
    for offset, width in layout.segments():
        if epsilon > 0 and rng.random() < epsilon:
            out.append(int(rng.integers(0, width)))
        else:
            out.append(int(np.argmax(q[offset:offset + width])))
    return out


# ---------------------------------------------------------------------------
# Targets and target-network maintenance

def double_dqn_target(rewards, next_obs, terminals, policy_net: QNetwork,
                      target_net: QNetwork, gamma: float,
                      layout: SegmentLayout):
    """Double-DQN target with a segmented value:
    y = r + gamma * sum_k Q_target[seg_k, argmax_a Q_policy[seg_k, a]],
    and y = r on terminal transitions. Accepts one sample (1-D next_obs)
    or a batch; returns float or array accordingly.
    """
    X = np.asarray(next_obs, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    r = np.atleast_1d(np.asarray(rewards, dtype=float))
    term = np.atleast_1d(np.asarray(terminals, dtype=bool))
    batch = X.shape[0]
    if r.shape != (batch,) or term.shape != (batch,):
        raise ValueError("rewards/terminals must match the batch size")

    q_policy, _ = forward_batch(policy_net, X)
    q_target, _ = forward_batch(target_net, X)
    value = np.zeros(batch)
    rows = np.arange(batch)
    for offset, width in layout.segments():
        chosen = np.argmax(q_policy[:, offset:offset + width], axis=1)
        value += q_target[rows, offset + chosen]
    y = r + gamma * value
    y[term] = r[term]
    return float(y[0]) if single else y


def soft_update(target_net: QNetwork, policy_net: QNetwork, tau: float) -> None:
    """Polyak blend: target <- tau * policy + (1 - tau) * target."""
    if target_net.sizes != policy_net.sizes:
        raise ValueError("network shapes differ")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    for name, tp in target_net.params.items():
        tp *= (1.0 - tau)
        tp += tau * policy_net.params[name]
    target_net.version += 1
