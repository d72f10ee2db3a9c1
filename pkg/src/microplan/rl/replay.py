"""Fixed-capacity ring replay buffer over flat numpy arrays."""

from __future__ import annotations

import numpy as np

CAPACITY = 500_000


class ReplayBuffer:
    def __init__(self, capacity=CAPACITY, obs_dim=16):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim), np.float64)
        self.actions = np.zeros(self.capacity, np.int64)
        self.rewards = np.zeros(self.capacity, np.float64)
        self.next_obs = np.zeros((self.capacity, obs_dim), np.float64)
        self.dones = np.zeros(self.capacity, np.float64)
        self.idx = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done):
        k = self.idx
        self.obs[k] = obs
        self.actions[k] = action
        self.rewards[k] = reward
        self.next_obs[k] = next_obs
        self.dones[k] = float(done)
        self.idx = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, batch_size):
        ix = rng.integers(0, self.size, size=batch_size)
        return (
            self.obs[ix],
            self.actions[ix],
            self.rewards[ix],
            self.next_obs[ix],
            self.dones[ix],
        )
