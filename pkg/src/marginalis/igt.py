"""Iowa-gambling-task payoffs, synthetic play, and choice-data files.

The classic four-deck payoff scheme pays a fixed reward per draw and packs a
fixed number of (equal-sized) losses into every block of ten draws from the
same deck, at block positions randomized per seed.  ``simulate`` produces
synthetic records by coupling these payoffs to expectancy-valence choice
behavior.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .models import EVParams, IGTRecord, ev_trial_probabilities
from .paramspace import norm_cdf

_BLOCK_SIZE = 10
_DECK_NAMES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class PayoffScheme:
    """Per-deck reward per draw, loss count per block, and loss total per block."""

    rewards: tuple[float, float, float, float]
    losses_per_block: tuple[int, int, int, int]
    loss_totals: tuple[float, float, float, float]
    block_size: int = _BLOCK_SIZE

    def __post_init__(self):
        if self.block_size != _BLOCK_SIZE:
            raise DataError(f"block size is fixed at {_BLOCK_SIZE}")
        for count in self.losses_per_block:
            if not 0 <= count <= self.block_size:
                raise DataError("loss counts must lie in 0..block_size")
        for total in self.loss_totals:
            if total > 0:
                raise DataError("loss totals must be non-positive")

    def net_outcome_per_block(self, deck: int) -> float:
        return self.block_size * self.rewards[deck - 1] + self.loss_totals[deck - 1]


def default_scheme() -> PayoffScheme:
    """The traditional scheme: two bad decks (A, B), two good decks (C, D)."""
    return PayoffScheme(
        rewards=(100.0, 100.0, 50.0, 50.0),
        losses_per_block=(5, 1, 5, 1),
        loss_totals=(-1250.0, -1250.0, -250.0, -250.0),
    )


def _loss_positions(scheme: PayoffScheme, deck: int, block: int, seed: int) -> np.ndarray:
    count = scheme.losses_per_block[deck - 1]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), deck, block]))
    return rng.choice(scheme.block_size, size=count, replace=False)


def draw_payoff(scheme: PayoffScheme, deck: int, deck_draw_index: int, seed: int):
    """(reward, loss) for the given deck's 0-based draw index.

    Within each consecutive block of ``block_size`` draws from a deck, exactly
    ``losses_per_block`` positions carry an equal share of the block's loss
    total; the positions depend only on (seed, deck, block index).
    """
    if not 1 <= deck <= 4:
        raise DataError(f"deck index must lie in 1..4, got {deck}")
    if deck_draw_index < 0:
        raise DataError("draw index must be non-negative")
    block, pos = divmod(deck_draw_index, scheme.block_size)
    count = scheme.losses_per_block[deck - 1]
    loss = 0.0
    if count and pos in _loss_positions(scheme, deck, block, seed):
        loss = scheme.loss_totals[deck - 1] / count
    return scheme.rewards[deck - 1], loss


@dataclass(frozen=True)
class GroupLevel:
    """Group-level generator: probit-scale normal per parameter (w, a, c)."""

    mu: tuple[float, float, float]
    sigma: tuple[float, float, float]

    def draw(self, rng: np.random.Generator) -> EVParams:
        raw = np.asarray(self.mu) + np.asarray(self.sigma) * rng.standard_normal(3)
        u = norm_cdf(raw)
        return EVParams(w=float(u[0]), a=float(u[1]), c=float(u[2]))


@dataclass(frozen=True)
class SimConfig:
    """Synthetic-play settings: who plays, for how long, with which parameters."""

    subjects: int
    seed: int
    trials: int = 100
    params: EVParams | Sequence[EVParams] | GroupLevel = field(
        default_factory=lambda: GroupLevel(mu=(-0.4, -0.5, -1.2), sigma=(0.3, 0.4, 0.25))
    )

    def __post_init__(self):
        if self.subjects < 1:
            raise DataError("need at least one subject")
        if self.trials < 1:
            raise DataError("need at least one trial")
        if not isinstance(self.params, (EVParams, GroupLevel)):
            if len(self.params) != self.subjects:
                raise DataError("per-subject parameter list must match the subject count")


def sample_next_choice(params: EVParams, history: IGTRecord, rng: np.random.Generator) -> int:
    """Draw the next deck (1..4) from the model's trial probabilities."""
    probs = ev_trial_probabilities(params, history)
    return int(rng.choice(4, p=probs)) + 1


def simulate(config: SimConfig, scheme: PayoffScheme | None = None) -> list[IGTRecord]:
    """Generate one record per subject; bit-reproducible for a given seed.

    Choices are sampled from the evolving expectancy-valence probabilities and
    payoffs come from ``draw_payoff`` with per-subject loss-position streams.
    """
    scheme = scheme or default_scheme()
    streams = np.random.SeedSequence(config.seed).spawn(config.subjects)
    records = []
    for s, stream in enumerate(streams):
        choice_seq, payoff_seq = stream.spawn(2)
        rng = np.random.default_rng(choice_seq)
        payoff_seed = int(payoff_seq.generate_state(1, dtype=np.uint64)[0])
        if isinstance(config.params, GroupLevel):
            params = config.params.draw(rng)
        elif isinstance(config.params, EVParams):
            params = config.params
        else:
            params = config.params[s]

        # Incremental replay of the same recursions ev_trial_probabilities uses.
        ev = np.zeros(4)
        deck_counts = np.zeros(4, dtype=int)
        choices = np.empty(config.trials, dtype=np.int64)
        rewards = np.empty(config.trials)
        losses = np.empty(config.trials)
        cp = params.c_prime
        for t in range(config.trials):
            if t == 0:
                probs = np.full(4, 0.25)
            else:
                z = (t / 10.0) ** cp * ev
                z -= z.max()
                probs = np.exp(z)
                probs /= probs.sum()
            deck = int(rng.choice(4, p=probs)) + 1
            reward, loss = draw_payoff(scheme, deck, int(deck_counts[deck - 1]), payoff_seed)
            deck_counts[deck - 1] += 1
            choices[t] = deck
            rewards[t] = reward
            losses[t] = loss
            v = (1.0 - params.w) * reward + params.w * loss
            ev[deck - 1] += params.a * (v - ev[deck - 1])
        records.append(
            IGTRecord(subject=f"s{s + 1:03d}", choices=choices, rewards=rewards, losses=losses)
        )
    return records


def save_igt_csv(records: Sequence[IGTRecord], path) -> None:
    """Write ``subject,trial,deck,reward,loss`` rows at full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["subject", "trial", "deck", "reward", "loss"])
        for record in records:
            for t in range(record.n_trials):
                writer.writerow(
                    [
                        record.subject,
                        t + 1,
                        int(record.choices[t]),
                        format(record.rewards[t], ".17g"),
                        format(record.losses[t], ".17g"),
                    ]
                )


def load_igt_csv(path) -> list[IGTRecord]:
    """Read and validate a choice-data file.

    Trials must be contiguous from 1 within each subject, decks in 1..4,
    rewards non-negative, losses non-positive.  Subjects with fewer trials
    than the longest subject are rejected, mirroring the usual exclusion of
    incomplete participants.
    """
    rows: dict[str, list[tuple[int, int, float, float]]] = {}
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["subject", "trial", "deck", "reward", "loss"]:
            raise DataError(f"{path}: expected header 'subject,trial,deck,reward,loss'")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            subject = row[0]
            try:
                trial = int(row[1])
                deck = int(row[2])
                reward = float(row[3])
                loss = float(row[4])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= deck <= 4:
                raise DataError(f"{path}:{lineno}: deck index must lie in 1..4, got {deck}")
            if reward < 0:
                raise DataError(f"{path}:{lineno}: reward must be non-negative")
            if loss > 0:
                raise DataError(f"{path}:{lineno}: loss must be non-positive")
            seq = rows.setdefault(subject, [])
            if trial != len(seq) + 1:
                raise DataError(
                    f"{path}:{lineno}: subject {subject!r} trials must be contiguous "
                    f"from 1, got trial {trial}"
                )
            seq.append((trial, deck, reward, loss))
    if not rows:
        raise DataError(f"{path}: no data rows")
    expected = max(len(seq) for seq in rows.values())
    records = []
    for subject, seq in rows.items():
        if len(seq) != expected:
            raise DataError(
                f"incomplete subject {subject!r}: {len(seq)} of {expected} trials"
            )
        records.append(
            IGTRecord(
                subject=subject,
                choices=np.array([deck for _, deck, _, _ in seq], dtype=np.int64),
                rewards=np.array([reward for _, _, reward, _ in seq]),
                losses=np.array([loss for _, _, _, loss in seq]),
            )
        )
    return records
