"""Adversary oracles, the distinguishing experiment, and attack scripts.

The oracle surface models what a radio-range adversary can actually do:
start exchanges with tags, talk to the reader, enumerate tags, and rip
the memory out of a bounded number of them.  Tags are addressed through
opaque serial references so that a strategy learns nothing (such as
subgroup membership) it could not observe over the air.

The distinguishing experiment runs in the usual three phases: free
interaction, then oracle access to one of two hidden candidate tags, then
a guess.  A scheme holds up when no shipped strategy guesses the hidden
tag noticeably better than a coin flip.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .protocol import (
    PAPER,
    Channel,
    DropChannel,
    FlipChannel,
    Msg1,
    Msg2,
    Msg3,
    Msg4,
    Outcome,
    SessionTranscript,
    reader_on_msg1,
    reader_on_msg3,
    run_session,
    tag_begin,
    tag_on_msg2,
    tag_on_msg4,
    ZeroModulusError,
)
from .registry import System, Tag

INIT = "init"  # send_tag(INIT, ref) asks the tag to open an exchange


class BudgetExceededError(Exception):
    pass


class CorruptionForbiddenError(Exception):
    """Corrupt() aimed at a protected challenge tag."""


@dataclass(frozen=True)
class AdversaryBudget:
    """Caps on oracle usage: tag queries, reader queries, computation steps,
    and how many tags may be ripped open."""

    send_tag: int
    send_reader: int
    steps: int
    corrupt_limit: int

    def __post_init__(self) -> None:
        for name in ("send_tag", "send_reader", "steps", "corrupt_limit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class CorruptDump:
    """Full memory image of a ripped-open tag."""

    index: int
    inv_word: int
    key: int
    tag_id: int
    nonce: int


class Oracles:
    """Metered oracle access to one provisioned system."""

    def __init__(
        self,
        system: System,
        budget: AdversaryBudget,
        rng: random.Random,
        mode: str = PAPER,
    ):
        self.system = system
        self.budget = budget
        self.rng = rng
        self.mode = mode
        self.send_tag_used = 0
        self.send_reader_used = 0
        self.steps_used = 0
        self.corrupted: set[int] = set()
        self.protected: set[int] = set()
        self._reader_session = None

    def charge(self, steps: int = 1) -> None:
        self.steps_used += steps
        if self.steps_used > self.budget.steps:
            raise BudgetExceededError(f"computation budget {self.budget.steps} exhausted")

    def draw_tags(self) -> list[int]:
        """Serial references for every tag currently deployed."""
        self.charge()
        return list(range(len(self.system.tags)))

    def _resolve(self, ref: int) -> Tag:
        return self.system.tags[ref]

    def send_tag(self, message, ref: int):
        """Deliver a message to a tag; returns its response.

        INIT opens an exchange (yields msg1), a msg2 yields msg3, a msg4
        yields the tag's accept/reject verdict.  Malformed input the tag
        aborts on yields None.
        """
        self.send_tag_used += 1
        if self.send_tag_used > self.budget.send_tag:
            raise BudgetExceededError(f"send_tag budget {self.budget.send_tag} exhausted")
        self.charge()
        tag = self._resolve(ref)
        try:
            if message == INIT:
                return tag_begin(tag)
            if isinstance(message, Msg2):
                return tag_on_msg2(tag, message)
            if isinstance(message, Msg4):
                return tag_on_msg4(tag, message)
        except ZeroModulusError:
            return None
        raise TypeError(f"tags answer INIT, msg2 or msg4, not {message!r}")

    def send_reader(self, message):
        """Deliver a message to the reader; returns its response or None."""
        self.send_reader_used += 1
        if self.send_reader_used > self.budget.send_reader:
            raise BudgetExceededError(
                f"send_reader budget {self.budget.send_reader} exhausted"
            )
        self.charge()
        if isinstance(message, Msg1):
            result = reader_on_msg1(self.system.table, message, self.rng)
            if result is None:
                self._reader_session = None
                return None
            self._reader_session, msg2 = result
            return msg2
        if isinstance(message, Msg3):
            if self._reader_session is None:
                return None
            return reader_on_msg3(
                self.system.table, self._reader_session, message, self.rng, self.mode
            )
        raise TypeError(f"the reader answers msg1 or msg3, not {message!r}")

    def corrupt(self, ref: int) -> CorruptDump:
        """Rip a tag's memory out.  Bounded, and barred on challenge tags."""
        self.charge()
        if ref in self.protected:
            raise CorruptionForbiddenError("challenge tags cannot be corrupted")
        cap = min(self.budget.corrupt_limit, len(self.system.tags) - 2)
        if ref not in self.corrupted and len(self.corrupted) >= cap:
            raise BudgetExceededError(f"corruption cap {cap} reached")
        self.corrupted.add(ref)
        tag = self._resolve(ref)
        return CorruptDump(
            index=tag.index,
            inv_word=tag.inv_word,
            key=tag.key,
            tag_id=tag.tag_id,
            nonce=tag.nonce,
        )


class ChallengeOracle:
    """Oracle access to the hidden challenge tag, without its reference."""

    def __init__(self, oracles: Oracles, hidden_ref: int):
        self._oracles = oracles
        self.__hidden = hidden_ref

    def send_tag(self, message):
        return self._oracles.send_tag(message, self.__hidden)

    def send_reader(self, message):
        return self._oracles.send_reader(message)


@dataclass
class PrivacyTrial:
    """Everything one experiment trial hands to a strategy."""

    oracles: Oracles
    pair: tuple[int, int]        # references of the two candidate tags
    challenge: ChallengeOracle   # routed to the secretly chosen one
    rng: random.Random           # strategy-private randomness


@dataclass
class ExperimentResult:
    trials: int
    successes: int

    @property
    def advantage(self) -> float:
        return self.successes / self.trials - 0.5


SAME_INDEX = "same_index"
ANY_PAIR = "any"


def _candidate_pairs(system: System, pair_mode: str) -> list[tuple[int, int]]:
    refs = range(len(system.tags))
    pairs = []
    for a in refs:
        for b in range(a + 1, len(system.tags)):
            if pair_mode == ANY_PAIR:
                pairs.append((a, b))
            elif pair_mode == SAME_INDEX:
                if system.tags[a].index == system.tags[b].index:
                    pairs.append((a, b))
            else:
                raise ValueError(f"unknown pair mode {pair_mode!r}")
    if not pairs:
        raise ValueError("no eligible challenge pairs in this system")
    return pairs


def privacy_experiment(
    strategy_factory: Callable[[], "object"],
    system: System,
    budget: AdversaryBudget,
    trials: int,
    seed: int = 0,
    pair_mode: str = SAME_INDEX,
    mode: str = PAPER,
) -> ExperimentResult:
    """Run the three-phase distinguishing experiment.

    Per trial: clone the system, sample a candidate pair (by default one
    sharing a cleartext index, which is the anonymity class the scheme
    actually claims), secretly pick one of the two, let a fresh strategy
    interact within budget, and score its guess.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    pairs = _candidate_pairs(system, pair_mode)
    successes = 0
    for trial_no in range(trials):
        trial_rng = random.Random(f"{seed}:trial:{trial_no}")
        working = system.clone()
        oracles = Oracles(working, budget, trial_rng, mode=mode)
        pair = pairs[trial_rng.randrange(len(pairs))]
        oracles.protected = set(pair)
        secret_bit = trial_rng.getrandbits(1)
        challenge = ChallengeOracle(oracles, pair[secret_bit])
        strategy = strategy_factory()
        trial = PrivacyTrial(
            oracles=oracles,
            pair=pair,
            challenge=challenge,
            rng=random.Random(f"{seed}:strategy:{trial_no}"),
        )
        guess = strategy.run(trial)
        if guess == secret_bit:
            successes += 1
    return ExperimentResult(trials=trials, successes=successes)


# --- the shipped strategy catalogue -------------------------------------------


def _full_session(oracles: Oracles, ref: int):
    """Drive one complete exchange on a tag, returning the message tuple."""
    msg1 = oracles.send_tag(INIT, ref)
    msg2 = oracles.send_reader(msg1)
    if msg2 is None:
        return (msg1, None, None, None, None)
    msg3 = oracles.send_tag(msg2, ref)
    if msg3 is None:
        return (msg1, msg2, None, None, None)
    msg4 = oracles.send_reader(msg3)
    if msg4 is None:
        return (msg1, msg2, msg3, None, None)
    verdict = oracles.send_tag(msg4, ref)
    return (msg1, msg2, msg3, msg4, verdict)


def _full_challenge_session(challenge: ChallengeOracle):
    msg1 = challenge.send_tag(INIT)
    msg2 = challenge.send_reader(msg1)
    if msg2 is None:
        return (msg1, None, None, None, None)
    msg3 = challenge.send_tag(msg2)
    if msg3 is None:
        return (msg1, msg2, None, None, None)
    msg4 = challenge.send_reader(msg3)
    if msg4 is None:
        return (msg1, msg2, msg3, None, None)
    verdict = challenge.send_tag(msg4)
    return (msg1, msg2, msg3, msg4, verdict)


class RandomGuesser:
    """Coin flip; the floor every other strategy is measured against."""

    name = "random_guesser"

    def run(self, trial: PrivacyTrial) -> int:
        return trial.rng.getrandbits(1)


class Msg1Replayer:
    """Record each candidate's opening message over a completed exchange,
    then bet on the challenge opening matching the first one.  A completed
    exchange rotates the rolling nonce, so the recording never recurs."""

    name = "msg1_replayer"

    def run(self, trial: PrivacyTrial) -> int:
        recorded = []
        for ref in trial.pair:
            msgs = _full_session(trial.oracles, ref)
            recorded.append(msgs[0])
        observed = trial.challenge.send_tag(INIT)
        return 0 if observed == recorded[0] else 1


class TranscriptMatcher:
    """Record a full transcript per candidate and look for a repeat in the
    challenge exchange.  Fresh reader nonces make repeats vanishing."""

    name = "transcript_matcher"

    def run(self, trial: PrivacyTrial) -> int:
        recorded = [_full_session(trial.oracles, ref) for ref in trial.pair]
        observed = _full_challenge_session(trial.challenge)
        if observed == recorded[0]:
            return 0
        if observed == recorded[1]:
            return 1
        return trial.rng.getrandbits(1)


class IndexCorrelator:
    """Compare the cleartext index in the opening messages.  Decisive when
    the candidates' indices differ; a coin flip when they match, which is
    why indices are capped to never be unique to one subgroup."""

    name = "index_correlator"

    def run(self, trial: PrivacyTrial) -> int:
        i0 = trial.oracles.send_tag(INIT, trial.pair[0]).index
        i1 = trial.oracles.send_tag(INIT, trial.pair[1]).index
        observed = trial.challenge.send_tag(INIT).index
        if i0 != i1:
            return 0 if observed == i0 else 1
        return trial.rng.getrandbits(1)


STRATEGY_CATALOGUE = [RandomGuesser, Msg1Replayer, TranscriptMatcher, IndexCorrelator]


# --- scripted attacks ----------------------------------------------------------


def snapshot_system(system: System) -> tuple:
    """Comparable image of all mutable protocol state."""
    rows = tuple(
        (key, row.tag_id, row.key, row.nonce_old, row.nonce_new)
        for key, row in sorted(system.table.rows.items())
    )
    tags = tuple(
        (t.subgroup_id, t.index, t.inv_word, t.tag_id, t.key, t.nonce)
        for t in system.tags
    )
    return rows, tags


@dataclass
class ReplayOutcome:
    fresh_msg1_matched_old: bool = False      # one-session-old msg1 still resolves
    fresh_msg1_completed: bool = False        # ... but must never finish the exchange
    stale_msg1_rejected: bool = False         # two-session-old msg1 resolves nowhere
    msg4_replay_accepted: bool = False        # see note below; not an impersonation
    relayed_msg3_accepted: bool = False       # response to a replayed msg2, relayed on
    state_disturbed: bool = False             # any failed path moved state

    # msg4_replay_accepted pins a known soft spot: when the reader-proof
    # residue happens to need no reduction, a replay of the latest closing
    # message re-verifies against a fresh exchange.  The tag merely
    # re-adopts the nonce it already holds, so nothing is forged and no
    # state moves, but the check is vacuous rather than a rejection.

    @property
    def impersonated(self) -> bool:
        return self.fresh_msg1_completed or self.relayed_msg3_accepted


def replay_attack(
    system: System, tag: Tag, rng: random.Random, mode: str = PAPER
) -> ReplayOutcome:
    """Replay every recorded message of honest exchanges, per playbook:
    old msg1 against the reader (with a replayed msg3 follow-up), a stale
    msg1 from two exchanges back, an old msg4 against the tag, and an old
    msg2 whose answer is relayed into a fresh reader exchange."""
    out = ReplayOutcome()
    table = system.table

    first = run_session(tag, table, Channel(), rng, mode)
    assert first.outcome is Outcome.MUTUAL_SUCCESS, "playbook needs an honest baseline"

    # (a) the recorded msg1 still matches through the old nonce...
    before = snapshot_system(system)
    resolved = reader_on_msg1(table, first.msg1, rng)
    if resolved is not None:
        session, _msg2 = resolved
        out.fresh_msg1_matched_old = any(
            c.matched_on == "old" for c in session.candidates
        )
        # ...but replaying the recorded proof cannot close the exchange
        msg4 = reader_on_msg3(table, session, first.msg3, rng, mode)
        out.fresh_msg1_completed = msg4 is not None
    if snapshot_system(system) != before:
        out.state_disturbed = True

    # (b) after one more honest exchange both stored nonces have rotated past
    second = run_session(tag, table, Channel(), rng, mode)
    assert second.outcome is Outcome.MUTUAL_SUCCESS
    before = snapshot_system(system)
    out.stale_msg1_rejected = reader_on_msg1(table, first.msg1, rng) is None
    if snapshot_system(system) != before:
        out.state_disturbed = True

    # (c) an old msg4 against a tag holding a fresh exchange; acceptance is
    # possible through the no-reduction vacuity but must never move state
    before = snapshot_system(system)
    msg1 = tag_begin(tag)
    live = reader_on_msg1(table, msg1, rng)
    assert live is not None
    _session, msg2 = live
    tag_on_msg2(tag, msg2)
    out.msg4_replay_accepted = tag_on_msg4(tag, second.msg4)
    if snapshot_system(system) != before:
        out.state_disturbed = True

    # (d) a replayed msg2 makes the tag reproduce its old proof, which a
    # fresh reader exchange must still refuse
    before = snapshot_system(system)
    msg1 = tag_begin(tag)
    live = reader_on_msg1(table, msg1, rng)
    assert live is not None
    session, _fresh_msg2 = live
    replayed_proof = tag_on_msg2(tag, second.msg2)
    out.relayed_msg3_accepted = (
        reader_on_msg3(table, session, replayed_proof, rng, mode) is not None
    )
    tag.pending_nonce1 = None  # abandoned exchange
    if snapshot_system(system) != before:
        out.state_disturbed = True

    return out


@dataclass
class DesyncOutcome:
    losses: int
    recovered: bool


def desync_attack(
    system: System, tag: Tag, losses: int, rng: random.Random, mode: str = PAPER
) -> DesyncOutcome:
    """Suppress the closing message of ``losses`` consecutive exchanges,
    then check whether an honest exchange still goes through."""
    drop = DropChannel(4)
    for _ in range(losses):
        run_session(tag, system.table, drop, rng, mode)
    final = run_session(tag, system.table, Channel(), rng, mode)
    return DesyncOutcome(losses=losses, recovered=final.outcome is Outcome.MUTUAL_SUCCESS)


def mitm_attack(
    system: System,
    tag: Tag,
    target_msg: int,
    bit: int,
    rng: random.Random,
    mode: str = PAPER,
) -> SessionTranscript:
    """One exchange with a single payload bit flipped in transit."""
    return run_session(tag, system.table, FlipChannel(target_msg, bit), rng, mode)


MITM_REJECTED = "rejected"
MITM_BENIGN = "benign_completion"
MITM_BROKEN = "broken"


def classify_flip_session(system: System, tag: Tag, transcript: SessionTranscript) -> str:
    """Judge what a bit-flipped exchange actually achieved.

    A completed exchange that leaves the pair synchronised forged nothing:
    the flip landed somewhere the arithmetic ignores (typically the second
    reader mask when the tag's residue needed no reduction).  A completed
    exchange that desynchronised the pair or broke the pairing is a break.
    """
    if transcript.outcome is not Outcome.MUTUAL_SUCCESS:
        return MITM_REJECTED
    row = system.table.rows.get((tag.subgroup_id, tag.index))
    intact = (
        row is not None
        and row.tag_id == tag.tag_id
        and row.key == tag.key
        and tag.nonce == row.nonce_new
    )
    return MITM_BENIGN if intact else MITM_BROKEN


def format_report_line(attack: str, target: str, trials: int, failures: int,
                       verdict: str) -> str:
    return f"{attack} {target} {trials} {failures} {verdict}"
