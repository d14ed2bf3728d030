"""The four-message mutual authentication exchange.

    tag  -> reader   msg1 = {index, blinded_inv}      blinded_inv = inv ^ r4
    reader -> tag    msg2 = {mask1, mask2}            mask_i = n_i ^ key
    tag  -> reader   msg3 = {tag_proof}               (id ^ n1) mod (inv ^ n2)
    reader -> tag    msg4 = {mask3, reader_proof}     (id ^ n3) mod (inv ^ n1)

The reader resolves msg1 by checking, per subgroup holding the index, the
blind against the row's old and new nonce, so the search touches at most
one row per subgroup.  After a verified msg3 the reader rotates the row's
nonce pair; the tag adopts n3 as its rolling nonce only after verifying
msg4, which is what keeps a lost msg4 recoverable through the old value.

Rejection paths never mutate the table or the tag; the only writes are the
reader's rotate-on-msg3-success and the tag's nonce adoption on msg4.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .groups import LWord, encode, inverse
from .registry import ServerRow, ServerTable, Tag

PAPER = "paper"          # verbatim rotate: old <- new, new <- n3
RESILIENT = "resilient"  # on an old-value match, keep old and replace new only
UPDATE_MODES = (PAPER, RESILIENT)


class ProtocolError(Exception):
    pass


class ZeroModulusError(ProtocolError):
    """Residue modulus came out zero: msg was malformed or forged."""


@dataclass(frozen=True)
class Msg1:
    index: int
    blinded_inv: LWord


@dataclass(frozen=True)
class Msg2:
    mask1: LWord
    mask2: LWord


@dataclass(frozen=True)
class Msg3:
    tag_proof: LWord


@dataclass(frozen=True)
class Msg4:
    mask3: LWord
    reader_proof: LWord


Message = Msg1 | Msg2 | Msg3 | Msg4


class Phase(Enum):
    AWAITING_MSG1 = "awaiting_msg1"
    AWAITING_MSG3 = "awaiting_msg3"
    DONE = "done"
    FAILED = "failed"


MATCHED_OLD = "old"
MATCHED_NEW = "new"


@dataclass
class Candidate:
    subgroup_id: int
    index: int
    inv_word: int
    row: ServerRow
    matched_on: str  # MATCHED_OLD or MATCHED_NEW


@dataclass
class ReaderSession:
    """Reader-side state between msg1 and msg3 of one exchange."""

    candidates: list[Candidate] = field(default_factory=list)
    active: int = 0
    nonce1: LWord = 0
    nonce2: LWord = 0
    nonce3: LWord = 0
    phase: Phase = Phase.AWAITING_MSG1
    checks_performed: int = 0


def draw_nonce(rng: random.Random, bits: int, inv_word: int) -> LWord:
    """Uniform L-bit nonce, excluding the two values that would make the
    residue modulus (inv ^ nonce) come out 0 or 1."""
    while True:
        value = rng.getrandbits(bits)
        if (value ^ inv_word) > 1:
            return value


def tag_begin(tag: Tag) -> Msg1:
    """Step 1: the tag blinds its stored inverse with its rolling nonce."""
    return Msg1(index=tag.index, blinded_inv=tag.inv_word ^ tag.nonce)


def reader_on_msg1(
    table: ServerTable, msg: Msg1, rng: random.Random
) -> tuple[ReaderSession, Msg2] | None:
    """Step 2: resolve the blind against each subgroup holding the index.

    Returns None when no row matches (the reader drops the exchange).
    Every matching row is kept as a fallback candidate in table order; the
    first one becomes active and keys msg2.
    """
    session = ReaderSession(phase=Phase.AWAITING_MSG3)
    if not 1 <= msg.index <= table.index_cap:
        session.phase = Phase.FAILED
        return None
    for sub in table.subgroups:
        row = table.rows.get((sub.label, msg.index))
        if row is None:
            continue
        session.checks_performed += 1
        inv_word = encode(inverse(sub, msg.index), table.group)
        if inv_word ^ row.nonce_new == msg.blinded_inv:
            matched = MATCHED_NEW
        elif inv_word ^ row.nonce_old == msg.blinded_inv:
            matched = MATCHED_OLD
        else:
            continue
        session.candidates.append(
            Candidate(sub.label, msg.index, inv_word, row, matched)
        )
    if not session.candidates:
        session.phase = Phase.FAILED
        return None

    active = session.candidates[0]
    bits = table.group.word_bits
    session.nonce1 = draw_nonce(rng, bits, active.inv_word)
    session.nonce2 = draw_nonce(rng, bits, active.inv_word)
    return session, Msg2(
        mask1=session.nonce1 ^ active.row.key,
        mask2=session.nonce2 ^ active.row.key,
    )


def tag_on_msg2(tag: Tag, msg: Msg2) -> Msg3:
    """Step 3: unmask the reader nonces and answer with the identity residue."""
    n1 = msg.mask1 ^ tag.key
    n2 = msg.mask2 ^ tag.key
    modulus = tag.inv_word ^ n2
    if modulus == 0:
        raise ZeroModulusError("msg2 yields a zero modulus; honest readers never do")
    tag.pending_nonce1 = n1  # needed to verify msg4
    return Msg3(tag_proof=(tag.tag_id ^ n1) % modulus)


def reader_on_msg3(
    table: ServerTable,
    session: ReaderSession,
    msg: Msg3,
    rng: random.Random,
    mode: str = PAPER,
) -> Msg4 | None:
    """Step 4: verify the residue, rotate the row nonces, answer msg4.

    Candidates are tried in recorded order; a mismatch advances to the
    next.  Returns None (and leaves every row untouched) when no candidate
    verifies.
    """
    if mode not in UPDATE_MODES:
        raise ValueError(f"unknown update mode {mode!r}")
    if session.phase is not Phase.AWAITING_MSG3:
        return None
    while session.active < len(session.candidates):
        cand = session.candidates[session.active]
        modulus = cand.inv_word ^ session.nonce2
        # proofs are reduced residues; anything >= modulus cannot verify
        if modulus > 0 and msg.tag_proof < modulus:
            expected = (cand.row.tag_id ^ session.nonce1) % modulus
            if expected == msg.tag_proof:
                break
        session.active += 1
    else:
        session.phase = Phase.FAILED
        return None

    cand = session.candidates[session.active]
    reply_modulus = cand.inv_word ^ session.nonce1
    if reply_modulus <= 1:
        # only reachable for a fallback candidate; the nonce draw rules this
        # out for the active one
        session.phase = Phase.FAILED
        return None

    session.nonce3 = draw_nonce(rng, table.group.word_bits, cand.inv_word)
    if mode == RESILIENT and cand.matched_on == MATCHED_OLD:
        # tag never saw the previous rotation; keep the value it still holds
        cand.row.nonce_new = session.nonce3
    else:
        cand.row.nonce_old = cand.row.nonce_new
        cand.row.nonce_new = session.nonce3
    session.phase = Phase.DONE
    return Msg4(
        mask3=session.nonce3 ^ cand.row.key,
        reader_proof=(cand.row.tag_id ^ session.nonce3) % reply_modulus,
    )


def tag_on_msg4(tag: Tag, msg: Msg4) -> bool:
    """Step 5: verify the reader's residue; adopt the new nonce on success."""
    if tag.pending_nonce1 is None:
        return False  # no exchange in flight, nothing to verify against
    n3 = msg.mask3 ^ tag.key
    modulus = tag.inv_word ^ tag.pending_nonce1
    if modulus == 0:
        tag.pending_nonce1 = None
        raise ZeroModulusError("msg4 yields a zero modulus")
    accepted = (
        msg.reader_proof < modulus
        and (tag.tag_id ^ n3) % modulus == msg.reader_proof
    )
    tag.pending_nonce1 = None
    if accepted:
        tag.nonce = n3
    return accepted


# --- wire format -------------------------------------------------------------
#
# Frame = [type: 1 byte][payload].  The index travels as 4 bytes big-endian;
# every word field takes word_bits/8 bytes big-endian.

FRAME_TYPES = {Msg1: 1, Msg2: 2, Msg3: 3, Msg4: 4}


def _word_size(word_bits: int) -> int:
    if word_bits % 8 != 0:
        raise ValueError(f"wire format needs byte-aligned words, got {word_bits} bits")
    return word_bits // 8


def encode_frame(msg: Message, word_bits: int) -> bytes:
    size = _word_size(word_bits)
    if isinstance(msg, Msg1):
        payload = msg.index.to_bytes(4, "big") + msg.blinded_inv.to_bytes(size, "big")
    elif isinstance(msg, Msg2):
        payload = msg.mask1.to_bytes(size, "big") + msg.mask2.to_bytes(size, "big")
    elif isinstance(msg, Msg3):
        payload = msg.tag_proof.to_bytes(size, "big")
    elif isinstance(msg, Msg4):
        payload = msg.mask3.to_bytes(size, "big") + msg.reader_proof.to_bytes(size, "big")
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return bytes([FRAME_TYPES[type(msg)]]) + payload


def decode_frame(frame: bytes, word_bits: int) -> Message:
    size = _word_size(word_bits)
    if not frame:
        raise ValueError("empty frame")
    ftype, payload = frame[0], frame[1:]
    if ftype == 1:
        if len(payload) != 4 + size:
            raise ValueError(f"bad msg1 length {len(payload)}")
        return Msg1(
            index=int.from_bytes(payload[:4], "big"),
            blinded_inv=int.from_bytes(payload[4:], "big"),
        )
    if ftype == 2:
        if len(payload) != 2 * size:
            raise ValueError(f"bad msg2 length {len(payload)}")
        return Msg2(
            mask1=int.from_bytes(payload[:size], "big"),
            mask2=int.from_bytes(payload[size:], "big"),
        )
    if ftype == 3:
        if len(payload) != size:
            raise ValueError(f"bad msg3 length {len(payload)}")
        return Msg3(tag_proof=int.from_bytes(payload, "big"))
    if ftype == 4:
        if len(payload) != 2 * size:
            raise ValueError(f"bad msg4 length {len(payload)}")
        return Msg4(
            mask3=int.from_bytes(payload[:size], "big"),
            reader_proof=int.from_bytes(payload[size:], "big"),
        )
    raise ValueError(f"unknown frame type {ftype}")


# --- channel and session driver ----------------------------------------------


class Channel:
    """Pass-through air interface; subclasses inject faults."""

    def deliver(self, frame: bytes) -> bytes | None:
        return frame


class DropChannel(Channel):
    """Silently drops every frame of one message type."""

    def __init__(self, drop_type: int):
        self.drop_type = drop_type

    def deliver(self, frame: bytes) -> bytes | None:
        if frame and frame[0] == self.drop_type:
            return None
        return frame


class FlipChannel(Channel):
    """Flips one payload bit (LSB-first over the payload bytes) of one type."""

    def __init__(self, target_type: int, bit: int):
        self.target_type = target_type
        self.bit = bit

    def deliver(self, frame: bytes) -> bytes | None:
        if not frame or frame[0] != self.target_type:
            return frame
        payload = int.from_bytes(frame[1:], "big")
        if self.bit >= 8 * len(frame[1:]):
            raise ValueError(f"bit {self.bit} outside payload of {len(frame) - 1} bytes")
        payload ^= 1 << self.bit
        return frame[:1] + payload.to_bytes(len(frame) - 1, "big")


class Outcome(Enum):
    MUTUAL_SUCCESS = "mutual_success"
    READER_REJECTED_MSG1 = "reader_rejected_msg1"
    READER_REJECTED_MSG3 = "reader_rejected_msg3"
    TAG_REJECTED_MSG4 = "tag_rejected_msg4"
    ABORTED = "aborted"


TO_READER = "T>R"
TO_TAG = "R>T"


@dataclass
class FrameRecord:
    seq: int
    direction: str
    frame_type: int
    payload_hex: str
    verdict: str


@dataclass
class SessionTranscript:
    outcome: Outcome
    frames: list[FrameRecord] = field(default_factory=list)
    msg1: Msg1 | None = None
    msg2: Msg2 | None = None
    msg3: Msg3 | None = None
    msg4: Msg4 | None = None
    checks_performed: int = 0

    def log_lines(self) -> list[str]:
        return [
            f"{r.seq} {r.direction} {r.frame_type} {r.payload_hex} {r.verdict}"
            for r in self.frames
        ]


def run_session(
    tag: Tag,
    table: ServerTable,
    channel: Channel,
    rng: random.Random,
    mode: str = PAPER,
) -> SessionTranscript:
    """Drive one full exchange through a channel, recording every frame.

    All failures land in the transcript outcome; nothing raises.
    """
    bits = table.group.word_bits
    transcript = SessionTranscript(outcome=Outcome.ABORTED)
    seq = 0

    def record(direction: str, frame: bytes | None, sent: bytes, verdict: str) -> None:
        nonlocal seq
        seq += 1
        shown = frame if frame is not None else sent
        transcript.frames.append(
            FrameRecord(seq, direction, shown[0], shown[1:].hex(), verdict)
        )

    def send(msg: Message, direction: str) -> Message | None:
        sent = encode_frame(msg, bits)
        delivered = channel.deliver(sent)
        if delivered is None:
            record(direction, None, sent, "dropped")
            return None
        out = decode_frame(delivered, bits)
        record(direction, delivered, sent, "delivered")
        return out

    msg1 = tag_begin(tag)
    transcript.msg1 = msg1
    got1 = send(msg1, TO_READER)
    if got1 is None:
        return transcript

    accepted1 = reader_on_msg1(table, got1, rng)
    if accepted1 is None:
        transcript.frames[-1].verdict = "rejected"
        transcript.outcome = Outcome.READER_REJECTED_MSG1
        return transcript
    session, msg2 = accepted1
    transcript.checks_performed = session.checks_performed
    transcript.msg2 = msg2
    got2 = send(msg2, TO_TAG)
    if got2 is None:
        return transcript

    try:
        msg3 = tag_on_msg2(tag, got2)
    except ZeroModulusError:
        transcript.frames[-1].verdict = "tag_abort"
        return transcript
    transcript.msg3 = msg3
    got3 = send(msg3, TO_READER)
    if got3 is None:
        return transcript

    msg4 = reader_on_msg3(table, session, got3, rng, mode=mode)
    if msg4 is None:
        transcript.frames[-1].verdict = "rejected"
        transcript.outcome = Outcome.READER_REJECTED_MSG3
        return transcript
    transcript.msg4 = msg4
    got4 = send(msg4, TO_TAG)
    if got4 is None:
        return transcript  # server already rotated; tag keeps its old nonce

    try:
        accepted4 = tag_on_msg4(tag, got4)
    except ZeroModulusError:
        transcript.frames[-1].verdict = "tag_abort"
        return transcript
    if not accepted4:
        transcript.frames[-1].verdict = "rejected"
        transcript.outcome = Outcome.TAG_REJECTED_MSG4
        return transcript
    transcript.outcome = Outcome.MUTUAL_SUCCESS
    return transcript
