"""Protocol engine: worked vectors, search, faults, state discipline."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupauth.groups import encode, inverse, make_group, subgroup_for_divisor
from groupauth.protocol import (
    PAPER,
    RESILIENT,
    Channel,
    DropChannel,
    FlipChannel,
    Msg1,
    Msg2,
    Msg3,
    Msg4,
    Outcome,
    Phase,
    ZeroModulusError,
    decode_frame,
    encode_frame,
    reader_on_msg1,
    reader_on_msg3,
    run_session,
    tag_begin,
    tag_on_msg2,
    tag_on_msg4,
)
from groupauth.registry import ServerRow, ServerTable, System, Tag


class ScriptedRng(random.Random):
    """Feeds a fixed nonce sequence to the reader."""

    def __new__(cls, values=()):
        return super().__new__(cls)

    def __init__(self, values):
        super().__init__(0)
        self.queue = list(values)

    def getrandbits(self, bits):
        return self.queue.pop(0)


def vector_tag():
    # consistent with n=12, order-6 subgroup, index 2: inverse encodes to 0x08
    return Tag(subgroup_id=1, index=2, inv_word=0x08, tag_id=0xC8, key=0x5A, nonce=0x2D)


def vector_table(tag):
    group = make_group(12, 8)
    subgroups = [subgroup_for_divisor(group, 6, 1), subgroup_for_divisor(group, 4, 2)]
    rows = {
        (1, 2): ServerRow(tag_id=tag.tag_id, key=tag.key, nonce_old=0, nonce_new=tag.nonce)
    }
    return ServerTable(group=group, subgroups=subgroups, rows=rows, index_cap=3)


@pytest.fixture
def desk():
    return System.provision(1024, 32, [16, 8, 4], seed=11)


class TestWorkedVectors:
    """The full L=8 message set, checked word for word."""

    def test_msg1_blind(self):
        assert tag_begin(vector_tag()).blinded_inv == 0x25

    def test_msg1_zero_nonce(self):
        tag = vector_tag()
        tag.nonce = 0x00
        assert tag_begin(tag).blinded_inv == 0x08

    def test_msg1_self_cancelling(self):
        tag = Tag(1, 2, 0x0A, 0xC8, 0x5A, nonce=0x0A)
        assert tag_begin(tag).blinded_inv == 0x00

    def test_msg2_masks(self):
        tag = vector_tag()
        table = vector_table(tag)
        result = reader_on_msg1(table, tag_begin(tag), ScriptedRng([0x64, 0x25]))
        assert result is not None
        session, msg2 = result
        assert (msg2.mask1, msg2.mask2) == (0x3E, 0x7F)
        assert session.candidates[0].matched_on == "new"

    def test_msg3_residue(self):
        tag = vector_tag()
        msg3 = tag_on_msg2(tag, Msg2(mask1=0x3E, mask2=0x7F))
        assert tag.pending_nonce1 == 0x64
        assert msg3.tag_proof == 0x25  # 172 mod 45

    def test_msg4_and_acceptance(self):
        tag = vector_tag()
        table = vector_table(tag)
        session, msg2 = reader_on_msg1(table, tag_begin(tag), ScriptedRng([0x64, 0x25]))
        msg3 = tag_on_msg2(tag, msg2)
        msg4 = reader_on_msg3(table, session, msg3, ScriptedRng([0x5B]))
        assert msg4 == Msg4(mask3=0x01, reader_proof=0x27)  # 147 mod 108
        assert tag_on_msg4(tag, msg4) is True
        assert tag.nonce == 0x5B
        row = table.rows[(1, 2)]
        assert (row.nonce_old, row.nonce_new) == (0x2D, 0x5B)

    def test_all_zeta_bit_flips_rejected_for_this_session(self):
        # eta modulus is 108 here, so no single-bit nonce error can wrap around
        for bit in range(8):
            tag = vector_tag()
            tag_on_msg2(tag, Msg2(mask1=0x3E, mask2=0x7F))
            flipped = Msg4(mask3=0x01 ^ (1 << bit), reader_proof=0x27)
            assert tag_on_msg4(tag, flipped) is False
            assert tag.nonce == 0x2D


class TestTagGuards:
    def test_zero_modulus_msg2_aborts(self):
        tag = vector_tag()
        poisoned = Msg2(mask1=0x3E, mask2=tag.key ^ tag.inv_word)  # n2 == inv
        with pytest.raises(ZeroModulusError):
            tag_on_msg2(tag, poisoned)

    def test_zero_numerator_is_fine(self):
        tag = vector_tag()
        msg3 = tag_on_msg2(tag, Msg2(mask1=tag.key ^ tag.tag_id, mask2=0x7F))
        assert msg3.tag_proof == 0  # 0 mod anything

    def test_msg4_without_pending_exchange_rejects(self):
        assert tag_on_msg4(vector_tag(), Msg4(0x01, 0x27)) is False

    def test_zero_modulus_msg4_aborts(self):
        tag = vector_tag()
        tag.pending_nonce1 = tag.inv_word  # forged pending state
        with pytest.raises(ZeroModulusError):
            tag_on_msg4(tag, Msg4(0x01, 0x00))
        assert tag.nonce == 0x2D


class TestReaderSearch:
    def test_replayed_current_blind_matches_new(self, desk):
        tag = desk.tags[0]
        result = reader_on_msg1(desk.table, tag_begin(tag), random.Random(0))
        assert result is not None
        session, _ = result
        assert len(session.candidates) == 1
        assert session.candidates[0].matched_on == "new"

    def test_exhaustive_blind_space_micro(self):
        # over all 256 possible blinds at one index: at most 2*gamma match,
        # everything else is rejected after one check per holding subgroup
        system = System.provision(12, 8, [6, 4, 3], seed=5)
        holding = sum(1 for (j, i) in system.table.rows if i == 1)
        matches = 0
        for blind in range(256):
            result = reader_on_msg1(
                system.table, Msg1(index=1, blinded_inv=blind), random.Random(blind)
            )
            if result is not None:
                session, _ = result
                matches += 1
                assert session.checks_performed == holding
            # rejection is stateless, nothing to roll back
        assert matches <= 2 * system.table.gamma

    def test_index_above_cap_rejected(self, desk):
        msg = Msg1(index=desk.table.index_cap + 1, blinded_inv=0)
        assert reader_on_msg1(desk.table, msg, random.Random(0)) is None

    def test_index_zero_rejected(self, desk):
        assert reader_on_msg1(desk.table, Msg1(0, 0), random.Random(0)) is None

    def test_search_bound(self, desk):
        rng = random.Random(2)
        for tag in desk.tags:
            result = reader_on_msg1(desk.table, tag_begin(tag), rng)
            session, _ = result
            assert session.checks_performed <= desk.table.gamma


class TestCandidateFallback:
    def build_collision_table(self):
        group = make_group(12, 8)
        h6 = subgroup_for_divisor(group, 6, 1)
        h4 = subgroup_for_divisor(group, 4, 2)
        inv1 = encode(inverse(h6, 1), group)  # 0x0A
        inv2 = encode(inverse(h4, 1), group)  # 0x09
        blind = 0x50
        rows = {
            (1, 1): ServerRow(tag_id=0x11, key=0x22, nonce_old=0, nonce_new=inv1 ^ blind),
            (2, 1): ServerRow(tag_id=0x33, key=0x44, nonce_old=0, nonce_new=inv2 ^ blind),
        }
        table = ServerTable(group=group, subgroups=[h6, h4], rows=rows, index_cap=3)
        return table, blind, inv2

    def test_second_candidate_wins_after_mismatch(self):
        table, blind, inv2 = self.build_collision_table()
        session, _msg2 = reader_on_msg1(
            table, Msg1(index=1, blinded_inv=blind), ScriptedRng([0x64, 0x25])
        )
        assert len(session.candidates) == 2
        # a proof crafted for the second row: first candidate must be skipped
        proof = (0x33 ^ 0x64) % (inv2 ^ 0x25)
        msg4 = reader_on_msg3(table, session, Msg3(proof), ScriptedRng([0x77]))
        assert session.active == 1
        assert msg4 == Msg4(mask3=0x77 ^ 0x44, reader_proof=(0x33 ^ 0x77) % (inv2 ^ 0x64))
        assert (table.rows[(1, 1)].nonce_old, table.rows[(1, 1)].nonce_new) == (0, 0x5A)
        assert (table.rows[(2, 1)].nonce_old, table.rows[(2, 1)].nonce_new) == (0x59, 0x77)

    def test_all_candidates_failing_rejects_cleanly(self):
        table, blind, _ = self.build_collision_table()
        before = {k: (r.nonce_old, r.nonce_new) for k, r in table.rows.items()}
        session, _ = reader_on_msg1(
            table, Msg1(index=1, blinded_inv=blind), ScriptedRng([0x64, 0x25])
        )
        assert reader_on_msg3(table, session, Msg3(0xFF), ScriptedRng([0x77])) is None
        assert session.phase is Phase.FAILED
        assert {k: (r.nonce_old, r.nonce_new) for k, r in table.rows.items()} == before

    def test_oversized_proof_rejected_without_update(self):
        tag = vector_tag()
        table = vector_table(tag)
        session, msg2 = reader_on_msg1(table, tag_begin(tag), ScriptedRng([0x64, 0x25]))
        tag_on_msg2(tag, msg2)
        # modulus is 0x2D = 45; 45 itself can never be a reduced residue
        assert reader_on_msg3(table, session, Msg3(45), ScriptedRng([0x5B])) is None
        assert table.rows[(1, 2)].nonce_old == 0

    def test_done_session_rejects_further_proofs(self):
        tag = vector_tag()
        table = vector_table(tag)
        session, msg2 = reader_on_msg1(table, tag_begin(tag), ScriptedRng([0x64, 0x25]))
        msg3 = tag_on_msg2(tag, msg2)
        assert reader_on_msg3(table, session, msg3, ScriptedRng([0x5B])) is not None
        assert reader_on_msg3(table, session, msg3, ScriptedRng([0x5B])) is None


class TestSessionDriver:
    def test_honest_channel_succeeds(self, desk):
        rng = random.Random(3)
        for tag in desk.tags:
            transcript = run_session(tag, desk.table, Channel(), rng)
            assert transcript.outcome is Outcome.MUTUAL_SUCCESS

    def test_repeated_sessions_stay_complete(self, desk):
        rng = random.Random(4)
        tag = desk.tags[5]
        for _ in range(100):
            assert run_session(tag, desk.table, Channel(), rng).outcome is Outcome.MUTUAL_SUCCESS

    def test_freshness_across_sessions(self, desk):
        rng = random.Random(5)
        tag = desk.tags[2]
        seen = set()
        for _ in range(200):
            t = run_session(tag, desk.table, Channel(), rng)
            tup = (t.msg1, t.msg2, t.msg3, t.msg4)
            assert tup not in seen
            seen.add(tup)

    def test_drop_msg4_rotates_server_only(self, desk):
        rng = random.Random(6)
        tag = desk.tags[0]
        nonce_before = tag.nonce
        transcript = run_session(tag, desk.table, DropChannel(4), rng)
        assert transcript.outcome is Outcome.ABORTED
        assert transcript.frames[-1].verdict == "dropped"
        row = desk.table.rows[(tag.subgroup_id, tag.index)]
        assert tag.nonce == nonce_before
        assert row.nonce_old == nonce_before  # rotation happened server-side

    def test_single_loss_recovers_next_session(self, desk):
        rng = random.Random(7)
        tag = desk.tags[1]
        run_session(tag, desk.table, DropChannel(4), rng)
        after = run_session(tag, desk.table, Channel(), rng)
        assert after.outcome is Outcome.MUTUAL_SUCCESS

    def test_double_loss_paper_mode_desyncs(self, desk):
        rng = random.Random(8)
        tag = desk.tags[2]
        run_session(tag, desk.table, DropChannel(4), rng, mode=PAPER)
        run_session(tag, desk.table, DropChannel(4), rng, mode=PAPER)
        after = run_session(tag, desk.table, Channel(), rng, mode=PAPER)
        assert after.outcome is Outcome.READER_REJECTED_MSG1

    def test_double_loss_resilient_mode_recovers(self, desk):
        rng = random.Random(9)
        tag = desk.tags[3]
        run_session(tag, desk.table, DropChannel(4), rng, mode=RESILIENT)
        run_session(tag, desk.table, DropChannel(4), rng, mode=RESILIENT)
        after = run_session(tag, desk.table, Channel(), rng, mode=RESILIENT)
        assert after.outcome is Outcome.MUTUAL_SUCCESS

    def test_resilient_tag_nonce_always_recorded(self, desk):
        # rolling nonce stays within the stored pair whatever gets dropped
        rng = random.Random(10)
        tag = desk.tags[4]
        row = desk.table.rows[(tag.subgroup_id, tag.index)]
        channels = [Channel(), DropChannel(4), DropChannel(4), Channel(), DropChannel(4)]
        for channel in channels * 4:
            run_session(tag, desk.table, channel, rng, mode=RESILIENT)
            assert tag.nonce in (row.nonce_old, row.nonce_new)

    def test_flip_msg3_rejected_without_update(self, desk):
        rng = random.Random(11)
        tag = desk.tags[0]
        row = desk.table.rows[(tag.subgroup_id, tag.index)]
        before = (row.nonce_old, row.nonce_new, tag.nonce)
        transcript = run_session(tag, desk.table, FlipChannel(3, 0), rng)
        assert transcript.outcome is Outcome.READER_REJECTED_MSG3
        assert (row.nonce_old, row.nonce_new, tag.nonce) == before

    def test_transcript_log_shape(self, desk):
        rng = random.Random(12)
        transcript = run_session(desk.tags[0], desk.table, Channel(), rng)
        lines = transcript.log_lines()
        assert len(lines) == 4
        for seq, line in enumerate(lines, start=1):
            fields = line.split()
            assert len(fields) == 5
            assert int(fields[0]) == seq
            assert fields[1] in ("T>R", "R>T")
            assert fields[2] in ("1", "2", "3", "4")
            int(fields[3], 16)


class TestWireFormat:
    def test_msg1_layout(self):
        frame = encode_frame(Msg1(index=7, blinded_inv=0xAB), word_bits=8)
        assert frame == bytes([1, 0, 0, 0, 7, 0xAB])

    def test_msg4_layout_32bit(self):
        frame = encode_frame(Msg4(mask3=0x01020304, reader_proof=0x05060708), 32)
        assert frame == bytes([4, 1, 2, 3, 4, 5, 6, 7, 8])

    @given(
        word_bits=st.sampled_from([8, 16, 32, 64]),
        index=st.integers(min_value=0, max_value=2**32 - 1),
        data=st.data(),
    )
    @settings(max_examples=100)
    def test_round_trip_every_type(self, word_bits, index, data):
        word = st.integers(min_value=0, max_value=2**word_bits - 1)
        msgs = [
            Msg1(index, data.draw(word)),
            Msg2(data.draw(word), data.draw(word)),
            Msg3(data.draw(word)),
            Msg4(data.draw(word), data.draw(word)),
        ]
        for msg in msgs:
            assert decode_frame(encode_frame(msg, word_bits), word_bits) == msg

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError):
            encode_frame(Msg3(0), word_bits=12)

    def test_truncated_frame_rejected(self):
        with pytest.raises(ValueError):
            decode_frame(bytes([2, 0x01]), word_bits=8)

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError):
            decode_frame(bytes([9, 0]), word_bits=8)


class TestXorMasking:
    @given(
        key=st.integers(min_value=0, max_value=2**32 - 1),
        value=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_round_trip(self, key, value):
        assert (value ^ key) ^ key == value
