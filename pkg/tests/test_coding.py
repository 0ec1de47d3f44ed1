import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from delaycode.coding import (
    BitQueue, BlockCodebook, GroupAlphabet, MalformedCodeword, PrefixCode, TruncatedCodeword,
    UniversalCode, block_baseline, codebook_for, fifo_block_schedule, is_prefix_free, kraft_sum,
    otp_inverse, otp_transform, pack_bits, read_bitstream, stream_decode, stream_encode,
    ternary_prefix_code, unpack_bits, write_bitstream,
)
from delaycode.coding.universal import multinomial, rank_permutation, unrank_permutation
from delaycode.exponents import block_upper
from delaycode.queue_analysis import backlog_threshold
from delaycode.source_model import EmpiricalType, conditional_entropy, entropy, ternary_source

P_S = ternary_source(0.65)
A, B, C = 0, 1, 2


# -- prefix code -----------------------------------------------------------------


def test_ternary_code_table():
    code = ternary_prefix_code()
    assert code.encode((A, A)) == "0"
    assert code.encode((C, B)) == "1110"
    assert code.kraft() == 1
    assert len(code.codebook) == 9
    assert is_prefix_free(list(code.codebook.values()))


def test_ternary_round_trip_exhaustive():
    code = ternary_prefix_code()
    for block in itertools.product(range(3), repeat=2):
        assert code.decode(code.encode(block)) == [block]
    stream = "".join(code.encode(b) for b in itertools.product(range(3), repeat=2))
    assert code.decode(stream) == list(itertools.product(range(3), repeat=2))


def test_prefix_code_validation():
    with pytest.raises(ValueError):
        PrefixCode(2, 1, {(0,): "0", (1,): "01"})  # not prefix-free
    with pytest.raises(ValueError):
        PrefixCode(2, 1, {(0,): "0"})  # not total
    assert kraft_sum([1, 2, 2]) == 1


def test_prefix_truncation():
    code = ternary_prefix_code()
    with pytest.raises(TruncatedCodeword):
        code.read("10", 0)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="01", max_size=40))
def test_prefix_fuzz(bits):
    code = ternary_prefix_code()
    try:
        blocks = code.decode(bits)
    except MalformedCodeword:
        return
    assert "".join(code.encode(b) for b in blocks) == bits


# -- universal code ---------------------------------------------------------------


def test_permutation_rank_bijection():
    counts = [2, 1, 1]
    seen = set()
    for perm in set(itertools.permutations([0, 0, 1, 2])):
        r = rank_permutation(perm, 3)
        assert unrank_permutation(r, counts) == list(perm)
        seen.add(r)
    assert seen == set(range(multinomial(counts)))


def test_universal_round_trip_exhaustive():
    code = UniversalCode(2, 2, 2)
    for x in itertools.product(range(2), repeat=2):
        for y in itertools.product(range(2), repeat=2):
            assert code.decode(code.encode(x, y), y) == x


def test_universal_conditional_stage_sizes():
    code = UniversalCode(2, 2, 2)
    # Class of x=(0,1) given y=(0,0) has two members: one index bit.
    assert len(code.encode((0, 1), (0, 0))) == 1 + code.type_width + 1
    # x determined by its type given y: no index bits.
    assert len(code.encode((1, 0), (1, 0))) == 1 + code.type_width
    assert code.type_width == math.ceil(math.log2(3 ** 4))


def test_universal_length_bounds_random():
    rng = np.random.default_rng(5)
    code = UniversalCode(2, 2, 64)
    for _ in range(1000):
        x, y = rng.integers(0, 2, 64), rng.integers(0, 2, 64)
        lo, hi = code.length_bounds(x, y)
        n = len(code.encode(x, y))
        assert lo - 1e-9 <= n <= hi + 1e-9
        h = EmpiricalType.of(x, y, 2, 2).conditional_entropy()
        assert code.epsilon_bound() == pytest.approx((2 + 4 * math.log2(65)) / 64)
        assert lo == pytest.approx(64 * h)


def test_universal_errors():
    code = UniversalCode(2, 2, 4)
    y = (0, 1, 0, 1)
    word = code.encode((1, 1, 0, 0), y)
    with pytest.raises(TruncatedCodeword):
        code.decode(word[:-1], y)
    with pytest.raises(MalformedCodeword):
        code.decode("0" + word[1:], y)
    with pytest.raises(MalformedCodeword):
        code.decode(word + "0", y)
    with pytest.raises(MalformedCodeword):
        code.decode(word, (0, 0, 0, 0))  # inconsistent with the side-information


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="01", min_size=1, max_size=60), st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_universal_fuzz(bits, y):
    code = UniversalCode(2, 2, 4)
    try:
        x = code.decode(bits, y)
    except MalformedCodeword:
        return
    assert code.encode(x, y) == bits


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.data())
def test_universal_round_trip_random(n, data):
    x = data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    y = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    code = UniversalCode(3, 2, n)
    assert code.decode(code.encode(x, y), y) == tuple(x)


# -- streaming -------------------------------------------------------------------


def test_bit_queue_fifo_and_conservation():
    q = BitQueue()
    q.push("101", 0)
    q.push("11", 1)
    bits, tags = q.drain(4)
    assert bits == "1011" and tags == [0, 0, 0, 1]
    bits, tags = q.drain(3)
    assert bits == "100" and tags == [1, -1, -1]
    assert q.drained == q.enqueued + q.filler


def test_all_aa_stream():
    code = ternary_prefix_code()
    x = [A] * 200
    bits, trace = stream_encode(x, code, (3, 2))
    assert trace.queue_at_block.max() <= 1
    assert trace.delay.max() <= 2 + math.ceil(2 / 1.5)
    out, times = stream_decode(bits, code, (3, 2), len(x))
    assert out == x and np.array_equal(times, trace.decoded_at)


@pytest.mark.parametrize("seed", range(5))
def test_stream_round_trip_and_queue_law(seed):
    rng = np.random.default_rng(seed)
    code = ternary_prefix_code()
    x = rng.choice(3, size=600, p=P_S.probs).tolist()
    bits, trace = stream_encode(x, code, (3, 2))
    out, times = stream_decode(bits, code, (3, 2), len(x))
    assert out == x and np.array_equal(times, trace.decoded_at)
    lengths = np.array([code.length(x[k:k + 2]) for k in range(0, len(x), 2)])
    backlog = trace.queue_at_block
    # L' = max(L + l - 3, 0) at block boundaries.
    assert np.array_equal(backlog[1:], np.maximum(backlog[:-1] + lengths[:-1] - 3, 0))
    fast_backlog, finish = fifo_block_schedule(lengths, 2, (3, 2))
    assert np.array_equal(fast_backlog, backlog)
    assert np.array_equal(np.repeat(finish, 2), trace.decoded_at)
    # Delay law: the pair is on time iff L + l <= floor(3(Delta-1)/2).
    for delta in range(3, 16, 2):
        late = trace.errors_at(delta).reshape(-1, 2)
        predicted = backlog + lengths > backlog_threshold(delta)
        assert np.array_equal(late[:, 0], predicted)
        assert np.array_equal(late[:, 1], predicted)


def test_stream_conservation_and_order():
    rng = np.random.default_rng(11)
    code = ternary_prefix_code()
    x = rng.choice(3, size=300, p=P_S.probs).tolist()
    bits, _ = stream_encode(x, code, (3, 2))
    words = "".join(code.encode(x[k:k + 2]) for k in range(0, len(x), 2))
    # Data bits appear in order; what is left over is filler.
    assert len(bits) >= len(words)
    assert len(bits) % 3 == 0


def test_universal_stream_round_trip():
    rng = np.random.default_rng(2)
    code = UniversalCode(2, 2, 8)
    x, y = rng.integers(0, 2, 160).tolist(), rng.integers(0, 2, 160).tolist()
    bits, trace = stream_encode(x, code, (7, 4), y=y)
    out, times = stream_decode(bits, code, (7, 4), 160, y)
    assert out == x and np.array_equal(times, trace.decoded_at)
    assert np.all(trace.delay >= 0)


def test_trace_csv():
    _, trace = stream_encode([A, A, B, C], ternary_prefix_code(), (3, 2))
    lines = trace.to_csv().splitlines()
    assert lines[0] == "symbol_index,decode_delay,correct"
    assert len(lines) == 5


def test_stream_length_checks():
    with pytest.raises(ValueError):
        stream_encode([A, A, A], ternary_prefix_code(), (3, 2))
    with pytest.raises(ValueError):
        fifo_block_schedule([1, 4], 2, (3, 4))


# -- block baseline ----------------------------------------------------------------


def test_baseline_full_rate_is_error_free():
    rng = np.random.default_rng(0)
    x = rng.choice(3, size=300, p=P_S.probs)
    trace = block_baseline(x, 6, (2, 1), P_S)
    assert not trace.errors_at(6).any()
    assert codebook_for(P_S, 6, (2, 1)).symbol_error_probability() == 0.0


def test_baseline_single_symbol_blocks():
    # One symbol, one bit: only the two most probable symbols are covered.
    book = codebook_for(P_S, 2, (3, 2))
    assert book.bits == 1
    assert book.symbol_error_probability() == pytest.approx(0.175, abs=1e-12)


def test_baseline_codebook_order_and_round_trip():
    book = BlockCodebook(P_S.probs, 4, 5)
    seen = set()
    for idx in range(book.size):
        block = book.decode(idx)
        assert book.encode(block) == idx
        seen.add(block)
    assert len(seen) == book.size
    probs = [np.prod(P_S.probs[list(book.decode(i))]) for i in range(book.size)]
    assert all(a >= b - 1e-15 for a, b in zip(probs, probs[1:]))


def test_baseline_exact_error_matches_simulation():
    rng = np.random.default_rng(4)
    x = rng.choice(3, size=6 * 20000, p=P_S.probs)
    trace = block_baseline(x, 12, (3, 2), P_S)
    exact = codebook_for(P_S, 12, (3, 2)).symbol_error_probability()
    assert trace.errors_at(12).mean() == pytest.approx(exact, abs=4 * math.sqrt(exact / len(x)) * 3)
    assert trace.delay.max() <= 12


def _slope(deltas):
    pe = [codebook_for(P_S, d, (3, 2)).symbol_error_probability() for d in deltas]
    return -np.polyfit(deltas, np.log2(pe), 1)[0]


@pytest.mark.xfail(strict=True, reason="finite-delay slope on [40, 100] is 34% above E/2; "
                   "convergence is O(log(delta)/delta)")
def test_baseline_slope_short_window():
    target = block_upper(P_S, 1.5) / 2
    assert _slope(np.arange(40, 101, 2)) == pytest.approx(target, rel=0.15)


@pytest.mark.slow
def test_baseline_slope_converges():
    target = block_upper(P_S, 1.5) / 2
    s_mid = _slope(np.arange(100, 201, 10))
    s_far = _slope(np.arange(400, 801, 50))
    assert abs(s_far / target - 1) < abs(s_mid / target - 1)
    assert s_far == pytest.approx(target, rel=0.08)


# -- one-time pad --------------------------------------------------------------------


def test_otp_identity_and_inverse():
    g = GroupAlphabet(3)
    rng = np.random.default_rng(0)
    s = rng.integers(0, 3, 100)
    assert np.array_equal(otp_transform(s, np.zeros(100, dtype=int), g), s)
    key = rng.integers(0, 3, 100)
    assert np.array_equal(otp_inverse(otp_transform(s, key, g), key, g), s)
    with pytest.raises(ValueError):
        otp_transform(s, key[:-1], g)
    with pytest.raises(ValueError):
        otp_transform([3], [0], g)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9), st.integers(0, 8), st.integers(0, 8), st.integers(0, 8))
def test_group_axioms(m, a, b, c):
    g = GroupAlphabet(m)
    a, b, c = a % m, b % m, c % m
    assert g.sub(g.add(a, b), b) == a
    assert g.add(g.add(a, b), c) == g.add(a, g.add(b, c))
    assert g.add(a, g.neg(a)) == 0


def test_otp_statistics():
    rng = np.random.default_rng(3)
    n = 1_000_000
    g = GroupAlphabet(3)
    s = rng.choice(3, size=n, p=P_S.probs)
    key = rng.integers(0, 3, n)
    x = otp_transform(s, key, g)
    counts = np.bincount(x, minlength=3)
    assert stats.chisquare(counts).pvalue > 0.05
    h_xy = EmpiricalType.of(x, key, 3, 3).conditional_entropy()
    assert h_xy == pytest.approx(entropy(P_S.probs), abs=1e-2)


# -- bit I/O ---------------------------------------------------------------------


def test_pack_msb_first():
    assert pack_bits("1") == b"\x80"
    assert pack_bits("0000000110") == b"\x01\x80"
    assert unpack_bits(b"\x01\x80", 10) == "0000000110"


def test_bitstream_file_round_trip(tmp_path):
    code = ternary_prefix_code()
    x = [A, B, C, C, A, A]
    bits, _ = stream_encode(x, code, (3, 2))
    path = tmp_path / "s.bin"
    header = write_bitstream(path, bits, (3, 2), code.block_len, code.code_id, len(x))
    back, hdr = read_bitstream(path)
    assert back == bits and hdr == header
    assert {"rate_num", "rate_den", "block_len", "code_id"} <= set(hdr)
    out, _ = stream_decode(back, code, (hdr["rate_num"], hdr["rate_den"]), hdr["n_symbols"])
    assert out == x
