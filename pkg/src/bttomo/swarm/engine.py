"""Event-driven fluid simulation of one synchronized BitTorrent broadcast.

Fragments move as fluid transfers at the current max-min fair rate of their
connection. Events are fragment completions and periodic rechokes; between
events every rate is constant. Rates are recomputed only when the set of
transferring connections changes, since a connection that moves straight on
to its next fragment keeps its share.

Connection life cycle: node ``s`` holds up to ``max_parallel_uploads`` upload
slots. A slot holds an unchoked peer; it transfers while the peer has a
requestable fragment and idles otherwise. A peer that stops being interested
is choked at once. A freed regular slot goes to the waiting interested peer
with the best reciprocation score (random among equals), a freed optimistic
slot to a random waiting peer. At every fragment boundary a regular slot is
also given up when enough waiting peers strictly outrank its holder. Every
``unchoke_period`` all slots are re-decided from scratch and the scores
decay by half. A choked transfer loses its partial fragment.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..topology import PhysicalTopology
from .choke import choose_unchoked
from .config import SwarmConfig, TransferLedger
from .peers import peer_graph
from .pieces import HAVE, INFLIGHT, PLANES, availability, count_up, ctz, rarest_words
from .rates import check_capacity, max_min_kernel
from .rng import node_streams, randbelow


class SimulationError(RuntimeError):
    pass


class _State(NamedTuple):
    plist: np.ndarray  # (n, maxdeg) peer ids ascending, -1 padded
    deg: np.ndarray
    route: np.ndarray
    route_len: np.ndarray
    flow_cap: np.ndarray
    capacity: np.ndarray
    bits: np.ndarray  # (n, W, PLANES + P) node blocks, see pieces
    nhave: np.ndarray
    word_idx: np.ndarray  # scratch for rarest_words
    word_mask: np.ndarray
    acq_log: np.ndarray  # (n, F) fragments in the order each node got them
    tie: np.ndarray  # (n * U, F) cached rarest candidates of each slot
    tie_len: np.ndarray  # (n, U) live prefix of tie, -1 when stale
    tie_least: np.ndarray  # their count
    tie_pos: np.ndarray  # sender's acq_log position the cache has seen
    nfrag: np.ndarray  # [file_size_fragments]
    interest: np.ndarray  # interest[r, s] = |have[s] \ have[r]|
    slot_recv: np.ndarray  # (n, U) receiver or -1
    slot_frag: np.ndarray  # fragment in flight or -1 (idle)
    slot_rate: np.ndarray
    slot_rem: np.ndarray  # bits left as of slot_t
    slot_t: np.ndarray
    slot_finish: np.ndarray
    slot_of: np.ndarray  # slot_of[s, r] = slot index or -1
    counts: np.ndarray
    completion: np.ndarray
    states: np.ndarray
    retry: np.ndarray
    retry_flag: np.ndarray
    fillq: np.ndarray
    fill_flag: np.ndarray
    slot_opt: np.ndarray  # (n, U) slot is an optimistic unchoke
    recent: np.ndarray  # recent[s, r] fragments s sent r, halved every rechoke
    cand: np.ndarray  # scratch for _fill
    score: np.ndarray
    ints: np.ndarray  # [done, dirty, n_retry, n_fill, events, recomputes, rechokes, optimistic slots]


_DONE, _DIRTY, _NRETRY, _NFILL, _EVENTS, _RECOMPUTES, _RECHOKES, _NOPT = range(8)


@njit(cache=True, inline="always")
def _push_retry(st, s, k):
    idx = s * st.slot_recv.shape[1] + k
    if not st.retry_flag[idx]:
        st.retry_flag[idx] = True
        st.retry[st.ints[_NRETRY]] = idx
        st.ints[_NRETRY] += 1


@njit(cache=True, inline="always")
def _push_fill(st, s):
    if not st.fill_flag[s]:
        st.fill_flag[s] = True
        st.fillq[st.ints[_NFILL]] = s
        st.ints[_NFILL] += 1


@njit(cache=True, inline="always")
def _requestable(st, r, g):
    w = g >> 6
    return (st.bits[r, w, HAVE] | st.bits[r, w, INFLIGHT]) & (np.uint64(1) << np.uint64(g & 63)) == 0


@njit(cache=True)
def _pick(st, s, k):
    """Rarest-first choice for slot ``(s, k)``, uniform among ties.

    Each slot caches the tie set of its last full scan and samples from it by
    rejection. This stays exact because counts only grow and the receiver never
    loses a fragment, so a stale entry can be dropped for good. The sender's
    newer fragments are folded in from its log, and a fragment released by a
    choke marks the receiver's caches stale.
    """
    r = st.slot_recv[s, k]
    row = s * st.slot_recv.shape[1] + k
    blk = st.bits[r]
    n = st.tie_len[s, k]
    least = st.tie_least[s, k]
    if n >= 0:
        for j in range(st.tie_pos[s, k], st.nhave[s]):
            g = st.acq_log[s, j]
            if _requestable(st, r, g):
                a = availability(blk, g)
                if a < least:
                    n = -1
                    break
                if a == least:
                    st.tie[row, n] = g
                    n += 1
        while n > 0:
            i = randbelow(st.states, r, n)
            g = st.tie[row, i]
            n -= 1
            st.tie[row, i] = st.tie[row, n]
            if _requestable(st, r, g) and availability(blk, g) == least:
                st.tie_len[s, k] = n
                st.tie_pos[s, k] = st.nhave[s]
                return g
    m, least = rarest_words(blk, st.bits[s], st.word_idx, st.word_mask)
    n = 0
    for i in range(m):
        x = st.word_mask[i]
        base = st.word_idx[i] << 6
        while x:
            st.tie[row, n] = base + ctz(x)
            n += 1
            x &= x - np.uint64(1)
    if n == 0:
        st.tie_len[s, k] = -1
        return -1
    i = randbelow(st.states, r, n)
    g = st.tie[row, i]
    n -= 1
    st.tie[row, i] = st.tie[row, n]
    st.tie_len[s, k] = n
    st.tie_least[s, k] = least
    st.tie_pos[s, k] = st.nhave[s]
    return g


@njit(cache=True, inline="always")
def _try_start(st, s, k, t, frag_bits):
    """Request the next fragment on slot ``(s, k)``; idle the slot if none."""
    g = _pick(st, s, k)
    if g < 0:
        if st.slot_frag[s, k] >= 0 or st.slot_rate[s, k] > 0.0:
            st.ints[_DIRTY] = 1
        st.slot_frag[s, k] = -1
        st.slot_rate[s, k] = 0.0
        st.slot_finish[s, k] = np.inf
        return False
    st.slot_frag[s, k] = g
    st.bits[st.slot_recv[s, k], g >> 6, INFLIGHT] |= np.uint64(1) << np.uint64(g & 63)
    st.slot_rem[s, k] = frag_bits
    st.slot_t[s, k] = t
    if st.slot_rate[s, k] > 0.0:
        st.slot_finish[s, k] = t + frag_bits / st.slot_rate[s, k]
    else:
        st.slot_finish[s, k] = np.inf
        st.ints[_DIRTY] = 1
    return True


@njit(cache=True, inline="always")
def _choke(st, s, k):
    r = st.slot_recv[s, k]
    g = st.slot_frag[s, k]
    st.slot_recv[s, k] = -1
    st.slot_of[s, r] = -1
    st.slot_frag[s, k] = -1
    st.slot_rate[s, k] = 0.0
    st.slot_finish[s, k] = np.inf
    if g >= 0:
        st.bits[r, g >> 6, INFLIGHT] &= ~(np.uint64(1) << np.uint64(g & 63))
        st.ints[_DIRTY] = 1
        # the abandoned fragment is requestable again on r's idle connections
        for j in range(st.deg[r]):
            q = st.plist[r, j]
            k2 = st.slot_of[q, r]
            if k2 >= 0:
                st.tie_len[q, k2] = -1
                if st.slot_frag[q, k2] < 0:
                    _push_retry(st, q, k2)


@njit(cache=True, inline="always")
def _unchoke(st, s, r, t, frag_bits):
    for k in range(st.slot_recv.shape[1]):
        if st.slot_recv[s, k] < 0:
            st.slot_recv[s, k] = r
            st.slot_of[s, r] = k
            st.slot_rate[s, k] = 0.0
            st.slot_opt[s, k] = False
            st.tie_len[s, k] = -1
            _try_start(st, s, k, t, frag_bits)
            return
    raise AssertionError("no free upload slot")


@njit(cache=True, inline="always")
def _acquire(st, r, f, t, nfrag):
    w = f >> 6
    mask = np.uint64(1) << np.uint64(f & 63)
    st.bits[r, w, HAVE] |= mask
    st.bits[r, w, INFLIGHT] &= ~mask
    st.acq_log[r, st.nhave[r]] = f
    st.nhave[r] += 1
    for j in range(st.deg[r]):
        p = st.plist[r, j]
        if st.bits[p, w, HAVE] & mask == 0:
            count_up(st.bits[p], w, mask)
            st.interest[p, r] += 1
            if st.interest[p, r] == 1:
                _push_fill(st, r)
            k2 = st.slot_of[r, p]
            if k2 >= 0 and st.slot_frag[r, k2] < 0:
                _push_retry(st, r, k2)
        else:
            st.interest[r, p] -= 1
            if st.interest[r, p] == 0:
                k2 = st.slot_of[p, r]
                if k2 >= 0:
                    _choke(st, p, k2)
                    _push_fill(st, p)
    if st.nhave[r] == nfrag:
        st.completion[r] = t
        st.ints[_DONE] += 1


@njit(cache=True, inline="always")
def _score(st, s, p, seeding):
    return st.recent[s, p] if seeding else st.recent[p, s]


@njit(cache=True)
def _outranked(st, s, r):
    """Whether enough waiting peers beat ``r`` to claim every regular slot."""
    seeding = st.nhave[s] == st.nfrag[0]
    mine = _score(st, s, r, seeding)
    need = st.slot_recv.shape[1] - st.ints[_NOPT]
    for j in range(st.deg[s]):
        p = st.plist[s, j]
        if st.interest[p, s] > 0 and st.slot_of[s, p] < 0 and _score(st, s, p, seeding) > mine:
            need -= 1
            if need == 0:
                return True
    return False


@njit(cache=True)
def _fill(st, s, t, frag_bits):
    """Give the free slots of ``s`` to waiting interested peers.

    Free regular slots go to the best recent reciprocation (ties uniformly at
    random); a free optimistic slot goes to a random waiting peer.
    """
    n_slots = st.slot_recv.shape[1]
    n_opt = st.ints[_NOPT]
    busy_reg = 0
    busy_opt = 0
    for k in range(n_slots):
        if st.slot_recv[s, k] >= 0:
            if st.slot_opt[s, k]:
                busy_opt += 1
            else:
                busy_reg += 1
    if busy_reg + busy_opt == n_slots:
        return
    seeding = st.nhave[s] == st.nfrag[0]
    m = 0
    for j in range(st.deg[s]):
        p = st.plist[s, j]
        if st.interest[p, s] > 0 and st.slot_of[s, p] < 0:
            st.cand[m] = p
            st.score[m] = _score(st, s, p, seeding)
            m += 1
    # regular slots: repeated best pick, reservoir tie-break
    while busy_reg < n_slots - n_opt and m > 0:
        b = 0
        ties = 1
        for c in range(1, m):
            if st.score[c] > st.score[b]:
                b = c
                ties = 1
            elif st.score[c] == st.score[b]:
                ties += 1
                if randbelow(st.states, s, ties) == 0:
                    b = c
        r = st.cand[b]
        m -= 1
        st.cand[b] = st.cand[m]
        st.score[b] = st.score[m]
        _unchoke(st, s, r, t, frag_bits)
        busy_reg += 1
    while busy_opt < n_opt and m > 0:
        b = randbelow(st.states, s, m)
        r = st.cand[b]
        m -= 1
        st.cand[b] = st.cand[m]
        st.score[b] = st.score[m]
        _unchoke(st, s, r, t, frag_bits)
        st.slot_opt[s, st.slot_of[s, r]] = True
        busy_opt += 1


@njit(cache=True)
def _drain(st, t, frag_bits):
    n_slots = st.slot_recv.shape[1]
    while st.ints[_NRETRY] > 0 or st.ints[_NFILL] > 0:
        i = 0
        while i < st.ints[_NRETRY]:
            idx = st.retry[i]
            st.retry_flag[idx] = False
            i += 1
            s = idx // n_slots
            k = idx % n_slots
            r = st.slot_recv[s, k]
            if r < 0 or st.slot_frag[s, k] >= 0:
                continue
            if st.interest[r, s] == 0:
                _choke(st, s, k)
                _push_fill(st, s)
            else:
                _try_start(st, s, k, t, frag_bits)
        st.ints[_NRETRY] = 0
        i = 0
        while i < st.ints[_NFILL]:
            s = st.fillq[i]
            st.fill_flag[s] = False
            i += 1
            _fill(st, s, t, frag_bits)
        st.ints[_NFILL] = 0


@njit(cache=True)
def _recompute(st, t):
    n, n_slots = st.slot_recv.shape
    nf = 0
    for s in range(n):
        for k in range(n_slots):
            if st.slot_frag[s, k] >= 0:
                nf += 1
    width = st.route.shape[2]
    routes = np.empty((nf, width), dtype=np.int32)
    lens = np.empty(nf, dtype=np.int32)
    caps = np.empty(nf)
    ids = np.empty(nf, dtype=np.int64)
    i = 0
    for s in range(n):
        for k in range(n_slots):
            if st.slot_frag[s, k] >= 0:
                r = st.slot_recv[s, k]
                if st.slot_rate[s, k] > 0.0:
                    rem = st.slot_rem[s, k] - st.slot_rate[s, k] * (t - st.slot_t[s, k])
                    st.slot_rem[s, k] = max(rem, 0.0)
                st.slot_t[s, k] = t
                routes[i] = st.route[s, r]
                lens[i] = st.route_len[s, r]
                caps[i] = st.flow_cap[s, r]
                ids[i] = s * n_slots + k
                i += 1
    rate = max_min_kernel(routes, lens, caps, st.capacity)
    if check_capacity(routes, lens, rate, st.capacity) >= 0:
        raise AssertionError("link capacity exceeded")
    for i in range(nf):
        s = ids[i] // n_slots
        k = ids[i] % n_slots
        st.slot_rate[s, k] = rate[i]
        st.slot_finish[s, k] = t + st.slot_rem[s, k] / rate[i]
    st.ints[_DIRTY] = 0
    st.ints[_RECOMPUTES] += 1


@njit(cache=True)
def _rechoke(st, t, n_opt, frag_bits):
    n, n_slots = st.slot_recv.shape
    nfrag = st.nfrag[0]
    for s in range(n):
        cand = np.empty(st.deg[s], dtype=np.int64)
        score = np.empty(st.deg[s])
        m = 0
        seeding = st.nhave[s] == nfrag
        for j in range(st.deg[s]):
            p = st.plist[s, j]
            if st.interest[p, s] > 0:
                cand[m] = p
                score[m] = st.recent[s, p] if seeding else st.recent[p, s]
                m += 1
        chosen = choose_unchoked(cand[:m], score[:m], n_slots, n_opt, st.states, s)
        for k in range(n_slots):
            r = st.slot_recv[s, k]
            if r >= 0:
                keep = False
                for x in chosen:
                    if x == r:
                        keep = True
                if not keep:
                    _choke(st, s, k)
        regular = min(n_slots - n_opt, m)
        for i in range(chosen.shape[0]):
            r = chosen[i]
            if st.slot_of[s, r] < 0:
                _unchoke(st, s, r, t, frag_bits)
            st.slot_opt[s, st.slot_of[s, r]] = i >= regular
    st.recent[:, :] >>= 1
    st.ints[_RECHOKES] += 1
    _drain(st, t, frag_bits)


@njit(cache=True)
def _run(st, root, nfrag, frag_bits, n_opt, period, max_idle_rounds):
    n, n_slots = st.slot_recv.shape
    t = 0.0
    _rechoke(st, t, n_opt, frag_bits)
    next_choke = period
    idle_rounds = 0
    while st.ints[_DONE] < n:
        if st.ints[_DIRTY]:
            _recompute(st, t)
        best = np.inf
        bs = -1
        bk = -1
        for s in range(n):
            for k in range(n_slots):
                if st.slot_finish[s, k] < best:
                    best = st.slot_finish[s, k]
                    bs = s
                    bk = k
        if next_choke <= best:
            t = next_choke
            next_choke += period
            _rechoke(st, t, n_opt, frag_bits)
            idle_rounds += 1
            if idle_rounds > max_idle_rounds:
                return False
            continue
        idle_rounds = 0
        t = best
        r = st.slot_recv[bs, bk]
        f = st.slot_frag[bs, bk]
        st.counts[bs, r] += 1
        st.recent[bs, r] += 1
        st.ints[_EVENTS] += 1
        st.slot_frag[bs, bk] = -1
        _acquire(st, r, f, t, nfrag)
        if st.slot_recv[bs, bk] == r:
            if st.interest[r, bs] == 0 or (not st.slot_opt[bs, bk] and _outranked(st, bs, r)):
                _choke(st, bs, bk)
                st.ints[_DIRTY] = 1
                _push_fill(st, bs)
            else:
                _try_start(st, bs, bk, t, frag_bits)
        else:
            st.ints[_DIRTY] = 1
        _drain(st, t, frag_bits)
    return True


def _initial_state(topology: PhysicalTopology, config: SwarmConfig) -> _State:
    n = topology.n
    nfrag = config.file_size_fragments
    nw = (nfrag + 63) // 64
    states = node_streams(config.rng_seed, n)
    adj = peer_graph(n, config.max_peer_set, states)
    deg = adj.sum(axis=1).astype(np.int64)
    maxdeg = int(deg.max())
    plist = np.full((n, maxdeg), -1, dtype=np.int64)
    for v in range(n):
        peers = np.flatnonzero(adj[v])
        plist[v, : len(peers)] = peers
    capacity, route, route_len, flow_cap = topology.channel_table

    full = np.zeros(nw, dtype=np.uint64)
    full[: nfrag // 64] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if nfrag % 64:
        full[nfrag // 64] = np.uint64((1 << (nfrag % 64)) - 1)

    root = config.root
    bits = np.zeros((n, nw, PLANES + max(maxdeg.bit_length(), 1)), dtype=np.uint64)
    bits[root, :, HAVE] = full
    nhave = np.zeros(n, dtype=np.int64)
    nhave[root] = nfrag
    interest = np.zeros((n, n), dtype=np.int32)
    for v in range(n):
        if v != root and adj[v, root]:
            bits[v, :, PLANES] = full
            interest[v, root] = nfrag
    n_slots = config.max_parallel_uploads
    completion = np.full(n, np.nan)
    completion[root] = 0.0
    ints = np.zeros(8, dtype=np.int64)
    ints[_DONE] = 1
    ints[_NOPT] = config.optimistic_slots
    return _State(
        plist=plist,
        deg=deg,
        route=np.ascontiguousarray(route),
        route_len=np.ascontiguousarray(route_len),
        flow_cap=np.ascontiguousarray(flow_cap),
        capacity=capacity.copy(),
        bits=bits,
        nhave=nhave,
        word_idx=np.zeros(nw, dtype=np.int64),
        word_mask=np.zeros(nw, dtype=np.uint64),
        acq_log=np.zeros((n, nfrag), dtype=np.int32),
        tie=np.zeros((n * n_slots, nfrag), dtype=np.int32),
        tie_len=np.full((n, n_slots), -1, dtype=np.int64),
        tie_least=np.zeros((n, n_slots), dtype=np.int64),
        tie_pos=np.zeros((n, n_slots), dtype=np.int64),
        nfrag=np.array([nfrag], dtype=np.int64),
        interest=interest,
        slot_recv=np.full((n, n_slots), -1, dtype=np.int64),
        slot_frag=np.full((n, n_slots), -1, dtype=np.int64),
        slot_rate=np.zeros((n, n_slots)),
        slot_rem=np.zeros((n, n_slots)),
        slot_t=np.zeros((n, n_slots)),
        slot_finish=np.full((n, n_slots), np.inf),
        slot_of=np.full((n, n), -1, dtype=np.int64),
        counts=np.zeros((n, n), dtype=np.int64),
        recent=np.zeros((n, n), dtype=np.int64),
        slot_opt=np.zeros((n, n_slots), dtype=np.bool_),
        cand=np.zeros(maxdeg, dtype=np.int64),
        score=np.zeros(maxdeg, dtype=np.int64),
        completion=completion,
        states=states,
        retry=np.zeros(n * n_slots, dtype=np.int64),
        retry_flag=np.zeros(n * n_slots, dtype=np.bool_),
        fillq=np.zeros(n, dtype=np.int64),
        fill_flag=np.zeros(n, dtype=np.bool_),
        ints=ints,
    )


def run_broadcast(topology: PhysicalTopology, config: SwarmConfig) -> TransferLedger:
    """Simulate one broadcast from ``config.root`` until every node has the file."""
    if not 0 <= config.root < topology.n:
        raise ValueError(f"root {config.root} is not a node of a {topology.n}-node topology")
    st = _initial_state(topology, config)
    ok = _run(
        st,
        config.root,
        config.file_size_fragments,
        config.fragment_bits,
        config.optimistic_slots,
        float(config.unchoke_period),
        1000,
    )
    if not ok:
        raise SimulationError("broadcast stalled: no transfer progress over 1000 rechoke periods")
    ints = st.ints
    stats = {
        "events": int(ints[_EVENTS]),
        "rate_recomputes": int(ints[_RECOMPUTES]),
        "rechokes": int(ints[_RECHOKES]),
    }
    return TransferLedger(st.counts, st.completion, config.file_size_fragments, config.root, stats)
