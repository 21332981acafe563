"""Fragment bitsets and rarest-first fragment selection.

Fragments are packed 64 per ``uint64`` word. Everything a node knows about
one word sits in one row of its block ``blk[w, :]``: the fragments it holds
(``HAVE``), the fragments it has requested (``INFLIGHT``) and, from column
``PLANES`` on, its rarity counts (how many of its peers hold each fragment)
stored bit-sliced: column ``PLANES + b`` holds bit ``b`` of the count of each
of the word's 64 fragments. The minimum count over a candidate set then falls
out of one sweep per plane, most significant first, over a shrinking word
list.
"""

from __future__ import annotations

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

from .rng import randbelow

_ONE = np.uint64(1)
HAVE, INFLIGHT, PLANES = 0, 1, 2


@intrinsic
def _llvm_ctpop(typingctx, x):
    def codegen(context, builder, signature, args):
        fn = builder.module.declare_intrinsic("llvm.ctpop", [ir.IntType(64)])
        return builder.call(fn, args)

    return types.uint64(types.uint64), codegen


@intrinsic
def _llvm_cttz(typingctx, x):
    def codegen(context, builder, signature, args):
        fn = builder.module.declare_intrinsic("llvm.cttz", [ir.IntType(64), ir.IntType(1)])
        return builder.call(fn, [args[0], ir.Constant(ir.IntType(1), 0)])

    return types.uint64(types.uint64), codegen


class NotInterested(LookupError):
    """The sender holds nothing the receiver can still request."""


@njit(cache=True)
def popcount(x):
    return int(_llvm_ctpop(np.uint64(x)))


@njit(cache=True)
def ctz(x):
    """Index of the lowest set bit of a nonzero word."""
    return int(_llvm_cttz(np.uint64(x)))


@njit(cache=True)
def _kth_bit(x, k):
    for _ in range(k):
        x &= x - _ONE
    return ctz(x)


@njit(cache=True)
def count_up(blk, w, mask):
    """Add one to the rarity counters of word ``w`` selected by ``mask``."""
    carry = mask
    for c in range(PLANES, blk.shape[1]):
        old = blk[w, c]
        blk[w, c] = old ^ carry
        carry = old & carry
        if carry == 0:
            return
    raise OverflowError("rarity counter overflow")


@njit(cache=True)
def availability(blk, g):
    """Rarity count of fragment ``g``."""
    w = g >> 6
    b = np.uint64(g & 63)
    a = 0
    for p in range(blk.shape[1] - PLANES):
        a |= int((blk[w, PLANES + p] >> b) & _ONE) << p
    return a


@njit(cache=True)
def rarest_words(recv, sender, word_idx, word_mask):
    """Find the rarest candidates: fragments the sender holds that the receiver
    neither holds nor has in flight, rarity as seen by the receiver.

    ``recv`` and ``sender`` are node blocks. On return ``word_mask[:m]`` are
    the rarest candidates of words ``word_idx[:m]`` in ascending word order.
    Returns ``(m, count)``; ``m == 0`` when there is no candidate.
    """
    n_act = 0
    for w in range(recv.shape[0]):
        cand = sender[w, HAVE] & ~recv[w, HAVE] & ~recv[w, INFLIGHT]
        word_mask[n_act] = cand
        word_idx[n_act] = w
        n_act += cand != 0
    if n_act == 0:
        return 0, 0
    # Global bit-sliced minimum: whenever some candidate has a 0 bit, every
    # candidate with a 1 bit there drops out.
    least = 0
    for b in range(recv.shape[1] - PLANES - 1, -1, -1):
        c = PLANES + b
        any_zero = np.uint64(0)
        for i in range(n_act):
            any_zero |= word_mask[i] & ~recv[word_idx[i], c]
        if any_zero == 0:
            least |= 1 << b
            continue
        kept = 0
        for i in range(n_act):
            zero = word_mask[i] & ~recv[word_idx[i], c]
            word_mask[kept] = zero
            word_idx[kept] = word_idx[i]
            kept += zero != 0
        n_act = kept
    return n_act, least


@njit(cache=True)
def pick_rarest(recv, sender, word_idx, word_mask, states, stream):
    """Rarest candidate fragment, ties broken uniformly at random; -1 if none."""
    m, _ = rarest_words(recv, sender, word_idx, word_mask)
    total = 0
    for i in range(m):
        total += popcount(word_mask[i])
    if total == 0:
        return -1
    k = randbelow(states, stream, total)
    for i in range(m):
        cnt = popcount(word_mask[i])
        if k < cnt:
            return (word_idx[i] << 6) + _kth_bit(word_mask[i], k)
        k -= cnt
    return -1


def pack(flags: np.ndarray) -> np.ndarray:
    """Pack a boolean vector (or rows of a matrix) into little-endian uint64 words."""
    flags = np.asarray(flags, dtype=bool)
    nbits = flags.shape[-1]
    nw = (nbits + 63) // 64
    padded = np.zeros(flags.shape[:-1] + (nw * 64,), dtype=bool)
    padded[..., :nbits] = flags
    return np.packbits(padded, axis=-1, bitorder="little").view(np.uint64).copy()


def node_block(have: np.ndarray, inflight: np.ndarray, counts: np.ndarray, n_planes: int) -> np.ndarray:
    """Build one node's ``(W, PLANES + n_planes)`` block from boolean and count vectors."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and counts.max() >= 1 << n_planes:
        raise ValueError("counts do not fit in the requested planes")
    cols = [pack(have), pack(inflight)] + [pack((counts >> b) & 1) for b in range(n_planes)]
    return np.ascontiguousarray(np.stack(cols, axis=1))


def select_fragment(
    receiver: int,
    sender: int,
    have: np.ndarray,
    peers: np.ndarray,
    states: np.ndarray,
    inflight: np.ndarray | None = None,
) -> int:
    """Choose the next fragment ``receiver`` requests from ``sender``.

    ``have`` is a boolean ``(N, F)`` possession matrix and ``peers`` the
    symmetric boolean adjacency of peer sets; rarity of a fragment is the
    number of the receiver's peers holding it. ``states`` are the per-node
    random streams (the receiver's stream is advanced). Raises
    :class:`NotInterested` if the sender has nothing the receiver lacks.
    """
    have = np.asarray(have, dtype=bool)
    busy = np.zeros(have.shape[1], dtype=bool) if inflight is None else np.asarray(inflight, dtype=bool)
    if not (have[sender] & ~have[receiver] & ~busy).any():
        raise NotInterested(f"node {receiver} wants nothing from node {sender}")
    avail = have[np.asarray(peers[receiver], dtype=bool)].sum(axis=0)
    n_planes = max(int(avail.max()).bit_length(), 1)
    recv = node_block(have[receiver], busy, avail, n_planes)
    send = node_block(have[sender], np.zeros_like(busy), np.zeros_like(avail), n_planes)
    nw = recv.shape[0]
    return int(
        pick_rarest(recv, send, np.empty(nw, dtype=np.int64), np.empty(nw, dtype=np.uint64), states, receiver)
    )
