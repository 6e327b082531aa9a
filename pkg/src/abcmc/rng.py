"""Counter-based random streams.

All randomness in a run is derived from one 64-bit master seed through
Philox counter-based streams keyed by a ``(stage, index)`` pair.  Because a
stream's content depends only on ``(seed, stage, index)`` and never on
execution order, results are reproducible bit-for-bit regardless of how
work is scheduled across workers.

Samplers lay out their independent units of work (proposal attempts) in
fixed-size chunks; chunk ``c`` of a stage draws everything it needs from
the stream ``(stage, c)``.  The chunk size is a protocol constant: changing
it changes the mapping from attempts to streams and therefore the results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InvalidInputError

# Attempts per derived stream in chunked samplers.  Protocol constant: part
# of the reproducibility contract, deliberately not configurable.
CHUNK_SIZE = 4096

_MASK64 = (1 << 64) - 1


def derive_rng_stream(master_seed, stream_id):
    """Return an independent, reproducible ``numpy.random.Generator``.

    ``stream_id`` is a ``(stage, index)`` pair of nonnegative-ish integers
    (values are reduced modulo 2**64).  The stage selects an independent
    Philox cipher key, the index an astronomically separated counter block,
    so distinct ids never produce overlapping draws.
    """
    try:
        stage, index = stream_id
    except (TypeError, ValueError):
        raise InvalidInputError(
            f"stream_id must be a (stage, index) pair, got {stream_id!r}"
        ) from None
    key = np.array(
        [int(master_seed) & _MASK64, int(stage) & _MASK64], dtype=np.uint64
    )
    counter = np.array([0, 0, 0, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def stage_id(stage, phase):
    """Pack a sampler stage number and phase tag into one stream stage."""
    return (int(stage) << 8) | int(phase)


# Phase tags used when packing stage ids.  Kept in one place so no two
# call sites can collide.
PHASE_PILOT = 1
PHASE_DRAW = 2
PHASE_INIT = 3
PHASE_MOVE = 4
PHASE_RESAMPLE = 5
PHASE_CHAIN = 6


def chunk_streams(master_seed, stage, start_chunk=0):
    """Yield ``(first_attempt_index, generator)`` per attempt chunk."""
    c = start_chunk
    while True:
        yield c * CHUNK_SIZE, derive_rng_stream(master_seed, (stage, c))
        c += 1


def map_chunks(evaluate, master_seed, stage, workers=1, start_chunk=0):
    """Iterate chunk evaluations in stream order.

    ``evaluate(first_index, rng)`` must be pure given its arguments; with
    ``workers > 1`` chunks are evaluated concurrently but always yielded in
    chunk order, so consumers see the same sequence for any worker count.
    """
    if workers <= 1:
        for first, rng in chunk_streams(master_seed, stage, start_chunk):
            yield evaluate(first, rng)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = {}
        c = start_chunk
        next_out = start_chunk
        while True:
            while len(pending) < 2 * workers:
                first = c * CHUNK_SIZE
                rng = derive_rng_stream(master_seed, (stage, c))
                pending[c] = pool.submit(evaluate, first, rng)
                c += 1
            yield pending.pop(next_out).result()
            next_out += 1
