"""Independent reference implementations used as test oracles.

These deliberately re-derive results from first principles (plain dict
scans, recursive closures) instead of reusing the package's incremental
code paths, so that agreement between the two is meaningful evidence.
"""

from typing import Dict, List, Optional, Set, Tuple

from dagmempool.types import BlockHeader, Certificate, Committee, Digest


def closure_by_reachability(
    headers: Dict[Digest, BlockHeader], start: Digest, watermark: int = -1
) -> Set[Digest]:
    """Transitive parent closure via memoized recursion (headers above watermark)."""
    memo: Dict[Digest, Set[Digest]] = {}

    def visit(d: Digest) -> Set[Digest]:
        if d in memo:
            return memo[d]
        h = headers[d]
        acc = {d}
        if h.round - 1 > watermark:
            for p in h.parents:
                acc |= visit(p)
        memo[d] = acc
        return acc

    return visit(start)


def order_headers(committee: Committee, headers: Dict[Digest, BlockHeader], digests) -> List[Digest]:
    def key(d: Digest):
        h = headers[d]
        return (h.round, committee.ordinal_of(h.author))

    return sorted(digests, key=key)


def total_order_from_snapshot(
    committee: Committee,
    coin,
    snapshot: dict,
    gc_depth: int,
) -> Tuple[List[Tuple[int, Digest]], List[Digest]]:
    """Recomputes the full commit output of one validator from its snapshot.

    The snapshot carries the final header/certificate maps plus the local
    processing order of header stores ("H") and certificate acceptances
    ("C"). Replaying that order reconstructs every evaluation-time view, and
    the deterministic parts (leader recursion, linearization) are recomputed
    from the content maps.

    Returns (leader sequence [(wave, digest)], emitted header digest sequence).
    """
    headers: Dict[Digest, BlockHeader] = snapshot["headers"]
    certs: Dict[Digest, Certificate] = snapshot["certs"]
    events: List[Tuple[str, Digest]] = snapshot["events"]

    quorum = committee.quorum
    validity = committee.validity

    visible_headers: Set[Digest] = set()
    accepted: Set[Digest] = set()
    slot: Dict[Tuple[int, int], Digest] = {}
    round_counts: Dict[int, int] = {}
    evaluated: Set[int] = set()

    decided = 0
    gc_round = -1
    emitted: List[Digest] = []
    emitted_set: Set[Digest] = set()
    leaders: List[Tuple[int, Digest]] = []

    def reachable_leader(frm: Digest, round: int, ordinal: int) -> Optional[Digest]:
        author = committee.authority(ordinal).public_key
        stack = [frm]
        seen = {frm}
        while stack:
            d = stack.pop()
            h = headers.get(d)
            if h is None or h.round < round:
                continue
            if h.round == round:
                if h.author == author:
                    return d
                continue
            for p in h.parents:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return None

    def linearize(wave: int, leader_digest: Digest, leader_round: int) -> None:
        nonlocal gc_round
        cls = closure_by_reachability(headers, leader_digest, gc_round)
        fresh = [
            d
            for d in order_headers(committee, headers, cls)
            if headers[d].round > gc_round and d not in emitted_set
        ]
        for d in fresh:
            emitted_set.add(d)
            emitted.append(d)
        gc_round = max(gc_round, max(0, leader_round - gc_depth))
        leaders.append((wave, leader_digest))

    for kind, d in events:
        if kind == "H":
            visible_headers.add(d)
            continue
        cert = certs[d]
        accepted.add(d)
        slot[(cert.round, committee.ordinal_of(cert.author))] = d
        round_counts[cert.round] = round_counts.get(cert.round, 0) + 1
        if cert.round < 3 or cert.round % 2 == 0:
            continue
        if round_counts[cert.round] != quorum:
            continue
        wave = (cert.round - 1) // 2
        if wave in evaluated:
            continue
        evaluated.add(wave)
        leader_ord = coin.leader(wave, committee)
        leader_digest = slot.get((2 * wave - 1, leader_ord))
        if leader_digest is None:
            continue
        support = 0
        for vd in accepted:
            vcert = certs[vd]
            if vcert.round != 2 * wave:
                continue
            vh = headers.get(vd)
            if vd in visible_headers and vh is not None and leader_digest in vh.parents:
                support += 1
        if support < validity or wave <= decided:
            continue
        stack: List[Tuple[int, Digest, int]] = [(wave, leader_digest, 2 * wave - 1)]
        top = leader_digest
        for prior in range(wave - 1, decided, -1):
            cand_ord = coin.leader(prior, committee)
            cand = reachable_leader(top, 2 * prior - 1, cand_ord)
            if cand is not None:
                stack.append((prior, cand, 2 * prior - 1))
                top = cand
        decided = wave
        for w, ld, lr in reversed(stack):
            linearize(w, ld, lr)

    return leaders, emitted
