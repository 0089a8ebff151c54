"""Pure-Python enumeration kernel (reference and fallback)."""
from __future__ import annotations

from typing import Sequence


def _missing(const: int, union: int, req: Sequence[int]) -> bool:
    # only a view prepared in one fixed state is subject to eventual occurrence
    if const not in (1, 2):
        return False
    need = req[const]
    return (union & need) != need


def enumerate_sequences(
    local_ok: Sequence[int],
    halting: Sequence[int],
    f1_psi: Sequence[int],
    f1_out: Sequence[int],
    f2_psi: Sequence[int],
    f2_out: Sequence[int],
    a_out: Sequence[int],
    w_out: Sequence[int],
    f1_req: Sequence[int],
    f2_req: Sequence[int],
    a_req: int,
    w_req: int,
    max_rounds: int,
    repetition: bool,
    qt_c: bool,
    witness_cap: int,
) -> tuple[int, int, list[tuple[int, ...]]]:
    """Count round-pattern sequences of length 1..max_rounds that pass.

    Sequences containing a pattern with ``local_ok == 0`` can never pass and
    are skipped without being visited.  Returns ``(satisfying, visited,
    witnesses)`` where witnesses are the first ``witness_cap`` passing
    sequences in lexicographic order.
    """
    viable = [p for p in range(len(local_ok)) if local_ok[p]]
    H = int(max_rounds)
    sat = 0
    visited = 0
    witnesses: list[tuple[int, ...]] = []
    seq: list[int] = []

    def visit(f1c: int, f2c: int, f1u: int, f2u: int, au: int, wu: int) -> None:
        nonlocal sat, visited
        depth = len(seq) + 1
        for p in viable:
            visited += 1
            n1 = f1_psi[p] if f1c == 0 else (f1c if f1c == f1_psi[p] else -1)
            n2 = f2_psi[p] if f2c == 0 else (f2c if f2c == f2_psi[p] else -1)
            u1, u2 = f1u | f1_out[p], f2u | f2_out[p]
            ua, uw = au | a_out[p], wu | w_out[p]
            halts = bool(halting[p])
            ok = not repetition or halts or depth == H
            if ok and qt_c and depth == H and not halts:
                ok = not (
                    (ua & a_req) != a_req
                    or (uw & w_req) != w_req
                    or _missing(n1, u1, f1_req)
                    or _missing(n2, u2, f2_req)
                )
            seq.append(p)
            if ok:
                sat += 1
                if len(witnesses) < witness_cap:
                    witnesses.append(tuple(seq))
            if depth < H and not (repetition and halts):
                visit(n1, n2, u1, u2, ua, uw)
            seq.pop()

    if H >= 1:
        visit(0, 0, 0, 0, 0, 0)
    return sat, visited, witnesses
