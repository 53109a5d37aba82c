"""Compiled core of the layer simulation.

This is a transcription of the event handlers in ``dram``, ``bus`` and
``accelerator`` onto flat integer arrays, run under numba. Events use the
same (cycle, priority, sequence) order and every handler schedules its
follow-up events in the same order as its object-based counterpart, so the
two produce identical cycle counts. The object model remains the reference
and the only one that records command and protocol traces.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from accsim.accelerator import AccelConfig
from accsim.bus import BusConfig
from accsim.dram import DramConfig
from accsim.memmap import DATA_TYPES, MERGE_FLOOR, DramLayout, box_runs, region_shape, tile_box
from accsim.workload import LayerShape, TileConfig, compute_cycles, iter_passes

BIG = 1 << 62

# scalar state slots
NOW, SEQ, HSIZE, CMD_FREE, DBUS_FREE, DBUS_DIR, REF_DUE, QUEUED, WAKE_AT, ARB_AT = range(10)
LAST_GRANT, ADDR_FREE, R_FREE, W_FREE, TID, WAITING, FINISHED, ERR, VIOL, MAX_INFL = range(10, 20)
BEATS_REQ, BEATS_DEL, N_ACT, N_RD, N_WR, N_PRE, N_REF, NSLOTS = range(20, 28)

# config slots
C_RCD, C_RP, C_CL, C_BURST, C_RC, C_RAS, C_REFP, C_REFD, C_REFON, C_NB = range(10)
C_PAGE, C_DBB, C_CLOSE, C_QD, C_TURN, C_MAXOUT, C_LAT, C_GAP, C_HS, C_ILV = range(10, 20)
C_SETUP, C_STAGGER, NCFG = range(20, 23)

# event kinds and priorities
EV_INSERT, EV_WAKE, EV_ARB, EV_COMPLETE, EV_LAUNCH, EV_CDONE = range(6)
P_DRAM, P_BUS, P_CTRL = 0, 1, 3

# bank columns
B_ROW, B_COLS, B_NACT, B_NCOL, B_NPRE = range(5)
# request/transaction columns (one row per burst transaction)
R_BURST, R_MASTER, R_BANK, R_ROW, R_COL, R_W, R_BEATS, R_NU, R_NUNITS, R_WSTART = range(10)
R_DELIV, R_PREV, R_SUCC, R_DONE, R_HELD, NRCOLS = range(10, 16)
# dmac columns
D_STATUS, D_INFL, D_NEXT, D_END, D_LEFT, D_REQ, D_LAST, D_CUR, D_QH, D_QT, D_BUSINFL, D_PEND = range(12)
D_LASTREAD, D_NCHUNK, NDCOLS = range(12, 15)
# pass columns
P_GROUP, P_FIRST, P_LAST, P_CYC, P_WS, P_CE, P_CS, P_CEND, P_PEND = range(9)
P_SPAN0, NPCOLS = 9, 13  # IFM start/end, W start/end

RUNNING, DONE = 1, 2
K_NONE, K_ACT, K_COL, K_PRE, K_REF = range(5)


@njit(cache=True)
def _lt(EV, i, j):
    if EV[i, 0] != EV[j, 0]:
        return EV[i, 0] < EV[j, 0]
    if EV[i, 1] != EV[j, 1]:
        return EV[i, 1] < EV[j, 1]
    return EV[i, 2] < EV[j, 2]


@njit(cache=True)
def _swap(EV, i, j):
    for c in range(6):
        t = EV[i, c]
        EV[i, c] = EV[j, c]
        EV[j, c] = t


@njit(cache=True)
def _at(S, EV, cycle, prio, kind, a, b):
    n = S[HSIZE]
    if n >= EV.shape[0]:
        S[ERR] = 1  # heap full; the caller retries with more room
        return
    if cycle < S[NOW]:
        S[ERR] = 6
        return
    S[SEQ] += 1
    EV[n, 0] = cycle
    EV[n, 1] = prio
    EV[n, 2] = S[SEQ]
    EV[n, 3] = kind
    EV[n, 4] = a
    EV[n, 5] = b
    S[HSIZE] = n + 1
    i = n
    while i > 0:
        p = (i - 1) >> 1
        if _lt(EV, i, p):
            _swap(EV, i, p)
            i = p
        else:
            break


@njit(cache=True)
def _pop(S, EV):
    n = S[HSIZE] - 1
    S[HSIZE] = n
    _swap(EV, 0, n)
    i = 0
    while True:
        lo = 2 * i + 1
        if lo >= n:
            break
        c = lo
        if lo + 1 < n and _lt(EV, lo + 1, lo):
            c = lo + 1
        if _lt(EV, c, i):
            _swap(EV, c, i)
            i = c
        else:
            break
    return n


# DRAM ------------------------------------------------------------------------

@njit(cache=True)
def _w_ready(CF, RQ, rid):
    u = RQ[rid, R_NU]
    end = (u + 1) * CF[C_DBB]
    if end > RQ[rid, R_BEATS]:
        end = RQ[rid, R_BEATS]
    return RQ[rid, R_WSTART] + end + CF[C_LAT]


@njit(cache=True)
def _pick(S, CF, BK, Q, QL, RQ, cycle):
    nb = CF[C_NB]
    cmd_free = S[CMD_FREE]
    kind = K_NONE
    kb = -1
    krid = -1
    nxt = BIG
    due = S[REF_DUE]
    if due >= 0 and due <= cycle:
        idle = True
        for b in range(nb):
            if BK[b, B_ROW] != -1:
                idle = False
                r = BK[b, B_NPRE]
                if r < cmd_free:
                    r = cmd_free
                if r <= cycle:
                    if kind == K_NONE:
                        kind = K_PRE
                        kb = b
                elif r < nxt:
                    nxt = r
        if idle:
            r = cmd_free
            if due > r:
                r = due
            for b in range(nb):
                if BK[b, B_NACT] > r:
                    r = BK[b, B_NACT]
            if r <= cycle:
                kind = K_REF
            else:
                nxt = r
        return kind, kb, krid, nxt

    close_after = CF[C_CLOSE]
    tCL = CF[C_CL]
    dbus_free = S[DBUS_FREE]
    dbus_dir = S[DBUS_DIR]
    d_other = dbus_free
    if dbus_dir != -1 and CF[C_TURN] != 0:
        d_other = dbus_free + CF[C_BURST]
    k0 = 99
    k1 = 0
    active = False
    for b in range(nb):
        ql = QL[b]
        row = BK[b, B_ROW]
        if row == -1:
            if ql == 0:
                continue
            active = True
            rid = Q[b, 0]
            r = BK[b, B_NACT]
            if r < cmd_free:
                r = cmd_free
            if r <= cycle:
                if k0 > 1 or (k0 == 1 and rid < k1):
                    kind, kb, krid, k0, k1 = K_ACT, b, rid, 1, rid
            elif r < nxt:
                nxt = r
            continue
        active = True
        hit = False
        if BK[b, B_COLS] < close_after:
            for qi in range(ql):
                rid = Q[b, qi]
                if RQ[rid, R_ROW] != row:
                    continue
                hit = True
                w = RQ[rid, R_W]
                if dbus_dir != w:
                    r = d_other - tCL
                else:
                    r = dbus_free - tCL
                if r < BK[b, B_NCOL]:
                    r = BK[b, B_NCOL]
                if r < cmd_free:
                    r = cmd_free
                if w == 1:
                    rd = _w_ready(CF, RQ, rid)
                    if rd > r:
                        r = rd
                if r <= cycle:
                    if k0 > 0 or rid < k1:
                        kind, kb, krid, k0, k1 = K_COL, b, rid, 0, rid
                    break
                if r < nxt:
                    nxt = r
        if not hit:
            r = BK[b, B_NPRE]
            if r < cmd_free:
                r = cmd_free
            if r <= cycle:
                if ql > 0:
                    a0, a1 = 1, Q[b, 0]
                else:
                    a0, a1 = 2, b
                if a0 < k0 or (a0 == k0 and a1 < k1):
                    kind, kb, krid, k0, k1 = K_PRE, b, -1, a0, a1
            elif r < nxt:
                nxt = r
    if active and due >= 0 and due < nxt:
        nxt = due
    return kind, kb, krid, nxt


@njit(cache=True)
def _kick(S, EV, cycle):
    if S[WAKE_AT] == -1 or cycle < S[WAKE_AT]:
        S[WAKE_AT] = cycle
        _at(S, EV, cycle, P_DRAM, EV_WAKE, cycle, 0)


@njit(cache=True)
def _insert(S, EV, CF, Q, QL, RQ, rid):
    if S[QUEUED] >= CF[C_QD]:
        S[ERR] = 3
        return
    page = RQ[rid, R_COL] // CF[C_PAGE]  # R_COL holds the address until insertion
    addr = RQ[rid, R_COL]
    b = page % CF[C_NB]
    RQ[rid, R_BANK] = b
    RQ[rid, R_ROW] = page // CF[C_NB]
    RQ[rid, R_COL] = addr - page * CF[C_PAGE]
    Q[b, QL[b]] = rid
    QL[b] += 1
    S[QUEUED] += 1
    _kick(S, EV, S[NOW])


# bus -------------------------------------------------------------------------

@njit(cache=True)
def _deliver(S, EV, RQ, HA, HN, txn, avail, n, buf_a, buf_n):
    cur = txn
    cnt = 1
    buf_a[0, 0] = avail
    buf_n[0, 0] = n
    side = 0
    while True:
        nxt = -1
        for i in range(cnt):
            a = buf_a[side, i]
            m = buf_n[side, i]
            s = a if a > S[R_FREE] else S[R_FREE]
            S[R_FREE] = s + m
            RQ[cur, R_DELIV] += m
            S[BEATS_DEL] += m
            if RQ[cur, R_DELIV] == RQ[cur, R_BEATS]:
                end = s + m
                RQ[cur, R_DONE] = 1
                _at(S, EV, end, P_BUS, EV_COMPLETE, cur, end)
                nx = RQ[cur, R_SUCC]
                if nx != -1:
                    h = RQ[nx, R_HELD]
                    for j in range(h):
                        aa = HA[nx, j]
                        buf_a[1 - side, j] = aa if aa > end else end
                        buf_n[1 - side, j] = HN[nx, j]
                    RQ[nx, R_HELD] = 0
                    nxt = nx
                    cnt = h
        if nxt == -1:
            break
        cur = nxt
        side = 1 - side


@njit(cache=True)
def _bus_data(S, EV, RQ, HA, HN, DM, CT, CN, rid, first, n, w, buf_a, buf_n):
    d = RQ[rid, R_MASTER]
    k = DM[d, D_NCHUNK]
    CT[d, k] = first
    CN[d, k] = n
    DM[d, D_NCHUNK] = k + 1
    if w == 1:
        return
    prev = RQ[rid, R_PREV]
    if prev != -1 and RQ[prev, R_DONE] == 0:
        h = RQ[rid, R_HELD]
        HA[rid, h] = first
        HN[rid, h] = n
        RQ[rid, R_HELD] = h + 1
    else:
        _deliver(S, EV, RQ, HA, HN, rid, first, n, buf_a, buf_n)


@njit(cache=True)
def _issue_dram(S, EV, CF, BK, Q, QL, RQ, HA, HN, DM, CT, CN, kind, b, rid, cycle, buf_a, buf_n):
    if kind == K_COL:
        w = RQ[rid, R_W]
        d = cycle + CF[C_CL]
        tb = CF[C_BURST]
        S[DBUS_FREE] = d + tb
        S[DBUS_DIR] = w
        BK[b, B_COLS] += 1
        BK[b, B_NCOL] = cycle + tb
        p = d + tb if w == 1 else cycle + tb
        if p > BK[b, B_NPRE]:
            BK[b, B_NPRE] = p
        u = RQ[rid, R_NU]
        n = RQ[rid, R_BEATS] - u * CF[C_DBB]
        if n > CF[C_DBB]:
            n = CF[C_DBB]
        RQ[rid, R_NU] = u + 1
        _bus_data(S, EV, RQ, HA, HN, DM, CT, CN, rid, d, n, w, buf_a, buf_n)
        if u + 1 == RQ[rid, R_NUNITS]:
            ql = QL[b]
            j = 0
            while Q[b, j] != rid:
                j += 1
            for i in range(j, ql - 1):
                Q[b, i] = Q[b, i + 1]
            QL[b] = ql - 1
            S[QUEUED] -= 1
            # write acknowledgment
            if w == 1:
                c2 = d + tb
                RQ[rid, R_DONE] = 1
                S[BEATS_DEL] += RQ[rid, R_BEATS]
                _at(S, EV, c2 + CF[C_HS], P_BUS, EV_COMPLETE, rid, c2 + CF[C_HS])
        if w == 1:
            S[N_WR] += 1
        else:
            S[N_RD] += 1
    elif kind == K_ACT:
        BK[b, B_ROW] = RQ[rid, R_ROW]
        BK[b, B_COLS] = 0
        BK[b, B_NCOL] = cycle + CF[C_RCD]
        if cycle + CF[C_RAS] > BK[b, B_NPRE]:
            BK[b, B_NPRE] = cycle + CF[C_RAS]
        BK[b, B_NACT] = cycle + CF[C_RC]
        S[N_ACT] += 1
    elif kind == K_PRE:
        BK[b, B_ROW] = -1
        BK[b, B_COLS] = 0
        if cycle + CF[C_RP] > BK[b, B_NACT]:
            BK[b, B_NACT] = cycle + CF[C_RP]
        S[N_PRE] += 1
    else:
        c = S[CMD_FREE]
        if S[REF_DUE] > c:
            c = S[REF_DUE]
        for x in range(CF[C_NB]):
            if BK[x, B_NACT] > c:
                c = BK[x, B_NACT]
        cycle = c
        end = c + CF[C_REFD]
        for x in range(CF[C_NB]):
            BK[x, B_NACT] = end
        S[REF_DUE] += CF[C_REFP]
        S[N_REF] += 1
    S[CMD_FREE] = cycle + 1


@njit(cache=True)
def _wake(S, EV, CF, BK, Q, QL, RQ, HA, HN, DM, CT, CN, cycle, buf_a, buf_n):
    if cycle != S[WAKE_AT]:
        return
    S[WAKE_AT] = -1
    kind, b, rid, nxt = _pick(S, CF, BK, Q, QL, RQ, cycle)
    while kind == K_REF:
        _issue_dram(S, EV, CF, BK, Q, QL, RQ, HA, HN, DM, CT, CN, kind, b, rid, cycle, buf_a, buf_n)
        kind, b, rid, nxt = _pick(S, CF, BK, Q, QL, RQ, cycle)
    if kind != K_NONE:
        _issue_dram(S, EV, CF, BK, Q, QL, RQ, HA, HN, DM, CT, CN, kind, b, rid, cycle, buf_a, buf_n)
        kind, b, rid, nxt = _pick(S, CF, BK, Q, QL, RQ, cycle + 1)
        if kind != K_NONE:
            nxt = cycle + 1
    if nxt < BIG:
        _kick(S, EV, nxt)


@njit(cache=True)
def _bus_request(S, EV, DM, d, cycle):
    DM[d, D_PEND] = cycle
    t = cycle
    if S[ADDR_FREE] > t:
        t = S[ADDR_FREE]
    if S[NOW] > t:
        t = S[NOW]
    if S[ARB_AT] == -1 or t < S[ARB_AT]:
        S[ARB_AT] = t
        _at(S, EV, t, P_BUS, EV_ARB, t, 0)


@njit(cache=True)
def _dmac_try(S, EV, CF, DM, d, cycle):
    if DM[d, D_REQ] == 1 or DM[d, D_NEXT] >= DM[d, D_END] or DM[d, D_INFL] >= CF[C_MAXOUT]:
        return
    DM[d, D_REQ] = 1
    t = DM[d, D_LAST] + CF[C_GAP]
    _bus_request(S, EV, DM, d, cycle if cycle > t else t)


@njit(cache=True)
def _bus_issue(S, EV, CF, RQ, DM, BA, BB, BW, bidx, cycle, d):
    if DM[d, D_BUSINFL] >= CF[C_MAXOUT]:
        S[ERR] = 4
        return
    DM[d, D_BUSINFL] += 1
    if DM[d, D_BUSINFL] > S[MAX_INFL]:
        S[MAX_INFL] = DM[d, D_BUSINFL]
    S[TID] += 1
    tid = S[TID]
    beats = BB[bidx]
    w = BW[bidx]
    RQ[tid, R_BURST] = bidx
    RQ[tid, R_MASTER] = d
    RQ[tid, R_W] = w
    RQ[tid, R_BEATS] = beats
    RQ[tid, R_NU] = 0
    RQ[tid, R_NUNITS] = (beats + CF[C_DBB] - 1) // CF[C_DBB]
    RQ[tid, R_COL] = BA[bidx]
    RQ[tid, R_DELIV] = 0
    RQ[tid, R_PREV] = -1
    RQ[tid, R_SUCC] = -1
    RQ[tid, R_DONE] = 0
    RQ[tid, R_HELD] = 0
    S[BEATS_REQ] += beats
    hs = CF[C_HS]
    arrival = cycle + hs + CF[C_LAT]
    if w == 1:
        s = cycle + hs
        if S[W_FREE] > s:
            s = S[W_FREE]
        S[W_FREE] = s + beats
        RQ[tid, R_WSTART] = s
    elif CF[C_ILV] == 0:
        prev = DM[d, D_LASTREAD]
        if prev != -1 and RQ[prev, R_DONE] == 0:
            RQ[tid, R_PREV] = prev
            RQ[prev, R_SUCC] = tid
        DM[d, D_LASTREAD] = tid
    _at(S, EV, arrival, P_DRAM, EV_INSERT, tid, 0)


@njit(cache=True)
def _arbitrate(S, EV, CF, RQ, DM, BA, BB, BW, cycle):
    if cycle != S[ARB_AT]:
        return
    S[ARB_AT] = -1
    start = S[LAST_GRANT] + 1
    ready = False
    m = -1
    for i in range(3):
        mm = (start + i) % 3
        t = DM[mm, D_PEND]
        if t != -1 and t <= cycle:
            ready = True
            m = mm
            break
    if ready:
        S[LAST_GRANT] = m
        DM[m, D_PEND] = -1
        S[ADDR_FREE] = cycle + 1
        # grant: the DMAC hands over its next burst
        bidx = DM[m, D_NEXT]
        DM[m, D_NEXT] = bidx + 1
        DM[m, D_INFL] += 1
        DM[m, D_LAST] = cycle
        DM[m, D_REQ] = 0
        _dmac_try(S, EV, CF, DM, m, cycle)
        _bus_issue(S, EV, CF, RQ, DM, BA, BB, BW, bidx, cycle, m)
    lo = BIG
    for i in range(3):
        if DM[i, D_PEND] != -1 and DM[i, D_PEND] < lo:
            lo = DM[i, D_PEND]
    if lo < BIG:
        t = S[ADDR_FREE]
        if lo > t:
            t = lo
        c = cycle + 1 if ready else cycle
        if c > t:
            t = c
        if S[ARB_AT] == -1 or t < S[ARB_AT]:
            S[ARB_AT] = t
            _at(S, EV, t, P_BUS, EV_ARB, t, 0)


# accelerator -----------------------------------------------------------------

@njit(cache=True)
def _open_window(S, EV, CF, PS, k, t):
    PS[k, P_WS] = t
    if k >= 2 and (PS[k - 2, P_CEND] == -1 or PS[k - 2, P_CEND] > t):
        S[VIOL] += 1
    PS[k, P_PEND] = 2
    _at(S, EV, t + CF[C_SETUP], P_CTRL, EV_LAUNCH, 0, k)
    _at(S, EV, t + CF[C_SETUP] + CF[C_STAGGER], P_CTRL, EV_LAUNCH, 1, k)


@njit(cache=True)
def _try_switch(S, EV, CF, PS, OD):
    k = S[WAITING]
    n = PS.shape[0]
    if k >= n or PS[k, P_CE] == -1:
        return
    if k > 0 and PS[k - 1, P_CEND] == -1:
        return
    g = PS[k, P_GROUP]
    if PS[k, P_FIRST] == 1 and g >= 2 and OD[g - 2] == -1:
        return
    now = S[NOW]
    S[WAITING] = k + 1
    PS[k, P_CS] = now
    _at(S, EV, now + PS[k, P_CYC], P_CTRL, EV_CDONE, k, 0)
    if k + 1 < n:
        _open_window(S, EV, CF, PS, k + 1, now)


@njit(cache=True)
def _maybe_finish(S, PS, OD):
    last = PS.shape[0] - 1
    g = PS[last, P_GROUP]
    if PS[last, P_CEND] != -1 and OD[g] != -1:
        S[FINISHED] = max(PS[last, P_CEND], OD[g])


@njit(cache=True)
def _dma_done(S, EV, CF, PS, OD, d, k, cycle):
    if d == 2:
        OD[PS[k, P_GROUP]] = cycle
        _maybe_finish(S, PS, OD)
        _try_switch(S, EV, CF, PS, OD)
        return
    PS[k, P_SPAN0 + 2 * d + 1] = cycle
    PS[k, P_PEND] -= 1
    if PS[k, P_PEND] == 0:
        PS[k, P_CE] = cycle
        _try_switch(S, EV, CF, PS, OD)


@njit(cache=True)
def _dmac_start(S, EV, CF, DM, DQ, OFF, ACTV, d, cycle):
    h = DM[d, D_QH]
    k = DQ[d, h]
    DM[d, D_QH] = h + 1
    DM[d, D_CUR] = k
    DM[d, D_NEXT] = OFF[k, d, 0]
    DM[d, D_END] = OFF[k, d, 1]
    DM[d, D_LEFT] = OFF[k, d, 1] - OFF[k, d, 0]
    DM[d, D_STATUS] = RUNNING
    if d == 2:
        ACTV[k, 0] = cycle
    if DM[d, D_LEFT] == 0:
        S[ERR] = 5  # empty commands never occur: every pass moves data
        return
    _dmac_try(S, EV, CF, DM, d, cycle)


@njit(cache=True)
def _dmac_push(S, EV, CF, DM, DQ, OFF, ACTV, d, k):
    t = DM[d, D_QT]
    DQ[d, t] = k
    DM[d, D_QT] = t + 1
    if DM[d, D_STATUS] != RUNNING:
        _dmac_start(S, EV, CF, DM, DQ, OFF, ACTV, d, S[NOW])


@njit(cache=True)
def _complete(S, EV, CF, RQ, DM, DQ, OFF, PS, OD, ACTV, txn, cycle):
    d = RQ[txn, R_MASTER]
    DM[d, D_BUSINFL] -= 1
    DM[d, D_INFL] -= 1
    DM[d, D_LEFT] -= 1
    if DM[d, D_LEFT] != 0:
        _dmac_try(S, EV, CF, DM, d, cycle)
        return
    k = DM[d, D_CUR]
    if d == 2:
        ACTV[k, 1] = cycle
    DM[d, D_STATUS] = DONE
    DM[d, D_CUR] = -1
    _dma_done(S, EV, CF, PS, OD, d, k, cycle)
    if DM[d, D_QH] < DM[d, D_QT] and DM[d, D_STATUS] != RUNNING:
        _dmac_start(S, EV, CF, DM, DQ, OFF, ACTV, d, cycle)


@njit(cache=True)
def run_core(CF, PS, OFF, BA, BB, BW, ngroups, nbanks, max_units, ev_cap):
    """Run all passes; returns (state, pass table, OFM activity, chunk logs)."""
    npass = PS.shape[0]
    nb = BA.shape[0]
    S = np.zeros(NSLOTS, np.int64)
    for i in (DBUS_DIR, WAKE_AT, ARB_AT, LAST_GRANT, FINISHED):
        S[i] = -1
    S[REF_DUE] = CF[C_REFP] if CF[C_REFON] != 0 else -1
    EV = np.zeros((ev_cap, 6), np.int64)
    BK = np.zeros((nbanks, 5), np.int64)
    for b in range(nbanks):
        BK[b, B_ROW] = -1
    Q = np.zeros((nbanks, CF[C_QD] + 1), np.int64)
    QL = np.zeros(nbanks, np.int64)
    RQ = np.zeros((nb + 1, NRCOLS), np.int64)
    HA = np.zeros((nb + 1, max_units), np.int64)
    HN = np.zeros((nb + 1, max_units), np.int64)
    buf_a = np.zeros((2, max_units), np.int64)
    buf_n = np.zeros((2, max_units), np.int64)
    DM = np.zeros((3, NDCOLS), np.int64)
    for d in range(3):
        DM[d, D_PEND] = -1
        DM[d, D_LASTREAD] = -1
        DM[d, D_CUR] = -1
        DM[d, D_LAST] = -(1 << 40)
    DQ = np.zeros((3, npass), np.int64)
    OD = -np.ones(ngroups, np.int64)
    ACTV = -np.ones((npass, 2), np.int64)
    CT = np.zeros((3, nb * max_units + 1), np.int64)
    CN = np.zeros((3, nb * max_units + 1), np.int64)

    _open_window(S, EV, CF, PS, 0, 0)
    while S[HSIZE] > 0 and S[ERR] == 0:
        i = _pop(S, EV)
        cycle = EV[i, 0]
        kind = EV[i, 3]
        a = EV[i, 4]
        b = EV[i, 5]
        S[NOW] = cycle
        if kind == EV_WAKE:
            _wake(S, EV, CF, BK, Q, QL, RQ, HA, HN, DM, CT, CN, a, buf_a, buf_n)
        elif kind == EV_INSERT:
            _insert(S, EV, CF, Q, QL, RQ, a)
        elif kind == EV_ARB:
            _arbitrate(S, EV, CF, RQ, DM, BA, BB, BW, a)
        elif kind == EV_COMPLETE:
            _complete(S, EV, CF, RQ, DM, DQ, OFF, PS, OD, ACTV, a, b)
        elif kind == EV_LAUNCH:
            PS[b, P_SPAN0 + 2 * a] = cycle
            _dmac_push(S, EV, CF, DM, DQ, OFF, ACTV, a, b)
        else:
            PS[a, P_CEND] = cycle
            if PS[a, P_LAST] == 1:
                _dmac_push(S, EV, CF, DM, DQ, OFF, ACTV, 2, a)
            _maybe_finish(S, PS, OD)
            _try_switch(S, EV, CF, PS, OD)
    nchunk = DM[:, D_NCHUNK].copy()
    return S, PS, ACTV, CT, CN, nchunk


@njit(cache=True)
def _split_runs(starts, lengths, max_beats, page):
    n = 0
    for i in range(starts.shape[0]):
        a = starts[i]
        left = lengths[i]
        while left > 0:
            k = min(max_beats, left, page - a % page)
            a += k
            left -= k
            n += 1
    addr = np.empty(n, np.int64)
    beats = np.empty(n, np.int64)
    j = 0
    for i in range(starts.shape[0]):
        a = starts[i]
        left = lengths[i]
        while left > 0:
            k = min(max_beats, left, page - a % page)
            addr[j] = a
            beats[j] = k
            a += k
            left -= k
            j += 1
    return addr, beats


def config_vector(dram: DramConfig, bus: BusConfig, accel: AccelConfig) -> np.ndarray:
    t = dram.timing
    cf = np.zeros(NCFG, np.int64)
    cf[[C_RCD, C_RP, C_CL, C_BURST, C_RC, C_RAS, C_REFP, C_REFD]] = (
        t.tRCD, t.tRP, t.tCL, t.tBURST, t.tRC, t.tRAS, t.refresh_period, t.refresh_duration)
    cf[C_REFON] = int(dram.refresh)
    cf[C_NB] = dram.n_banks
    cf[C_PAGE] = dram.page_size
    cf[C_DBB] = dram.dram_burst_beats
    cf[C_CLOSE] = dram.close_after
    cf[C_QD] = dram.queue_depth
    cf[C_TURN] = int(dram.turnaround)
    cf[C_MAXOUT] = bus.max_outstanding
    cf[C_LAT] = bus.request_latency
    cf[C_GAP] = max(bus.inter_request_gap, 1)
    cf[C_HS] = bus.handshake
    cf[C_ILV] = int(bus.read_interleave)
    cf[C_SETUP] = accel.setup_cycles
    cf[C_STAGGER] = accel.stagger_cycles
    return cf


def build_inputs(layer: LayerShape, tile: TileConfig, dram: DramConfig, accel: AccelConfig):
    """Pass table and the per-pass, per-DMAC burst lists as flat arrays."""
    layout = DramLayout(layer, dram.page_size)
    passes = list(iter_passes(layer, tile))
    npass = len(passes)
    PS = -np.ones((npass, NPCOLS), np.int64)
    starts = []
    lengths = []
    counts = np.zeros((npass, 3), np.int64)
    dims = {dt: region_shape(dt, layer) for dt in DATA_TYPES}
    for p in passes:
        PS[p.index, P_GROUP] = p.group
        PS[p.index, P_FIRST] = int(p.first_c)
        PS[p.index, P_LAST] = int(p.last_c)
        PS[p.index, P_CYC] = compute_cycles(layer, tile, p.tb, p.tc, p.tm, p.te, p.tf, accel.fill_cycles)
        for j, dt in enumerate(DATA_TYPES):
            if j == 2 and not p.last_c:
                continue
            origin, extent = tile_box(dt, layer, p)
            runs = box_runs(dims[dt], origin, extent, MERGE_FLOOR[dt])
            base = layout.base[dt]
            starts.extend(base + s for s, _ in runs)
            lengths.extend(n for _, n in runs)
            counts[p.index, j] = len(runs)
    s = np.asarray(starts, np.int64)
    ln = np.asarray(lengths, np.int64)
    # split every run; bursts of one run are consecutive, so run offsets map to burst offsets
    per_run = np.zeros(len(s), np.int64)
    BA, BB = _split_runs(s, ln, accel.max_burst_beats, dram.page_size)
    _count_bursts(s, ln, accel.max_burst_beats, dram.page_size, per_run)
    run_off = np.concatenate(([0], np.cumsum(counts.reshape(-1))))
    burst_cum = np.concatenate(([0], np.cumsum(per_run)))
    OFF = np.zeros((npass, 3, 2), np.int64)
    OFF[:, :, 0] = burst_cum[run_off[:-1]].reshape(npass, 3)
    OFF[:, :, 1] = burst_cum[run_off[1:]].reshape(npass, 3)
    BW = np.zeros(len(BA), np.int64)
    for k in range(npass):
        BW[OFF[k, 2, 0]:OFF[k, 2, 1]] = 1
    ngroups = passes[-1].group + 1
    return PS, OFF, BA, BB, BW, ngroups


@njit(cache=True)
def _count_bursts(starts, lengths, max_beats, page, out):
    for i in range(starts.shape[0]):
        a = starts[i]
        left = lengths[i]
        n = 0
        while left > 0:
            k = min(max_beats, left, page - a % page)
            a += k
            left -= k
            n += 1
        out[i] = n


class FastResult:
    """Raw outcome of the compiled core."""

    def __init__(self, state, PS, ACTV, CT, CN, nchunk):
        self.state = state
        self.PS = PS
        self.ACTV = ACTV
        self.CT = CT
        self.CN = CN
        self.nchunk = nchunk

    @property
    def error(self) -> int:
        return int(self.state[ERR])

    @property
    def total_cycles(self) -> int:
        return int(self.state[FINISHED])

    @property
    def counts(self) -> dict:
        st = self.state
        return {"ACT": int(st[N_ACT]), "RD": int(st[N_RD]), "WR": int(st[N_WR]),
                "PRE": int(st[N_PRE]), "REF": int(st[N_REF])}

    def violations(self, max_outstanding: int) -> list[str]:
        st = self.state
        out = [f"pass {i}: DMA into a buffer still being computed on" for i in range(int(st[VIOL]))][:1]
        if st[MAX_INFL] > max_outstanding:
            out.append("outstanding limit exceeded")
        if st[BEATS_REQ] != st[BEATS_DEL]:
            out.append(f"beats requested {st[BEATS_REQ]} != delivered {st[BEATS_DEL]}")
        return out

    def windows(self):
        PS = self.PS
        return (PS[:, P_WS].tolist(), PS[:, P_CE].tolist(), PS[:, P_CS].tolist(), PS[:, P_CEND].tolist())

    def spans(self) -> list[dict]:
        PS = self.PS
        ifm, w = DATA_TYPES[0], DATA_TYPES[1]
        return [{ifm: (int(r[P_SPAN0]), int(r[P_SPAN0 + 1])), w: (int(r[P_SPAN0 + 2]), int(r[P_SPAN0 + 3]))}
                for r in PS]

    def ofm_periods(self) -> list:
        return [[int(a), int(b)] for a, b in self.ACTV if a >= 0]

    def chunks(self) -> dict:
        return {dt: (self.CT[j, :self.nchunk[j]].tolist(), self.CN[j, :self.nchunk[j]].tolist())
                for j, dt in enumerate(DATA_TYPES)}


def run_fast(layer: LayerShape, tile: TileConfig, bus: BusConfig, dram: DramConfig,
             accel: AccelConfig) -> FastResult:
    PS, OFF, BA, BB, BW, ngroups = build_inputs(layer, tile, dram, accel)
    cf = config_vector(dram, bus, accel)
    max_units = max(1, -(-accel.max_burst_beats // dram.dram_burst_beats))
    ev_cap = 1 << 14
    while True:
        res = FastResult(*run_core(cf, PS.copy(), OFF, BA, BB, BW, ngroups, dram.n_banks, max_units, ev_cap))
        # a full event heap is the only error worth retrying
        if res.error == 1:
            ev_cap *= 4
            continue
        return res
