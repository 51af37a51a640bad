"""Reference computations that never touch the engine's own bookkeeping."""

from collections import defaultdict, deque


def bfs_depth(adjacency, origin, depth):
    dist = {origin: 0}
    q = deque([origin])
    while q:
        u = q.popleft()
        if dist[u] == depth:
            continue
        for v in adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return set(dist)


def replay_trace(rows, horizon, channels_per_provider, n_providers, capacity):
    """Rebuild every metric from the event trace alone.

    Returns a dict with per-provider counters, busy-channel integrals and the
    list of consistency problems found while replaying.
    """
    users = defaultdict(int)               # (cell, ch) -> calls on it
    tenants = defaultdict(set)             # (cell, ch) -> providers with calls on it
    call_provider = {}
    held = set()                           # (cell, ch) borrowed and not yet released
    where = {}                             # call id -> (cell, ch)
    arrivals = defaultdict(int)
    blocked = defaultdict(int)
    offered = defaultdict(float)
    carried = defaultdict(float)
    outcome = {}
    busy_time = defaultdict(float)
    problems = []
    last_t = 0.0

    def owner(ch):
        return ch // channels_per_provider + 1

    def busy_per_owner():
        out = defaultdict(int)
        for key in set(users) | held:
            if users[key] > 0 or key in held:
                out[owner(key[1])] += 1
        return out

    for i, (t, kind, cid, prov, cell, ch, prev, hold, _) in enumerate(rows):
        t = float(t)
        if t < last_t - 1e-12 and t <= horizon:
            problems.append(f"row {i}: time went backwards")
        te = min(t, horizon)
        if te > last_t:
            for p, n in busy_per_owner().items():
                busy_time[p] += n * (te - last_t)
            last_t = te

        if kind == "arrival":
            arrivals[prov] += 1
            offered[prov] += hold
            call_provider[cid] = prov
        elif kind == "block":
            blocked[prov] += 1
            if cid in outcome:
                problems.append(f"row {i}: call {cid} resolved twice")
            outcome[cid] = "blocked"
        elif kind == "borrow":
            key = (cell, ch)
            if users[key] or key in held:
                problems.append(f"row {i}: borrowed a busy channel {key}")
            if owner(ch) == prov:
                problems.append(f"row {i}: borrowed an own channel")
            held.add(key)
        elif kind == "accept":
            key = (cell, ch)
            if cid in outcome:
                problems.append(f"row {i}: call {cid} resolved twice")
            outcome[cid] = "accepted"
            carried[prov] += hold
            users[key] += 1
            tenants[key].add(prov)
            where[cid] = key
        elif kind == "depart":
            key = where.pop(cid)
            users[key] -= 1
            if users[key] == 0:
                tenants[key].clear()
        elif kind == "migrate":
            old = where[cid]
            new = (cell, ch)
            users[old] -= 1
            if users[old] == 0:
                tenants[old].clear()
            users[new] += 1
            tenants[new].add(prov)
            where[cid] = new
        elif kind == "release":
            key = (cell, ch)
            if key not in held:
                problems.append(f"row {i}: released a channel that was not borrowed")
            if users[key]:
                problems.append(f"row {i}: released channel {key} still carrying calls")
            held.discard(key)
        # no double-booking at any boundary
        for key in ((cell, ch),) if ch >= 0 else ():
            if users[key] > capacity:
                problems.append(f"row {i}: {key} over capacity")
            if len(tenants[key]) > 1:
                problems.append(f"row {i}: {key} shared by providers {tenants[key]}")
            if tenants[key] and key in held and owner(key[1]) in tenants[key]:
                problems.append(f"row {i}: owner and borrower both on {key}")

    if horizon > last_t:
        for p, n in busy_per_owner().items():
            busy_time[p] += n * (horizon - last_t)

    for cid in call_provider:
        if cid not in outcome:
            problems.append(f"call {cid} never resolved")

    return {
        "processed": {p: arrivals[p] for p in range(1, n_providers + 1)},
        "blocked": {p: blocked[p] for p in range(1, n_providers + 1)},
        "offered": {p: offered[p] for p in range(1, n_providers + 1)},
        "carried": {p: carried[p] for p in range(1, n_providers + 1)},
        "accepted": {p: sum(1 for c, o in outcome.items() if o == "accepted" and call_provider[c] == p)
                     for p in range(1, n_providers + 1)},
        "busy_time": {p: busy_time[p] for p in range(1, n_providers + 1)},
        "problems": problems,
    }


def metrics_from_replay(rep, horizon, owned_per_provider):
    """R_BL, eta_sys and eta_s per provider and in aggregate."""
    out = {}
    providers = sorted(rep["processed"])
    for p in providers:
        proc = rep["processed"][p]
        out[p] = {
            "R_BL": rep["blocked"][p] / proc if proc else 0.0,
            "eta_sys": rep["carried"][p] / rep["offered"][p] if rep["offered"][p] > 0 else 1.0,
            "eta_s": rep["busy_time"][p] / (horizon * owned_per_provider),
        }
    tot_proc = sum(rep["processed"].values())
    tot_off = sum(rep["offered"].values())
    out["aggregate"] = {
        "R_BL": sum(rep["blocked"].values()) / tot_proc if tot_proc else 0.0,
        "eta_sys": sum(rep["carried"].values()) / tot_off if tot_off > 0 else 1.0,
        "eta_s": sum(rep["busy_time"].values()) / (horizon * owned_per_provider * len(providers)),
    }
    return out


def greedy_repack(own_loads, borrowed_loads, capacity):
    """Release order for borrowed channels: smallest load first, a channel is
    handed back when all its calls fit into the free own slots left."""
    free = sum(capacity - u for u in own_loads)
    released = []
    for ch, load in sorted(borrowed_loads.items(), key=lambda kv: (kv[1], kv[0])):
        if load <= free:
            free -= load
            released.append(ch)
    return released
