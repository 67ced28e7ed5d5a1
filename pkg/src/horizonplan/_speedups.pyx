# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the planner inner loops.

These kernels mirror the pure-Python engines operation for operation: the
same SplitMix64 draws at the same choice points, the same tie-breaking keys,
and the same floating-point accumulation order, so a fixed seed produces
bit-identical results on either engine (asserted by the equivalence tests).

States stay opaque Python objects; a :class:`StateSpace` interns them to
integer ids and memoizes the domain callbacks (action sets, costs, successor
distributions, heuristic values, deterministic policy choices) so the search
loops run entirely on flat C++ containers between cache misses.
"""

import time as _time

from cython.operator cimport dereference as deref
from libc.math cimport INFINITY, fabs, log, sqrt
from libc.stdint cimport int64_t, uint64_t
from libcpp.algorithm cimport sort as cpp_sort
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

NONTERMINAL = 0
GOAL = 1
DEAD_END = 2


# --- SplitMix64, identical to horizonplan.rng -------------------------------

cdef inline uint64_t _rng_next(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _rng_double(uint64_t* state) nogil:
    return <double>(_rng_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline uint64_t _rng_below(uint64_t* state, uint64_t n) nogil:
    return _rng_next(state) % n


# --- per-object value caches -------------------------------------------------

cdef class _FloatCache:
    cdef vector[double] values
    cdef vector[signed char] known


cdef class _IndexCache:
    cdef vector[int] values
    cdef vector[signed char] known


cdef class StateSpace:
    """Interned view of a memoizing model wrapper.

    Safe to share across planning calls over the same model: everything here
    is a pure function of the model, never of search state.
    """

    cdef public object cached
    cdef dict sid_of
    cdef list states
    cdef vector[int] kind
    cdef vector[signed char] built
    cdef vector[int] act_start
    cdef vector[int] act_count
    cdef vector[double] act_cost
    cdef vector[int] succ_start
    cdef vector[int] succ_count
    cdef vector[int] succ_sid
    cdef vector[double] succ_p
    cdef public double gamma
    cdef public double dead_end_value
    cdef dict caches

    def __init__(self, cached):
        self.cached = cached
        self.sid_of = {}
        self.states = []
        self.gamma = cached.gamma
        self.dead_end_value = cached.dead_end_value
        self.caches = {}

    cdef int intern(self, object state) except -1:
        cdef object sid_obj = self.sid_of.get(state)
        cdef int sid
        if sid_obj is not None:
            return <int>sid_obj
        sid = len(self.states)
        self.sid_of[state] = sid
        self.states.append(state)
        self.kind.push_back(<int>self.cached.terminal_kind(state))
        self.built.push_back(0)
        self.act_start.push_back(-1)
        self.act_count.push_back(0)
        return sid

    cdef int ensure_entry(self, int sid) except -1:
        if self.built[sid]:
            return 0
        cdef object entry = self.cached.entry(self.states[sid])
        cdef tuple costs = entry[1]
        cdef tuple trans = entry[2]
        cdef int j, child
        self.act_start[sid] = <int>self.act_cost.size()
        self.act_count[sid] = len(costs)
        for j in range(len(costs)):
            self.act_cost.push_back(<double>costs[j])
            self.succ_start.push_back(<int>self.succ_sid.size())
            self.succ_count.push_back(len(trans[j]))
            for s2, p in trans[j]:
                child = self.intern(s2)
                self.succ_sid.push_back(child)
                self.succ_p.push_back(<double>p)
        self.built[sid] = 1
        return 0

    cdef _FloatCache float_cache(self, object key):
        cdef _FloatCache cache = self.caches.get(key)
        if cache is None:
            cache = _FloatCache()
            self.caches[key] = cache
        return cache

    cdef _IndexCache index_cache(self, object key):
        cdef _IndexCache cache = self.caches.get(key)
        if cache is None:
            cache = _IndexCache()
            self.caches[key] = cache
        return cache

    cdef double h_of(self, _FloatCache cache, object heuristic, int sid) except? -1e308:
        if cache.known.size() <= <size_t>sid:
            cache.known.resize(len(self.states), 0)
            cache.values.resize(len(self.states), 0.0)
        if not cache.known[sid]:
            cache.values[sid] = <double>heuristic(self.states[sid], 0)
            cache.known[sid] = 1
        return cache.values[sid]

    cdef int lookup_of(self, _IndexCache cache, object policy, int sid) except -1:
        if cache.known.size() <= <size_t>sid:
            cache.known.resize(len(self.states), 0)
            cache.values.resize(len(self.states), 0)
        if not cache.known[sid]:
            cache.values[sid] = <int>policy.choose_index(self.cached, self.states[sid], None)
            cache.known[sid] = 1
        return cache.values[sid]

    def state_of(self, int sid):
        return self.states[sid]

    def size(self):
        return len(self.states)


# --- base-policy machinery ----------------------------------------------------

cdef enum PolicyKind:
    POLICY_NONE = 0
    POLICY_RANDOM = 1
    POLICY_GREEDY = 2
    POLICY_LOOKUP = 3


cdef class _Source:
    """Resolved heuristic-source/base-policy descriptor for one search."""

    cdef StateSpace space
    cdef bint sampled
    cdef object det_obj
    cdef _FloatCache det_cache
    cdef int policy_kind
    cdef object policy_obj
    cdef _FloatCache greedy_cache
    cdef _IndexCache lookup_cache

    def __init__(self, StateSpace space, spec, bint as_policy):
        kind, payload = spec
        self.space = space
        self.policy_kind = POLICY_NONE
        if kind == "det" and not as_policy:
            self.sampled = False
            self.det_obj = payload
            self.det_cache = space.float_cache(payload)
            return
        self.sampled = True
        if kind == "random":
            self.policy_kind = POLICY_RANDOM
        elif kind == "greedy":
            self.policy_kind = POLICY_GREEDY
            self.policy_obj = payload
            self.greedy_cache = space.float_cache(payload)
        elif kind == "lookup":
            self.policy_kind = POLICY_LOOKUP
            self.policy_obj = payload
            self.lookup_cache = space.index_cache(payload)
        else:
            raise ValueError(f"unknown source spec {kind!r}")

    cdef int choose(self, int sid, uint64_t* rng) except -1:
        """One base-policy decision; draw discipline matches the pure engine."""
        cdef StateSpace sp = self.space
        cdef int base, count, j, k, s0, sc, best_j
        cdef double acc, q, best
        cdef vector[double] scores
        cdef vector[int] ties
        count = sp.act_count[sid]
        if self.policy_kind == POLICY_RANDOM:
            return <int>_rng_below(rng, count)
        if self.policy_kind == POLICY_LOOKUP:
            return sp.lookup_of(self.lookup_cache, self.policy_obj, sid)
        # greedy in a depth-invariant heuristic, ties uniform (one draw)
        base = sp.act_start[sid]
        best = INFINITY
        scores.reserve(count)
        for j in range(count):
            acc = 0.0
            s0 = sp.succ_start[base + j]
            sc = sp.succ_count[base + j]
            for k in range(s0, s0 + sc):
                acc += sp.succ_p[k] * sp.h_of(self.greedy_cache, self.policy_obj, sp.succ_sid[k])
            q = sp.act_cost[base + j] + sp.gamma * acc
            scores.push_back(q)
            if q < best:
                best = q
        for j in range(count):
            if scores[j] == best:
                ties.push_back(j)
        return ties[<int>_rng_below(rng, ties.size())]

    cdef double simulate(self, int sid, int d, uint64_t* rng) except? -1e308:
        """Discounted base-policy rollout cost; mirrors simulate_policy."""
        cdef StateSpace sp = self.space
        cdef double total = 0.0
        cdef double disc = 1.0
        cdef double u, cum
        cdef int step, j, base, s0, sc, k, kind
        for step in range(d):
            kind = sp.kind[sid]
            if kind == GOAL:
                return total
            if kind == DEAD_END:
                return total + disc * sp.dead_end_value
            sp.ensure_entry(sid)
            j = self.choose(sid, rng)
            base = sp.act_start[sid]
            total += disc * sp.act_cost[base + j]
            # one-draw categorical pick over the stored successor order
            u = _rng_double(rng)
            s0 = sp.succ_start[base + j]
            sc = sp.succ_count[base + j]
            cum = 0.0
            sid = sp.succ_sid[s0 + sc - 1]
            for k in range(s0, s0 + sc):
                cum += sp.succ_p[k]
                if u < cum:
                    sid = sp.succ_sid[k]
                    break
            disc *= sp.gamma
        if sp.kind[sid] == DEAD_END:
            return total + disc * sp.dead_end_value
        return total

    cdef double initial_value(self, int sid, int d, uint64_t* rng) except? -1e308:
        if self.sampled:
            return self.simulate(sid, d, rng)
        return self.space.h_of(self.det_cache, self.det_obj, sid)


cdef inline int _pick_successor(StateSpace sp, int slot, uint64_t* rng) nogil:
    cdef double u = _rng_double(rng)
    cdef double cum = 0.0
    cdef int s0 = sp.succ_start[slot]
    cdef int sc = sp.succ_count[slot]
    cdef int k
    cdef int sid = sp.succ_sid[s0 + sc - 1]
    for k in range(s0, s0 + sc):
        cum += sp.succ_p[k]
        if u < cum:
            sid = sp.succ_sid[k]
            break
    return sid


# --- anytime AND/OR search ----------------------------------------------------

cdef struct TipEntry:
    double magnitude
    int index      # creation index (tie-break)
    int node


cdef inline bint _tip_less(const TipEntry& a, const TipEntry& b) nogil:
    if a.magnitude != b.magnitude:
        return a.magnitude < b.magnitude
    return a.index < b.index


cdef class _BoundedQueue:
    """Keep the n smallest (|delta|, creation) tips, then pop ascending.

    Internally a max-heap ordered by ``_tip_less`` (worst at the root) so an
    offer is O(log n); ``finish`` sorts the survivors ascending for popping.
    """

    cdef vector[TipEntry] heap
    cdef int capacity
    cdef int cursor

    def __cinit__(self):
        self.capacity = 0
        self.cursor = 0

    cdef void reset(self, int capacity):
        self.heap.clear()
        self.capacity = capacity
        self.cursor = 0

    cdef void _sift_down(self, size_t pos) nogil:
        cdef TipEntry item = self.heap[pos]
        cdef size_t n = self.heap.size()
        cdef size_t child
        while True:
            child = 2 * pos + 1
            if child >= n:
                break
            if child + 1 < n and _tip_less(self.heap[child], self.heap[child + 1]):
                child += 1
            if not _tip_less(item, self.heap[child]):
                break
            self.heap[pos] = self.heap[child]
            pos = child
        self.heap[pos] = item

    cdef void offer(self, double magnitude, int index, int node):
        cdef TipEntry e
        cdef size_t pos, parent
        e.magnitude = magnitude
        e.index = index
        e.node = node
        if <int>self.heap.size() < self.capacity:
            self.heap.push_back(e)
            pos = self.heap.size() - 1
            while pos > 0:
                parent = (pos - 1) >> 1
                if not _tip_less(self.heap[parent], e):
                    break
                self.heap[pos] = self.heap[parent]
                pos = parent
            self.heap[pos] = e
            return
        if self.capacity > 0 and _tip_less(e, self.heap[0]):
            self.heap[0] = e
            self._sift_down(0)

    cdef void finish(self):
        cpp_sort(self.heap.begin(), self.heap.end(), _tip_less)

    cdef bint empty(self):
        return self.cursor >= <int>self.heap.size()

    cdef int pop(self):
        cdef int node = self.heap[self.cursor].node
        self.cursor += 1
        return node


cdef class _AotGraph:
    cdef StateSpace space
    cdef int horizon
    cdef unordered_map[int64_t, int] node_of
    # or-node arrays (index = creation order)
    cdef vector[int] o_sid
    cdef vector[int] o_d
    cdef vector[double] o_V
    cdef vector[int] o_samples
    cdef vector[signed char] o_terminal
    cdef vector[signed char] o_expanded
    cdef vector[int] o_marked          # and index or -1
    cdef vector[int] o_and_start
    cdef vector[int] o_and_count
    cdef vector[int] o_parent_head     # head of parent-edge list or -1
    cdef vector[int] o_created_by      # expansion counter at creation
    cdef vector[double] o_delta
    cdef vector[int] o_delta_epoch
    cdef vector[int] o_best_epoch
    cdef vector[signed char] o_queued
    # parent edge pool
    cdef vector[int] pe_and
    cdef vector[int] pe_next
    # and-node arrays
    cdef vector[int] a_owner
    cdef vector[int] a_slot            # global action slot in the space
    cdef vector[double] a_cost
    cdef vector[double] a_Q
    cdef vector[double] a_delta
    cdef vector[signed char] a_dirty
    cdef vector[int] a_child_start
    cdef vector[int] a_child_count
    # child edge pool
    cdef vector[int] c_node
    cdef vector[double] c_p
    cdef vector[vector[int]] levels
    cdef int epoch

    def __init__(self, StateSpace space, int horizon):
        self.space = space
        self.horizon = horizon
        self.levels.resize(horizon + 1)
        self.epoch = 0

    cdef int get_or_create(self, int sid, int d, _Source source, uint64_t* rng,
                           int expansion_id) except -1:
        cdef int64_t key = <int64_t>sid * (self.horizon + 1) + d
        cdef unordered_map[int64_t, int].iterator it = self.node_of.find(key)
        if it != self.node_of.end():
            return deref(it).second
        cdef int idx = <int>self.o_sid.size()
        cdef int kind = self.space.kind[sid]
        cdef double value
        cdef bint terminal
        cdef signed char terminal_flag
        if kind == GOAL:
            value, terminal = 0.0, True
        elif kind == DEAD_END:
            value, terminal = self.space.dead_end_value, True
        elif d == 0:
            value, terminal = 0.0, True
        else:
            value, terminal = 0.0, False
        self.node_of[key] = idx
        self.o_sid.push_back(sid)
        self.o_d.push_back(d)
        self.o_V.push_back(value)
        self.o_samples.push_back(0)
        # conditional expressions must not feed push_back directly: they bind
        # to the const-ref parameter through a dangling FakeReference temp
        terminal_flag = 1 if terminal else 0
        self.o_terminal.push_back(terminal_flag)
        self.o_expanded.push_back(0)
        self.o_marked.push_back(-1)
        self.o_and_start.push_back(-1)
        self.o_and_count.push_back(0)
        self.o_parent_head.push_back(-1)
        self.o_created_by.push_back(expansion_id)
        self.o_delta.push_back(0.0)
        self.o_delta_epoch.push_back(-1)
        self.o_best_epoch.push_back(-1)
        self.o_queued.push_back(0)
        self.levels[d].push_back(idx)
        if not terminal:
            self.o_V[idx] = source.initial_value(sid, d, rng)
            if source.sampled:
                self.o_samples[idx] = 1
        return idx

    cdef inline bint is_tip(self, int node):
        return not self.o_expanded[node] and not self.o_terminal[node]

    cdef int expand(self, int node, _Source source, uint64_t* rng,
                    int expansion_id) except -1:
        cdef StateSpace sp = self.space
        cdef int sid = self.o_sid[node]
        cdef int d = self.o_d[node]
        cdef int base, count, j, k, s0, sc, child, aidx
        sp.ensure_entry(sid)
        base = sp.act_start[sid]
        count = sp.act_count[sid]
        self.o_and_start[node] = <int>self.a_owner.size()
        self.o_and_count[node] = count
        for j in range(count):
            aidx = <int>self.a_owner.size()
            self.a_owner.push_back(node)
            self.a_slot.push_back(base + j)
            self.a_cost.push_back(sp.act_cost[base + j])
            self.a_Q.push_back(0.0)
            self.a_delta.push_back(0.0)
            self.a_dirty.push_back(0)
            self.a_child_start.push_back(<int>self.c_node.size())
            s0 = sp.succ_start[base + j]
            sc = sp.succ_count[base + j]
            self.a_child_count.push_back(sc)
            for k in range(s0, s0 + sc):
                child = self.get_or_create(sp.succ_sid[k], d - 1, source, rng, expansion_id)
                self.c_node.push_back(child)
                self.c_p.push_back(sp.succ_p[k])
                self.pe_and.push_back(aidx)
                self.pe_next.push_back(self.o_parent_head[child])
                self.o_parent_head[child] = <int>self.pe_and.size() - 1
        self.o_expanded[node] = 1
        return 0

    cdef void update_ancestors(self, int start, _Source source, uint64_t* rng,
                               int expansion_id):
        """Worklist Bellman maintenance; pops ascending (d, creation index)."""
        cdef StateSpace sp = self.space
        cdef double gamma = sp.gamma
        cdef vector[int64_t] heap
        cdef int64_t key
        cdef int node, a0, ac, j, c0, cc, k, child, edge, aidx
        cdef double acc, best, old

        # local binary min-heap over (d << 32 | creation index)
        if self.o_expanded[start]:
            a0 = self.o_and_start[start]
            for j in range(self.o_and_count[start]):
                self.a_dirty[a0 + j] = 1
            heap.push_back((<int64_t>self.o_d[start] << 32) | start)
            self.o_queued[start] = 1
        else:
            edge = self.o_parent_head[start]
            while edge != -1:
                aidx = self.pe_and[edge]
                self.a_dirty[aidx] = 1
                node = self.a_owner[aidx]
                if not self.o_queued[node]:
                    self.o_queued[node] = 1
                    heap.push_back((<int64_t>self.o_d[node] << 32) | node)
                    _sift_up(heap, heap.size() - 1)
                edge = self.pe_next[edge]

        while heap.size() > 0:
            key = heap[0]
            _heap_pop(heap)
            node = <int>(key & 0xFFFFFFFF)
            if not self.o_queued[node]:
                continue
            self.o_queued[node] = 0
            a0 = self.o_and_start[node]
            ac = self.o_and_count[node]
            for j in range(a0, a0 + ac):
                if not self.a_dirty[j]:
                    continue
                self.a_dirty[j] = 0
                acc = 0.0
                c0 = self.a_child_start[j]
                cc = self.a_child_count[j]
                for k in range(c0, c0 + cc):
                    child = self.c_node[k]
                    if (source.sampled and self.is_tip(child)
                            and self.o_created_by[child] != expansion_id):
                        self.o_V[child] += (
                            source.simulate(self.o_sid[child], self.o_d[child], rng)
                            - self.o_V[child]
                        ) / (self.o_samples[child] + 1)
                        self.o_samples[child] += 1
                    acc += self.c_p[k] * self.o_V[child]
                self.a_Q[j] = self.a_cost[j] + gamma * acc
            best = INFINITY
            for j in range(a0, a0 + ac):
                if self.a_Q[j] < best:
                    best = self.a_Q[j]
            if self.o_marked[node] == -1 or self.a_Q[self.o_marked[node]] != best:
                for j in range(a0, a0 + ac):
                    if self.a_Q[j] == best:
                        self.o_marked[node] = j
                        break
            old = self.o_V[node]
            self.o_V[node] = best
            if fabs(best - old) > 1e-12:
                edge = self.o_parent_head[node]
                while edge != -1:
                    aidx = self.pe_and[edge]
                    self.a_dirty[aidx] = 1
                    child = self.a_owner[aidx]
                    if not self.o_queued[child]:
                        self.o_queued[child] = 1
                        heap.push_back((<int64_t>self.o_d[child] << 32) | child)
                        _sift_up(heap, heap.size() - 1)
                    edge = self.pe_next[edge]

    cdef void compute_deltas(self, _BoundedQueue in_q, _BoundedQueue out_q, int root):
        """Best-partial-graph flags plus impact scores, mirroring the pure pass."""
        cdef StateSpace sp = self.space
        cdef double gamma = sp.gamma
        cdef vector[int] stack
        cdef int node, j, k, a0, ac, c0, cc, child, d, i, marked
        cdef double value, node_delta, delta, runner_up, cand, q
        self.epoch += 1
        cdef int epoch = self.epoch
        # traversal along marked actions
        stack.push_back(root)
        self.o_best_epoch[root] = epoch
        while stack.size() > 0:
            node = stack[stack.size() - 1]
            stack.pop_back()
            if self.o_terminal[node] or not self.o_expanded[node]:
                continue
            j = self.o_marked[node]
            c0 = self.a_child_start[j]
            cc = self.a_child_count[j]
            for k in range(c0, c0 + cc):
                child = self.c_node[k]
                if self.o_best_epoch[child] != epoch:
                    self.o_best_epoch[child] = epoch
                    stack.push_back(child)
        # top-down impact scores, deepest horizon level first
        self.o_delta[root] = INFINITY
        self.o_delta_epoch[root] = epoch
        for d in range(self.horizon, 0, -1):
            for i in range(<int>self.levels[d].size()):
                node = self.levels[d][i]
                if (self.o_delta_epoch[node] != epoch or self.o_terminal[node]
                        or not self.o_expanded[node]):
                    continue
                value = self.o_V[node]
                node_delta = self.o_delta[node]
                marked = self.o_marked[node]
                a0 = self.o_and_start[node]
                ac = self.o_and_count[node]
                for j in range(a0, a0 + ac):
                    if self.o_best_epoch[node] == epoch:
                        if j == marked:
                            runner_up = INFINITY
                            for k in range(a0, a0 + ac):
                                if k != j:
                                    q = self.a_Q[k] - value
                                    if q < runner_up:
                                        runner_up = q
                            delta = node_delta if node_delta < runner_up else runner_up
                        else:
                            delta = value - self.a_Q[j]
                    else:
                        delta = node_delta + (value - self.a_Q[j])
                    self.a_delta[j] = delta
                    c0 = self.a_child_start[j]
                    cc = self.a_child_count[j]
                    for k in range(c0, c0 + cc):
                        child = self.c_node[k]
                        cand = delta / (gamma * self.c_p[k])
                        if (self.o_delta_epoch[child] != epoch
                                or fabs(cand) < fabs(self.o_delta[child])):
                            self.o_delta[child] = cand
                            self.o_delta_epoch[child] = epoch
        # bounded tip queues in (level desc, creation) iteration order
        for d in range(self.horizon, -1, -1):
            for i in range(<int>self.levels[d].size()):
                node = self.levels[d][i]
                if self.is_tip(node):
                    if self.o_best_epoch[node] == epoch:
                        in_q.offer(fabs(self.o_delta[node]), node, node)
                    else:
                        out_q.offer(fabs(self.o_delta[node]), node, node)
        in_q.finish()
        out_q.finish()


cdef void _sift_up(vector[int64_t]& heap, size_t pos) nogil:
    cdef int64_t item = heap[pos]
    cdef size_t parent
    while pos > 0:
        parent = (pos - 1) >> 1
        if heap[parent] <= item:
            break
        heap[pos] = heap[parent]
        pos = parent
    heap[pos] = item


cdef void _heap_pop(vector[int64_t]& heap) nogil:
    cdef int64_t item = heap[heap.size() - 1]
    heap.pop_back()
    cdef size_t pos = 0
    cdef size_t child
    cdef size_t n = heap.size()
    if n == 0:
        return
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and heap[child + 1] < heap[child]:
            child += 1
        if heap[child] >= item:
            break
        heap[pos] = heap[child]
        pos = child
    heap[pos] = item


def aot_plan(StateSpace space, object state, int horizon, double p, int budget,
             int batch, double time_ms, uint64_t seed, tuple source_spec,
             int record_trace):
    """Compiled twin of the anytime planner loop."""
    cdef uint64_t rng = seed
    cdef _Source source = _Source(space, source_spec, False)
    cdef _AotGraph graph = _AotGraph(space, horizon)
    cdef int root_sid = space.intern(state)
    if space.kind[root_sid] != NONTERMINAL:
        raise ValueError(f"initial state {state!r} is terminal")
    cdef int root = graph.get_or_create(root_sid, horizon, source, &rng, 0)
    cdef _BoundedQueue in_q = _BoundedQueue()
    cdef _BoundedQueue out_q = _BoundedQueue()
    cdef int expansions = 0
    cdef int delta_passes = 0
    cdef int take, i, tip, n_tips
    cdef bint want_out
    cdef double deadline = -1.0
    cdef vector[int] picked
    cdef vector[int] trace
    if time_ms >= 0:
        deadline = _time.perf_counter() + time_ms / 1000.0

    while True:
        if budget >= 0 and expansions >= budget:
            break
        if deadline >= 0 and expansions > 0 and _time.perf_counter() >= deadline:
            break
        take = batch
        if budget >= 0 and budget - expansions < take:
            take = budget - expansions
        in_q.reset(take)
        out_q.reset(take)
        graph.compute_deltas(in_q, out_q, root)
        delta_passes += 1
        picked.clear()
        for i in range(take):
            if in_q.empty() and out_q.empty():
                break
            if p <= 0.0:
                want_out = False
            elif p >= 1.0:
                want_out = True
            else:
                want_out = _rng_double(&rng) < p
            if want_out:
                if not out_q.empty():
                    picked.push_back(out_q.pop())
                elif 0.0 < p < 1.0 and not in_q.empty():
                    picked.push_back(in_q.pop())
                else:
                    break
            else:
                if not in_q.empty():
                    picked.push_back(in_q.pop())
                elif 0.0 < p < 1.0 and not out_q.empty():
                    picked.push_back(out_q.pop())
                else:
                    break
        n_tips = <int>picked.size()
        if n_tips == 0:
            break
        for i in range(n_tips):
            if deadline >= 0 and expansions > 0 and _time.perf_counter() >= deadline:
                break
            tip = picked[i]
            expansions += 1
            graph.expand(tip, source, &rng, expansions)
            if record_trace:
                trace.push_back(graph.o_sid[tip])
                trace.push_back(graph.o_d[tip])
            graph.update_ancestors(tip, source, &rng, expansions)

    cdef int a0 = graph.o_and_start[root]
    cdef int ac = graph.o_and_count[root]
    q_list = [graph.a_Q[j] for j in range(a0, a0 + ac)] if ac > 0 else []
    cdef int marked_j = -1
    if graph.o_marked[root] != -1:
        marked_j = graph.o_marked[root] - a0
    trace_list = None
    if record_trace:
        trace_list = [(trace[2 * i], trace[2 * i + 1]) for i in range(<int>trace.size() // 2)]
    return (marked_j, graph.o_V[root], q_list, expansions,
            <int>graph.o_sid.size(), delta_passes, trace_list)


# --- UCT ----------------------------------------------------------------------

cdef class _UctStore:
    cdef unordered_map[int64_t, int] node_of
    cdef vector[int] visits
    cdef vector[int] slot_start
    cdef vector[int] n_actions
    cdef vector[int] counts
    cdef vector[double] values


cdef class _UctSearch:
    cdef StateSpace space
    cdef _UctStore store
    cdef _Source policy
    cdef double exploration      # < 0 means adaptive
    cdef int horizon
    cdef bint audit
    cdef int violations

    cdef double rollout(self, int sid, int d, uint64_t* rng) except? -1e308:
        cdef StateSpace sp = self.space
        cdef int kind = sp.kind[sid]
        if kind == GOAL:
            return 0.0
        if kind == DEAD_END:
            return sp.dead_end_value
        if d == 0:
            return 0.0
        cdef int64_t key = <int64_t>sid * (self.horizon + 1) + d
        cdef unordered_map[int64_t, int].iterator it = self.store.node_of.find(key)
        cdef int idx, count, j, slot, base
        cdef double best, score, c, b, nv, u, cum
        cdef vector[double] scores
        cdef vector[int] ties
        cdef bint has_untried
        sp.ensure_entry(sid)
        count = sp.act_count[sid]
        if it == self.store.node_of.end():
            idx = <int>self.store.visits.size()
            self.store.node_of[key] = idx
            self.store.visits.push_back(0)
            self.store.slot_start.push_back(<int>self.store.counts.size())
            self.store.n_actions.push_back(count)
            for j in range(count):
                self.store.counts.push_back(0)
                self.store.values.push_back(0.0)
            return self.policy.simulate(sid, d, rng)
        idx = deref(it).second
        slot = self.store.slot_start[idx]
        best = INFINITY
        has_untried = False
        scores.reserve(count)
        for j in range(count):
            if self.store.counts[slot + j] == 0:
                score = -INFINITY
                has_untried = True
            else:
                if self.exploration < 0:
                    c = fabs(self.store.values[slot + j])
                else:
                    c = self.exploration
                b = c * sqrt(2.0 * log(<double>self.store.visits[idx])
                             / <double>self.store.counts[slot + j])
                score = self.store.values[slot + j] - b
            scores.push_back(score)
            if score < best:
                best = score
        for j in range(count):
            if scores[j] == best:
                ties.push_back(j)
        j = ties[<int>_rng_below(rng, ties.size())]
        if self.audit and has_untried and self.store.counts[slot + j] != 0:
            self.violations += 1
        base = sp.act_start[sid]
        u = _rng_double(rng)
        cum = 0.0
        cdef int s0 = sp.succ_start[base + j]
        cdef int sc = sp.succ_count[base + j]
        cdef int k
        cdef int nxt = sp.succ_sid[s0 + sc - 1]
        for k in range(s0, s0 + sc):
            cum += sp.succ_p[k]
            if u < cum:
                nxt = sp.succ_sid[k]
                break
        nv = sp.act_cost[base + j] + sp.gamma * self.rollout(nxt, d - 1, rng)
        self.store.visits[idx] += 1
        self.store.counts[slot + j] += 1
        self.store.values[slot + j] += (nv - self.store.values[slot + j]) \
            / self.store.counts[slot + j]
        return nv


def uct_plan(StateSpace space, object state, int horizon, int budget, double time_ms,
             double exploration, uint64_t seed, tuple policy_spec, int audit):
    """Compiled twin of the UCT loop (exploration < 0 means adaptive)."""
    cdef uint64_t rng = seed
    cdef _UctSearch search = _UctSearch()
    search.space = space
    search.store = _UctStore()
    search.policy = _Source(space, policy_spec, True)
    search.exploration = exploration
    search.horizon = horizon
    search.audit = audit != 0
    search.violations = 0
    cdef int root_sid = space.intern(state)
    if space.kind[root_sid] != NONTERMINAL:
        raise ValueError(f"initial state {state!r} is terminal")
    cdef double deadline = -1.0
    if time_ms >= 0:
        deadline = _time.perf_counter() + time_ms / 1000.0
    cdef int rollouts = 0
    cdef int i
    for i in range(budget):
        if deadline >= 0 and rollouts > 0 and _time.perf_counter() >= deadline:
            break
        search.rollout(root_sid, horizon, &rng)
        rollouts += 1
    cdef int64_t key = <int64_t>root_sid * (horizon + 1) + horizon
    cdef int idx = search.store.node_of[key]
    cdef int slot = search.store.slot_start[idx]
    cdef int count = search.store.n_actions[idx]
    cdef int best_j = 0
    cdef double best = INFINITY
    cdef bint found = False
    cdef int j
    for j in range(count):
        if search.store.counts[slot + j] > 0 and search.store.values[slot + j] < best:
            best = search.store.values[slot + j]
            best_j = j
            found = True
    if not found:
        best_j = 0
    q_list = [search.store.values[slot + j] for j in range(count)]
    return (best_j, search.store.values[slot + best_j], q_list, rollouts,
            <int>search.store.visits.size(), search.violations)


# --- LRTDP ----------------------------------------------------------------------

cdef class _LrtdpSearch:
    cdef StateSpace space
    cdef object heuristic
    cdef _FloatCache h_cache
    cdef double epsilon
    cdef int horizon
    cdef unordered_map[int64_t, int] slot_of
    cdef vector[double] V
    cdef vector[signed char] solved

    cdef inline int64_t key(self, int sid, int d):
        return <int64_t>sid * (self.horizon + 1) + d

    cdef int slot(self, int sid, int d) except -1:
        """Lazy value-table entry; terminals are born solved."""
        cdef int64_t k = self.key(sid, d)
        cdef unordered_map[int64_t, int].iterator it = self.slot_of.find(k)
        if it != self.slot_of.end():
            return deref(it).second
        cdef int idx = <int>self.V.size()
        cdef int kind = self.space.kind[sid]
        cdef double v
        cdef signed char done
        if kind == GOAL:
            v, done = 0.0, 1
        elif kind == DEAD_END:
            v, done = self.space.dead_end_value, 1
        elif d == 0:
            v, done = 0.0, 1
        else:
            v = self.space.h_of(self.h_cache, self.heuristic, sid)
            done = 0
        self.slot_of[k] = idx
        self.V.push_back(v)
        self.solved.push_back(done)
        return idx

    cdef void q_values(self, int sid, int d, vector[double]& out):
        cdef StateSpace sp = self.space
        cdef int base, count, j, k, s0, sc, cslot
        cdef double acc
        sp.ensure_entry(sid)
        base = sp.act_start[sid]
        count = sp.act_count[sid]
        out.clear()
        for j in range(count):
            acc = 0.0
            s0 = sp.succ_start[base + j]
            sc = sp.succ_count[base + j]
            for k in range(s0, s0 + sc):
                cslot = self.slot(sp.succ_sid[k], d - 1)
                acc += sp.succ_p[k] * self.V[cslot]
            out.push_back(sp.act_cost[base + j] + sp.gamma * acc)
        return

    cdef int greedy(self, vector[double]& qs):
        cdef int best = 0
        cdef int j
        for j in range(1, <int>qs.size()):
            if qs[j] < qs[best]:
                best = j
        return best

    cdef void trial(self, int root_sid, uint64_t* rng):
        cdef StateSpace sp = self.space
        cdef vector[int64_t] path
        cdef vector[double] qs
        cdef int sid = root_sid
        cdef int d = self.horizon
        cdef int idx, j, base
        while True:
            idx = self.slot(sid, d)
            if self.solved[idx]:
                break
            path.push_back(self.key(sid, d))
            self.q_values(sid, d, qs)
            j = self.greedy(qs)
            self.V[idx] = qs[j]
            base = sp.act_start[sid]
            sid = _pick_successor(sp, base + j, rng)
            d -= 1
        cdef int64_t node_key
        while path.size() > 0:
            node_key = path[path.size() - 1]
            path.pop_back()
            if not self.check_solved(<int>(node_key // (self.horizon + 1)),
                                     <int>(node_key % (self.horizon + 1))):
                break

    cdef bint check_solved(self, int sid, int d):
        cdef StateSpace sp = self.space
        cdef bint ok = True
        cdef vector[int64_t] open_stack
        cdef vector[int64_t] closed
        cdef unordered_set[int64_t] seen
        cdef vector[double] qs
        cdef int64_t k, child_key
        cdef int idx, j, base, s0, sc, i, child_slot, csid, cd
        idx = self.slot(sid, d)
        if not self.solved[idx]:
            open_stack.push_back(self.key(sid, d))
            seen.insert(self.key(sid, d))
        while open_stack.size() > 0:
            k = open_stack[open_stack.size() - 1]
            open_stack.pop_back()
            closed.push_back(k)
            csid = <int>(k // (self.horizon + 1))
            cd = <int>(k % (self.horizon + 1))
            idx = self.slot(csid, cd)
            if self.solved[idx]:
                continue
            self.q_values(csid, cd, qs)
            j = self.greedy(qs)
            if fabs(self.V[idx] - qs[j]) > self.epsilon:
                ok = False
                continue
            base = sp.act_start[csid]
            s0 = sp.succ_start[base + j]
            sc = sp.succ_count[base + j]
            for i in range(s0, s0 + sc):
                child_key = self.key(sp.succ_sid[i], cd - 1)
                child_slot = self.slot(sp.succ_sid[i], cd - 1)
                if not self.solved[child_slot] and seen.find(child_key) == seen.end():
                    seen.insert(child_key)
                    open_stack.push_back(child_key)
        if ok:
            for i in range(<int>closed.size()):
                k = closed[i]
                self.solved[self.slot(<int>(k // (self.horizon + 1)),
                                      <int>(k % (self.horizon + 1)))] = 1
        else:
            while closed.size() > 0:
                k = closed[closed.size() - 1]
                closed.pop_back()
                csid = <int>(k // (self.horizon + 1))
                cd = <int>(k % (self.horizon + 1))
                idx = self.slot(csid, cd)
                if self.solved[idx]:
                    continue
                self.q_values(csid, cd, qs)
                self.V[idx] = qs[self.greedy(qs)]
        return ok


def lrtdp_plan(StateSpace space, object state, int horizon, double epsilon,
               int budget, double time_ms, uint64_t seed, object heuristic):
    """Compiled twin of the trial-based planner."""
    cdef uint64_t rng = seed
    cdef _LrtdpSearch search = _LrtdpSearch()
    search.space = space
    search.heuristic = heuristic
    search.h_cache = space.float_cache(heuristic)
    search.epsilon = epsilon
    search.horizon = horizon
    cdef int root_sid = space.intern(state)
    if space.kind[root_sid] != NONTERMINAL:
        raise ValueError(f"initial state {state!r} is terminal")
    cdef double deadline = -1.0
    if time_ms >= 0:
        deadline = _time.perf_counter() + time_ms / 1000.0
    cdef int trials = 0
    cdef int root_idx = search.slot(root_sid, horizon)
    while not search.solved[root_idx]:
        if budget >= 0 and trials >= budget:
            break
        if deadline >= 0 and trials > 0 and _time.perf_counter() >= deadline:
            break
        search.trial(root_sid, &rng)
        trials += 1
    cdef vector[double] qs
    search.q_values(root_sid, horizon, qs)
    cdef int j = search.greedy(qs)
    q_list = [qs[i] for i in range(<int>qs.size())]
    return (j, search.V[root_idx], q_list, trials, <int>search.V.size())
