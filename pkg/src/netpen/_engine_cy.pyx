# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled transition kernel.

Semantic twin of ``netpen._engine_py``: identical preconditions, mutation
order, reward arithmetic, revealed observation rows, and RNG consumption.
Any change on either side must be mirrored on the other; the parity test
suite replays episodes through both.
"""

from libc.stdint cimport int64_t, uint8_t

import numpy as np

BACKEND = "compiled"

OK = 0
CONNECTION = 1
PERMISSION = 2
UNDEFINED = 3
FAILED = 4

cdef int _OK = 0
cdef int _CONNECTION = 1
cdef int _PERMISSION = 2
cdef int _UNDEFINED = 3
cdef int _FAILED = 4

cdef int _SERVICE_SCAN = 0
cdef int _OS_SCAN = 1
cdef int _SUBNET_SCAN = 2
cdef int _PROCESS_SCAN = 3
cdef int _EXPLOIT = 4
cdef int _PRIVESC = 5
cdef int _NOOP = 6

cdef int _USER = 1
cdef int _ROOT = 2


cdef class Engine:
    cdef int64_t[::1] host_subnet, host_index, host_os, access
    cdef int64_t[::1] a_kind, a_host, a_req, a_os, a_sp, sensitive_slots
    cdef uint8_t[:, ::1] services, processes, adj
    cdef uint8_t[:, :, ::1] fw
    cdef uint8_t[::1] sensitive, compromised, reachable, discovered
    cdef double[::1] value, dvalue, a_cost, a_prob
    cdef uint8_t[::1] _comp_sub
    cdef readonly object obs_array
    cdef double[:, ::1] obs
    cdef int n_hosts, max_hosts, n_subnets, n_services, n_processes, dmz
    cdef int n_cols
    cdef int off_host, off_comp, off_reach, off_disc, off_sens, off_dval
    cdef int off_access, off_os, off_svc, off_proc

    def __init__(self, rt):
        self.n_hosts = rt.n_hosts
        self.max_hosts = rt.max_hosts
        self.n_subnets = rt.n_subnets
        self.dmz = rt.dmz

        self.host_subnet = rt.host_subnet
        self.host_index = rt.host_index
        self.host_os = rt.host_os
        self.services = rt.host_services
        self.processes = rt.host_processes
        self.sensitive = rt.host_sensitive
        self.value = rt.host_value
        self.dvalue = rt.host_dvalue
        self.adj = rt.adj
        self.fw = rt.fw
        self.n_services = rt.host_services.shape[1]
        self.n_processes = rt.host_processes.shape[1]

        self.a_kind = rt.a_kind
        self.a_host = rt.a_host
        self.a_cost = rt.a_cost
        self.a_prob = rt.a_prob
        self.a_req = rt.a_req
        self.a_os = rt.a_os
        self.a_sp = rt.a_sp
        self.sensitive_slots = rt.sensitive_slots

        self.access = rt.access
        self.compromised = rt.compromised
        self.reachable = rt.reachable
        self.discovered = rt.discovered

        self.off_host = rt.off_host
        self.off_comp = rt.off_comp
        self.off_reach = rt.off_reach
        self.off_disc = rt.off_disc
        self.off_sens = rt.off_sens
        self.off_dval = rt.off_dval
        self.off_access = rt.off_access
        self.off_os = rt.off_os
        self.off_svc = rt.off_svc
        self.off_proc = rt.off_proc

        self._comp_sub = np.zeros(self.n_subnets, dtype=np.uint8)
        self.n_cols = rt.n_cols
        # Reused per step; env copies it out after each call.
        self.obs_array = np.zeros((self.max_hosts + 1, self.n_cols), dtype=np.float64)
        self.obs = self.obs_array

    cpdef recompute_reachability(self):
        cdef Py_ssize_t i, j, s, svc
        cdef int64_t sj
        for s in range(self.n_subnets):
            self._comp_sub[s] = 0
        for i in range(self.n_hosts):
            if self.compromised[i]:
                self._comp_sub[self.host_subnet[i]] = 1
        for j in range(self.n_hosts):
            if self.reachable[j]:
                continue
            sj = self.host_subnet[j]
            if sj == self.dmz or self._comp_sub[sj]:
                self.reachable[j] = 1
                continue
            for s in range(self.n_subnets):
                if self._comp_sub[s] and self.adj[s, sj]:
                    for svc in range(self.n_services):
                        if self.fw[s, sj, svc] and self.services[j, svc]:
                            self.reachable[j] = 1
                            break
                    if self.reachable[j]:
                        break

    cdef void _addr(self, Py_ssize_t j):
        self.obs[j, self.host_subnet[j]] = 1.0
        self.obs[j, self.off_host + self.host_index[j]] = 1.0

    cdef void _discovery_row(self, Py_ssize_t j):
        self._addr(j)
        self.obs[j, self.off_disc] = 1.0
        self.obs[j, self.off_reach] = <double> self.reachable[j]
        self.obs[j, self.off_sens] = <double> self.sensitive[j]
        self.obs[j, self.off_dval] = self.dvalue[j]

    cdef void _access_row(self, Py_ssize_t j):
        self._addr(j)
        self.obs[j, self.off_comp] = <double> self.compromised[j]
        self.obs[j, self.off_reach] = <double> self.reachable[j]
        self.obs[j, self.off_disc] = <double> self.discovered[j]
        self.obs[j, self.off_sens] = <double> self.sensitive[j]
        self.obs[j, self.off_access + self.access[j]] = 1.0

    def step(self, int action, object rng, bint force_success=False):
        cdef double[:, ::1] obs = self.obs
        cdef Py_ssize_t r, c
        for r in range(self.max_hosts + 1):
            for c in range(self.n_cols):
                obs[r, c] = 0.0
        cdef int k = <int> self.a_kind[action]
        cdef int64_t h = self.a_host[action]
        cdef double reward = -self.a_cost[action]
        cdef int newly = 0
        cdef bint goal = False
        cdef int code = _OK
        cdef Py_ssize_t i, j
        cdef int64_t s
        cdef double gained
        cdef bint visible, succeeded

        if k == _NOOP or h < 0:
            code = _CONNECTION
        elif not self.reachable[h]:
            code = _CONNECTION
        elif self.access[h] < self.a_req[action]:
            code = _PERMISSION
        elif k == _EXPLOIT and (
            self.host_os[h] != self.a_os[action] or not self.services[h, self.a_sp[action]]
        ):
            code = _UNDEFINED
        elif k == _PRIVESC and (
            self.host_os[h] != self.a_os[action] or not self.processes[h, self.a_sp[action]]
        ):
            code = _UNDEFINED
        elif k == _SERVICE_SCAN:
            self._addr(h)
            for i in range(self.n_services):
                obs[h, self.off_svc + i] = <double> self.services[h, i]
        elif k == _OS_SCAN:
            self._addr(h)
            obs[h, self.off_os + self.host_os[h]] = 1.0
        elif k == _PROCESS_SCAN:
            self._addr(h)
            for i in range(self.n_processes):
                obs[h, self.off_proc + i] = <double> self.processes[h, i]
        elif k == _SUBNET_SCAN:
            s = self.host_subnet[h]
            gained = 0.0
            for j in range(self.n_hosts):
                visible = self.host_subnet[j] == s or self.adj[s, self.host_subnet[j]]
                if not visible:
                    continue
                if not self.discovered[j]:
                    self.discovered[j] = 1
                    newly += 1
                    gained += self.dvalue[j]
                self._discovery_row(j)
            reward += gained
        elif k == _EXPLOIT:
            if self.access[h] >= _USER:
                self._access_row(h)  # already achieved: no draw, no change
            else:
                succeeded = force_success or (<double> rng.random()) < self.a_prob[action]
                if succeeded:
                    self.access[h] = _USER
                    self.compromised[h] = 1
                    self.discovered[h] = 1
                    self.recompute_reachability()
                    self._access_row(h)
                else:
                    code = _FAILED
        elif k == _PRIVESC:
            if self.access[h] == _ROOT:
                self._access_row(h)  # already achieved: no draw, no change
            else:
                succeeded = force_success or (<double> rng.random()) < self.a_prob[action]
                if succeeded:
                    self.access[h] = _ROOT
                    reward += self.value[h]
                    self._access_row(h)
                    goal = True
                    for i in range(self.sensitive_slots.shape[0]):
                        if self.access[self.sensitive_slots[i]] != _ROOT:
                            goal = False
                            break
                else:
                    code = _FAILED

        if code == _OK:
            obs[self.max_hosts, 0] = 1.0
        elif code == _CONNECTION:
            obs[self.max_hosts, 1] = 1.0
        elif code == _PERMISSION:
            obs[self.max_hosts, 2] = 1.0
        elif code == _UNDEFINED:
            obs[self.max_hosts, 3] = 1.0
        return code, reward, newly, goal
