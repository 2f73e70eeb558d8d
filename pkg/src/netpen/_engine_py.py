"""Pure-Python transition kernel.

This is the reference implementation of one environment step: precondition
gating, state mutation, reachability propagation, reward, and the
observation rows the action reveals. ``netpen._engine_cy`` is a compiled
twin; the two must stay semantically identical, including the order in
which RNG draws are consumed (exactly one uniform draw per exploit or
escalation attempt that passes preconditions and is not already achieved).

Static scenario data is unpacked into plain Python structures at
construction; dynamic state lives in the runtime's numpy arrays so that
callers always see the current state.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

# Step outcome codes (shared with the compiled twin).
OK = 0
CONNECTION = 1
PERMISSION = 2
UNDEFINED = 3
FAILED = 4  # stochastic failure: no error flag, no state change

_SERVICE_SCAN = 0
_OS_SCAN = 1
_SUBNET_SCAN = 2
_PROCESS_SCAN = 3
_EXPLOIT = 4
_PRIVESC = 5
_NOOP = 6

_USER = 1
_ROOT = 2


class Engine:
    def __init__(self, rt):
        self.rt = rt
        self.n_hosts = rt.n_hosts
        self.max_hosts = rt.max_hosts
        self.dmz = rt.dmz

        self.subnet = rt.host_subnet.tolist()
        self.index = rt.host_index.tolist()
        self.os_ = rt.host_os.tolist()
        self.svc_rows = rt.host_services.tolist()
        self.proc_rows = rt.host_processes.tolist()
        self.sens = rt.host_sensitive.tolist()
        self.value = rt.host_value.tolist()
        self.dvalue = rt.host_dvalue.tolist()
        self.sens_slots = rt.sensitive_slots.tolist()

        self.neighbors = {
            s: [t for t in range(rt.n_subnets) if rt.adj[s, t]] for s in range(rt.n_subnets)
        }
        fw = rt.fw.tolist()
        self.fw_allows = {
            (a, b): [svc for svc, flag in enumerate(fw[a][b]) if flag]
            for a in range(rt.n_subnets)
            for b in range(rt.n_subnets)
        }

        self.a_kind = rt.a_kind.tolist()
        self.a_host = rt.a_host.tolist()
        self.a_cost = rt.a_cost.tolist()
        self.a_prob = rt.a_prob.tolist()
        self.a_req = rt.a_req.tolist()
        self.a_os = rt.a_os.tolist()
        self.a_sp = rt.a_sp.tolist()

        # Dynamic state stays in the shared numpy arrays.
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

        # Reused per step; env copies it out after each call.
        self.obs_array = np.zeros((rt.max_hosts + 1, rt.n_cols), dtype=np.float64)

    def recompute_reachability(self):
        """Monotone fixpoint: DMZ hosts, subnets with a compromise, and
        hosts whose firewall direction from a compromised subnet admits a
        service they run."""
        comp_subnets = {self.subnet[i] for i in range(self.n_hosts) if self.compromised[i]}
        for j in range(self.n_hosts):
            if self.reachable[j]:
                continue
            sj = self.subnet[j]
            if sj == self.dmz or sj in comp_subnets:
                self.reachable[j] = 1
                continue
            row = self.svc_rows[j]
            for cs in comp_subnets:
                if sj in self.neighbors.get(cs, ()) and any(
                    row[svc] for svc in self.fw_allows[(cs, sj)]
                ):
                    self.reachable[j] = 1
                    break

    def _addr(self, obs, j):
        obs[j, self.subnet[j]] = 1.0
        obs[j, self.off_host + self.index[j]] = 1.0

    def _discovery_row(self, obs, j):
        self._addr(obs, j)
        obs[j, self.off_disc] = 1.0
        obs[j, self.off_reach] = float(self.reachable[j])
        obs[j, self.off_sens] = float(self.sens[j])
        obs[j, self.off_dval] = self.dvalue[j]

    def _access_row(self, obs, j):
        self._addr(obs, j)
        obs[j, self.off_comp] = float(self.compromised[j])
        obs[j, self.off_reach] = float(self.reachable[j])
        obs[j, self.off_disc] = float(self.discovered[j])
        obs[j, self.off_sens] = float(self.sens[j])
        obs[j, self.off_access + int(self.access[j])] = 1.0

    def step(self, action, rng, force_success=False):
        """Apply one catalogue action. Returns (code, reward, newly, goal).

        Revealed rows and the outcome-flag row are written into the
        engine's reusable ``obs_array``.
        """
        obs = self.obs_array
        obs.fill(0.0)
        k = self.a_kind[action]
        h = self.a_host[action]
        reward = -self.a_cost[action]
        newly = 0
        goal = False
        code = OK

        if k == _NOOP or h < 0:
            code = CONNECTION
        elif not self.reachable[h]:
            code = CONNECTION
        elif self.access[h] < self.a_req[action]:
            code = PERMISSION
        elif k == _EXPLOIT and (
            self.os_[h] != self.a_os[action] or not self.svc_rows[h][self.a_sp[action]]
        ):
            code = UNDEFINED
        elif k == _PRIVESC and (
            self.os_[h] != self.a_os[action] or not self.proc_rows[h][self.a_sp[action]]
        ):
            code = UNDEFINED
        elif k == _SERVICE_SCAN:
            self._addr(obs, h)
            base = self.off_svc
            for i, v in enumerate(self.svc_rows[h]):
                obs[h, base + i] = float(v)
        elif k == _OS_SCAN:
            self._addr(obs, h)
            obs[h, self.off_os + self.os_[h]] = 1.0
        elif k == _PROCESS_SCAN:
            self._addr(obs, h)
            base = self.off_proc
            for i, v in enumerate(self.proc_rows[h]):
                obs[h, base + i] = float(v)
        elif k == _SUBNET_SCAN:
            s = self.subnet[h]
            visible = set(self.neighbors[s])
            visible.add(s)
            gained = 0.0
            for j in range(self.n_hosts):
                if self.subnet[j] not in visible:
                    continue
                if not self.discovered[j]:
                    self.discovered[j] = 1
                    newly += 1
                    gained += self.dvalue[j]
                self._discovery_row(obs, j)
            reward += gained
        elif k == _EXPLOIT:
            if self.access[h] >= _USER:
                self._access_row(obs, h)  # already achieved: no draw, no change
            elif force_success or rng.random() < self.a_prob[action]:
                self.access[h] = _USER
                self.compromised[h] = 1
                self.discovered[h] = 1
                self.recompute_reachability()
                self._access_row(obs, h)
            else:
                code = FAILED
        elif k == _PRIVESC:
            if self.access[h] == _ROOT:
                self._access_row(obs, h)  # already achieved: no draw, no change
            elif force_success or rng.random() < self.a_prob[action]:
                self.access[h] = _ROOT
                reward += self.value[h]
                self._access_row(obs, h)
                goal = all(self.access[i] == _ROOT for i in self.sens_slots)
            else:
                code = FAILED

        flags = obs[self.max_hosts]
        if code == OK:
            flags[0] = 1.0
        elif code == CONNECTION:
            flags[1] = 1.0
        elif code == PERMISSION:
            flags[2] = 1.0
        elif code == UNDEFINED:
            flags[3] = 1.0
        return code, reward, newly, goal
