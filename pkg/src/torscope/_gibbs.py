"""Compiled collapsed-Gibbs sweeps. Uniform draws are supplied by the caller."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sweep(words, docs, z, ndk, nkw, nk, alpha, beta, uniforms):
    T = nk.shape[0]
    vbeta = beta * nkw.shape[1]
    p = np.empty(T)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(T):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        u = uniforms[i] * total
        k = T - 1
        for t in range(T):
            if u < p[t]:
                k = t
                break
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True, nogil=True)
def fold_in_sweep(words, z, nd, phi, alpha, uniforms):
    """One sweep over a single document with the word-topic table held fixed."""
    T = phi.shape[0]
    p = np.empty(T)
    for i in range(words.shape[0]):
        w = words[i]
        nd[z[i]] -= 1
        total = 0.0
        for t in range(T):
            total += phi[t, w] * (nd[t] + alpha)
            p[t] = total
        u = uniforms[i] * total
        k = T - 1
        for t in range(T):
            if u < p[t]:
                k = t
                break
        z[i] = k
        nd[k] += 1
