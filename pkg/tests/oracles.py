"""Brute-force reference computations used by several test modules."""
import numpy as np

from entsim.fock import beam_splitter_matrix


def direct_gaussify(rho, sigma, eta=1.0):
    """One Gaussification step by explicit linear optics on four modes.

    Copy 1 (modes A1, B1) holds ``rho``, copy 2 (A2, B2) holds ``sigma``. Real
    50:50 splitters mix A1 with A2 and B1 with B2; the no-click POVM of
    efficiency ``eta`` acts on A2 and B2. Returns the unnormalized output on
    all photon numbers up to twice the input cutoff.
    """
    n = rho.shape[0] - 1
    s = 1 / np.sqrt(2)
    U = beam_splitter_matrix(s, s, n, 2 * n)  # U[out1, out2, in1, in2]
    ks = [0] if eta == 1.0 else range(2 * n + 1)
    out = 0
    for k in ks:
        for l in ks:
            w = (1 - eta) ** (k + l) if k + l else 1.0
            Vk, Vl = U[:, k], U[:, l]
            y = np.einsum("Asp,stum,pqvw->Atumqvw", Vk, rho, sigma, optimize=True)
            y = np.einsum("Btq,Atumqvw->ABumvw", Vl, y)
            y = np.einsum("Cuv,ABumvw->ABCmw", Vk.conj(), y)
            out = out + w * np.einsum("Dmw,ABCmw->ABCD", Vl.conj(), y)
    return out


def procrustean_direct(rho, T, m=1):
    """Bob's mode (second) mixed with a single photon at transmittivity T; m photons counted
    in the ancilla output port. Returns the unnormalized two-mode output."""
    n = rho.shape[0] - 1
    U = beam_splitter_matrix(T, np.sqrt(1 - T * T), n + 1, n + 1)
    K = U[: n + 1, m, : n + 1, 1]  # <b', m| U |b, 1>
    return np.einsum("Bb,abcd,Dd->aBcD", K, rho, K.conj())
