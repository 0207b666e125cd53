import numpy as np
from krylovchaos.model import SpinChainParams, build_hamiltonian, sample_disorder

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2)


def site_op(op, j, L):
    """``op`` on site ``j`` (0-based, site 0 leftmost / most significant)."""
    out = np.eye(1)
    for k in range(L):
        out = np.kron(out, op if k == j else I2)
    return out


def kron_hamiltonian(L, J, h, delta, gamma):
    """Reference assembly from explicit Kronecker products of Pauli strings."""
    d = 2**L
    H = np.zeros((d, d), dtype=complex)
    for j in range(L - 1):
        H += J * (site_op(SX, j, L) @ site_op(SX, j + 1, L) + site_op(SY, j, L) @ site_op(SY, j + 1, L))
    for j in range(L):
        H += h * site_op(SX, j, L) + (delta[j] + 1j * gamma[j]) * site_op(SZ, j, L)
    return H


def plain_lanczos(H, v0, steps):
    """Textbook Hermitian Lanczos with full reorthogonalization."""
    d = H.shape[0]
    V = np.zeros((d, steps), dtype=complex)
    alpha, beta = [], []
    V[:, 0] = v0 / np.linalg.norm(v0)
    for k in range(steps):
        w = H @ V[:, k]
        alpha.append(np.vdot(V[:, k], w).real)
        w -= V[:, : k + 1] @ (V[:, : k + 1].conj().T @ w)
        w -= V[:, : k + 1] @ (V[:, : k + 1].conj().T @ w)
        if k + 1 < steps:
            beta.append(np.linalg.norm(w))
            V[:, k + 1] = w / beta[-1]
    return np.array(alpha), np.array(beta)


def make_h(L, W_gamma, seed=0, **kw):
    params = SpinChainParams(L=L, W_gamma=W_gamma, **kw)
    return build_hamiltonian(params, sample_disorder(params, seed))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
