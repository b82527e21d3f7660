"""Lyapunov certificate solver against an independent vectorized oracle."""

import numpy as np
import pytest

from consensus_net.errors import ValidationError
from consensus_net.graph import DirectedGraph, build_laplacian
from consensus_net.spectral import solve_P, spectral_norm

from conftest import random_tree_graph


def kron_solve_P(L, v, Q, alpha):
    """Oracle: solve the certificate equation as one dense linear system in
    vec(P), independent of the shifted-Lyapunov route."""
    n = L.shape[0]
    L_shift = L + alpha * np.outer(np.ones(n), v)
    A = np.kron(L_shift.T, np.eye(n)) + np.kron(np.eye(n), L_shift.T)
    p = np.linalg.solve(A, Q.reshape(-1))
    return p.reshape(n, n)


def test_scalar_case():
    lap = build_laplacian(DirectedGraph(np.zeros((1, 1))))
    cert = solve_P(lap, Q=np.eye(1), alpha=1.0)
    # the equation collapses to 0 = Q - 2*alpha*P
    assert cert.P[0, 0] == pytest.approx(0.5, abs=1e-14)


def test_two_node_chain_hand_solution():
    g = DirectedGraph(np.array([[0.0, 0.0], [1.0, 0.0]]))
    lap = build_laplacian(g)
    cert = solve_P(lap, Q=np.eye(2), alpha=1.0)
    # shifted matrix is the identity, so P = Q/2
    assert np.allclose(cert.P, np.eye(2) / 2, atol=1e-12)
    # original-form identity: P L + L^T P == Q - [P 1 v^T + v 1^T P]
    lhs = cert.P @ lap.L + lap.L.T @ cert.P
    assert np.allclose(lhs, np.array([[0.0, -0.5], [-0.5, 1.0]]), atol=1e-12)
    ones = np.ones(2)
    rhs = np.eye(2) - (np.outer(cert.P @ ones, lap.v_left) + np.outer(lap.v_left, cert.P @ ones))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_default_graph_certificate(default_lap, default_cert):
    cert = default_cert
    assert cert.residual < 1e-8
    assert cert.min_eig_P > 0
    assert np.abs(cert.P - cert.P.T).max() < 1e-12
    P_oracle = kron_solve_P(default_lap.L, default_lap.v_left, np.eye(5), 1.0)
    assert np.abs(cert.P - P_oracle).max() < 1e-8


def test_random_graphs_residual_and_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        g = random_tree_graph(rng, n, extra_edges=int(rng.integers(0, n)))
        lap = build_laplacian(g)
        Q = np.eye(n)
        cert = solve_P(lap, Q=Q, alpha=1.0)
        assert cert.residual < 1e-8 * max(1.0, spectral_norm(Q))
        assert cert.min_eig_P > 0
        P_oracle = kron_solve_P(lap.L, lap.v_left, Q, 1.0)
        assert np.abs(cert.P - P_oracle).max() < 1e-8


def test_scaling_linearity(default_lap):
    c = 3.7
    base = solve_P(default_lap, Q=np.eye(5), alpha=1.0)
    scaled = solve_P(default_lap, Q=c * np.eye(5), alpha=1.0)
    assert np.abs(scaled.P - c * base.P).max() < 1e-10 * c


def test_lambda_bounds_tight(default_lap, default_cert):
    assert default_cert.lambda_P == pytest.approx(spectral_norm(default_cert.P), rel=1e-12)
    assert default_cert.lambda_L == pytest.approx(spectral_norm(default_lap.L), rel=1e-12)


def test_alpha_variation(default_lap):
    # any positive alpha must produce a valid certificate
    for alpha in (0.1, 1.0, 10.0):
        cert = solve_P(default_lap, alpha=alpha)
        assert cert.residual < 1e-8
        assert cert.min_eig_P > 0


def test_rejects_bad_inputs(default_lap):
    with pytest.raises(ValidationError, match="alpha"):
        solve_P(default_lap, alpha=0.0)
    with pytest.raises(ValidationError, match="symmetric"):
        solve_P(default_lap, Q=np.triu(np.ones((5, 5))))
    with pytest.raises(ValidationError, match="positive definite"):
        solve_P(default_lap, Q=-np.eye(5))
    no_tree = build_laplacian(DirectedGraph(np.zeros((2, 2))))
    with pytest.raises(ValidationError, match="spanning tree"):
        solve_P(no_tree)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    # M^T M of [[0,0],[-1,1]] has eigenvalues {2, 0}
    assert spectral_norm(np.array([[0.0, 0.0], [-1.0, 1.0]])) == pytest.approx(
        np.sqrt(2.0), abs=1e-10)
    assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, abs=1e-12)
